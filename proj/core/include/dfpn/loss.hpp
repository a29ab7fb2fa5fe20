/********************************************************************************
* Copyright 2026 The DFPN Authors
*
* Licensed under the Apache License, Version 2.0 (the "License");
* you may not use this file except in compliance with the License.
* You may obtain a copy of the License at
*
*    http://www.apache.org/licenses/LICENSE-2.0
*
* Unless required by applicable law or agreed to in writing, software
* distributed under the License is distributed on an "AS IS" BASIS,
* WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
* See the License for the specific language governing permissions and
* limitations under the License.
********************************************************************************/

#pragma once

#include "dfpn/anchors.hpp"
#include "dfpn/tensor.hpp"

namespace dfpn {

struct FocalParams {
    double alpha = 0.25;
    double gamma = 2.0;

    void validate() const;
};

/// Probabilities are clamped to [kProbabilityFloor, 1 - kProbabilityFloor].
inline constexpr double kProbabilityFloor = 1e-12;

/// alpha^2 * (1 - p)^gamma * (-ln p), with p the probability of the true class.
double focal_loss(double p, const FocalParams& params);

/// Focal term for a sigmoid logit whose target is 1 (`positive`) or 0, and its
/// derivative with respect to the logit.
struct FocalTerm {
    double value = 0.0;
    double grad = 0.0;
};
FocalTerm focal_term(double logit, bool positive, const FocalParams& params);

/// Sum of per-anchor, per-class binary focal terms over non-ignored anchors,
/// divided by max(1, positive count). `logits` is (N, K), rows in anchor order.
Tensor classification_loss(const Tensor& logits, const AssignmentResult& assignment, const FocalParams& params);

/// 0.5 d^2 for |d| < 1, |d| - 0.5 otherwise.
double smooth_l1(double d);

/// Smooth-L1 between predicted and target deltas of positive anchors, divided
/// by max(1, positive count). `deltas` is (N, 4) as (tx, ty, tw, th).
Tensor regression_loss(const Tensor& deltas, const AssignmentResult& assignment);

/// class_loss + regression_weight * reg_loss. Throws std::runtime_error if
/// either input is not finite.
Tensor total_loss(const Tensor& class_loss, const Tensor& reg_loss, double regression_weight = 1.0);

}  // namespace dfpn
