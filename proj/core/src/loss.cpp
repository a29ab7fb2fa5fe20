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

#include "dfpn/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dfpn {

namespace {

double stable_sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double positive_normalizer(const AssignmentResult& assignment) {
    return static_cast<double>(std::max<std::size_t>(1, assignment.positive_count()));
}

}  // namespace

void FocalParams::validate() const {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("focal alpha must lie in (0, 1]");
    if (!(gamma >= 0.0)) throw std::invalid_argument("focal gamma must be non-negative");
}

double focal_loss(double p, const FocalParams& params) {
    p = std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
    return params.alpha * params.alpha * std::pow(1.0 - p, params.gamma) * -std::log(p);
}

FocalTerm focal_term(double logit, bool positive, const FocalParams& params) {
    // The negative term is the positive term at -logit.
    const double x = positive ? logit : -logit;
    const double raw = stable_sigmoid(x);
    const double p = std::clamp(raw, kProbabilityFloor, 1.0 - kProbabilityFloor);
    const double q = 1.0 - p;
    const double a2 = params.alpha * params.alpha;
    const double g = params.gamma;
    const double log_p = std::log(p);

    FocalTerm term;
    term.value = a2 * std::pow(q, g) * -log_p;
    if (raw == p) {
        // d/dx [(1-p)^g (-ln p)] with dp/dx = p(1-p)
        const double dx = a2 * (g * std::pow(q, g) * p * log_p - std::pow(q, g + 1.0));
        term.grad = positive ? dx : -dx;
    }
    return term;
}

Tensor classification_loss(const Tensor& logits, const AssignmentResult& assignment, const FocalParams& params) {
    params.validate();
    if (logits.rank() != 2) throw ShapeError("classification_loss: logits must be (N, K), got " + shape_to_string(logits.shape()));
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    if (n == 0) throw std::invalid_argument("classification_loss: no anchors");
    if (assignment.size() != n) {
        throw ShapeError("classification_loss: " + std::to_string(n) + " logit rows but " +
                         std::to_string(assignment.size()) + " assigned anchors");
    }
    const double norm = positive_normalizer(assignment);
    const auto x = logits.values();
    double total = 0.0;
    auto grads = std::make_shared<std::vector<double>>(x.size(), 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        const int label = assignment.labels[a];
        if (label == AssignmentResult::kIgnore) continue;
        for (std::size_t c = 0; c < k; ++c) {
            const auto t = focal_term(x[a * k + c], label == static_cast<int>(c), params);
            total += t.value;
            (*grads)[a * k + c] = t.grad / norm;
        }
    }
    Tensor in = logits;
    return Tensor::from_op({}, {total / norm}, {in}, [in, grads](std::span<const double> dout) {
        auto dx = in.grad_accumulator();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dout[0] * (*grads)[i];
    });
}

double smooth_l1(double d) {
    const double ad = std::abs(d);
    return ad < 1.0 ? 0.5 * d * d : ad - 0.5;
}

Tensor regression_loss(const Tensor& deltas, const AssignmentResult& assignment) {
    if (deltas.rank() != 2 || deltas.dim(1) != 4) {
        throw ShapeError("regression_loss: deltas must be (N, 4), got " + shape_to_string(deltas.shape()));
    }
    const std::size_t n = deltas.dim(0);
    if (assignment.size() != n) throw ShapeError("regression_loss: delta rows and assignment size differ");
    const double norm = positive_normalizer(assignment);
    const auto x = deltas.values();
    double total = 0.0;
    auto grads = std::make_shared<std::vector<double>>(x.size(), 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        if (assignment.labels[a] < 0) continue;
        const auto& target = assignment.deltas[a];
        if (!target) throw std::logic_error("regression_loss: positive anchor without a target");
        const double t[4] = {target->tx, target->ty, target->tw, target->th};
        for (std::size_t c = 0; c < 4; ++c) {
            const double d = x[a * 4 + c] - t[c];
            total += smooth_l1(d);
            (*grads)[a * 4 + c] = (std::abs(d) < 1.0 ? d : (d > 0.0 ? 1.0 : -1.0)) / norm;
        }
    }
    Tensor in = deltas;
    return Tensor::from_op({}, {total / norm}, {in}, [in, grads](std::span<const double> dout) {
        auto dx = in.grad_accumulator();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dout[0] * (*grads)[i];
    });
}

Tensor total_loss(const Tensor& class_loss, const Tensor& reg_loss, double regression_weight) {
    const double c = class_loss.item();
    const double r = reg_loss.item();
    if (!std::isfinite(c) || !std::isfinite(r)) {
        throw std::runtime_error("non-finite loss: class_loss=" + std::to_string(c) + " reg_loss=" + std::to_string(r));
    }
    Tensor tc = class_loss, tr = reg_loss;
    return Tensor::from_op({}, {c + regression_weight * r}, {tc, tr},
                           [tc, tr, regression_weight](std::span<const double> dout) {
                               if (tc.requires_grad()) tc.grad_accumulator()[0] += dout[0];
                               if (tr.requires_grad()) tr.grad_accumulator()[0] += regression_weight * dout[0];
                           });
}

}  // namespace dfpn
