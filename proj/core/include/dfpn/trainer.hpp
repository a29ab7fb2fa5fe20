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

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dfpn/anchors.hpp"
#include "dfpn/checkpoint.hpp"
#include "dfpn/data.hpp"
#include "dfpn/loss.hpp"
#include "dfpn/model.hpp"

namespace dfpn {

struct TrainConfig {
    std::size_t epochs = 30;
    SgdConfig sgd;
    FocalParams focal;
    double regression_weight = 1.0;
    double flip_probability = 0.5;
    /// Rescales the gradient so its global L2 norm is at most this; 0 disables.
    double max_grad_norm = 0.0;
    AssignConfig assign;
    bool shuffle = true;

    void validate() const;
};

/// One row of the training log.
struct LossRecord {
    std::size_t iteration = 0;
    std::size_t epoch = 0;
    double class_loss = 0.0;
    double reg_loss = 0.0;
    double total = 0.0;
    std::size_t positives = 0;
};

std::string loss_csv_header();
std::string to_csv_row(const LossRecord& record);

struct LossBreakdown {
    Tensor class_loss;
    Tensor reg_loss;
    Tensor total;
    std::size_t positives = 0;
};

/// Scales every gradient by min(1, max_norm / norm) and returns the norm
/// before scaling. Parameters without a gradient are skipped.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

/// Non-ignored annotations as assignment targets.
std::vector<GroundTruth> training_targets(const Sample& sample);

/// Forward pass, anchor assignment and loss for one sample.
LossBreakdown compute_loss(const Detector& detector, const Sample& sample, const TrainConfig& config);

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-image SGD. Epoch order and flip decisions derive from
/// (sgd.seed, epoch, sample index) only, so a run resumed from an epoch
/// checkpoint continues exactly as the uninterrupted run would.
class Trainer {
public:
    Trainer(Detector& detector, TrainConfig config);

    /// One SGD step on `sample`. Throws TrainingError on a non-finite loss
    /// (parameters are left untouched in that case).
    LossRecord step(const Sample& sample);

    /// Runs the next epoch over `samples` and returns its log rows.
    std::vector<LossRecord> run_epoch(std::span<const Sample> samples);

    std::size_t completed_epochs() const { return epoch_; }
    std::size_t iteration() const { return iteration_; }

    /// Model parameters plus training progress ("train.epoch", "train.iteration").
    Checkpoint checkpoint() const;
    void resume(const Checkpoint& checkpoint);

    /// Visiting order of `count` samples in `epoch`.
    static std::vector<std::size_t> epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t count,
                                                bool shuffle = true);
    static bool flip_decision(std::uint64_t seed, std::size_t epoch, std::size_t sample_index, double probability);

private:
    Detector& detector_;
    TrainConfig config_;
    std::size_t epoch_ = 0;
    std::size_t iteration_ = 0;
};

}  // namespace dfpn
