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

#include "dfpn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace dfpn {

namespace {

constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kFlipStream = 2;

}  // namespace

void TrainConfig::validate() const {
    sgd.validate();
    focal.validate();
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) throw std::invalid_argument("flip probability must lie in [0, 1]");
    if (!(regression_weight >= 0.0)) throw std::invalid_argument("regression weight must be non-negative");
    if (!(max_grad_norm >= 0.0)) throw std::invalid_argument("max gradient norm must be non-negative");
}

std::string loss_csv_header() { return "iteration,class_loss,reg_loss,total,positive_anchor_count"; }

std::string to_csv_row(const LossRecord& r) {
    std::ostringstream os;
    os.precision(17);
    os << r.iteration << ',' << r.class_loss << ',' << r.reg_loss << ',' << r.total << ',' << r.positives;
    return os.str();
}

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params)
        for (double g : p.grad()) sq += g * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (auto& p : params) {
            if (!p.has_grad()) continue;
            for (double& g : p.grad_accumulator()) g *= scale;
        }
    }
    return norm;
}

std::vector<GroundTruth> training_targets(const Sample& sample) {
    std::vector<GroundTruth> gts;
    for (const auto& a : sample.annotations)
        if (!a.ignore) gts.push_back({a.box, a.class_id});
    return gts;
}

LossBreakdown compute_loss(const Detector& detector, const Sample& sample, const TrainConfig& config) {
    const auto outputs = detector.forward(sample.image);
    const auto levels = detector.anchors(sample.height(), sample.width());
    std::vector<Box> anchors;
    for (const auto& l : levels) anchors.insert(anchors.end(), l.boxes.begin(), l.boxes.end());

    std::vector<Tensor> class_maps, box_maps;
    for (const auto& o : outputs) {
        class_maps.push_back(o.class_logits);
        box_maps.push_back(o.box_deltas);
    }
    const auto a = static_cast<std::size_t>(detector.manifest().head.anchors_per_location);
    const Tensor logits = gather_anchor_rows(class_maps, a, static_cast<std::size_t>(detector.num_classes()));
    const Tensor deltas = gather_anchor_rows(box_maps, a, 4);

    const auto gts = training_targets(sample);
    const auto assignment = assign_targets(anchors, gts, detector.num_classes(), config.assign);

    LossBreakdown out;
    out.class_loss = classification_loss(logits, assignment, config.focal);
    out.reg_loss = regression_loss(deltas, assignment);
    out.total = total_loss(out.class_loss, out.reg_loss, config.regression_weight);
    out.positives = assignment.positive_count();
    return out;
}

Trainer::Trainer(Detector& detector, TrainConfig config) : detector_(detector), config_(std::move(config)) {
    config_.validate();
}

LossRecord Trainer::step(const Sample& sample) {
    LossBreakdown loss;
    try {
        loss = compute_loss(detector_, sample, config_);
    } catch (const std::runtime_error& e) {
        throw TrainingError("iteration " + std::to_string(iteration_) + " (" + sample.image_id + "): " + e.what());
    }
    loss.total.backward();
    if (config_.max_grad_norm > 0.0) clip_grad_norm(detector_.parameters().tensors(), config_.max_grad_norm);
    sgd_step(detector_.parameters().tensors(), config_.sgd);

    LossRecord record;
    record.iteration = iteration_++;
    record.epoch = epoch_;
    record.class_loss = loss.class_loss.item();
    record.reg_loss = loss.reg_loss.item();
    record.total = loss.total.item();
    record.positives = loss.positives;
    return record;
}

std::vector<LossRecord> Trainer::run_epoch(std::span<const Sample> samples) {
    std::vector<LossRecord> records;
    records.reserve(samples.size());
    for (std::size_t idx : epoch_order(config_.sgd.seed, epoch_, samples.size(), config_.shuffle)) {
        const bool flip = flip_decision(config_.sgd.seed, epoch_, idx, config_.flip_probability);
        records.push_back(step(flip ? horizontal_flip(samples[idx]) : samples[idx]));
    }
    ++epoch_;
    return records;
}

Checkpoint Trainer::checkpoint() const {
    Checkpoint ckpt = detector_.to_checkpoint();
    ckpt.tensors.push_back({"train.epoch", {1}, {static_cast<double>(epoch_)}});
    ckpt.tensors.push_back({"train.iteration", {1}, {static_cast<double>(iteration_)}});
    return ckpt;
}

void Trainer::resume(const Checkpoint& checkpoint) {
    detector_.load_checkpoint(checkpoint);
    const auto* epoch = checkpoint.find("train.epoch");
    const auto* iteration = checkpoint.find("train.iteration");
    if (!epoch || !iteration || epoch->values.size() != 1 || iteration->values.size() != 1) {
        throw CheckpointError("checkpoint has no training progress; cannot resume");
    }
    epoch_ = static_cast<std::size_t>(epoch->values[0]);
    iteration_ = static_cast<std::size_t>(iteration->values[0]);
}

std::vector<std::size_t> Trainer::epoch_order(std::uint64_t seed, std::size_t epoch, std::size_t count, bool shuffle) {
    std::vector<std::size_t> order(count);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (shuffle) {
        auto rng = make_rng(seed, kShuffleStream, epoch);
        std::shuffle(order.begin(), order.end(), rng);
    }
    return order;
}

bool Trainer::flip_decision(std::uint64_t seed, std::size_t epoch, std::size_t sample_index, double probability) {
    auto rng = make_rng(seed ^ (kFlipStream << 56), epoch, sample_index);
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < probability;
}

}  // namespace dfpn
