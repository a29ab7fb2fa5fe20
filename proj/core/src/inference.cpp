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

#include "dfpn/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dfpn {

void InferenceConfig::validate() const {
    if (!(score_threshold > 0.0 && score_threshold < 1.0)) throw std::invalid_argument("score threshold must lie in (0, 1)");
    if (!(nms_iou > 0.0 && nms_iou < 1.0)) throw std::invalid_argument("NMS IoU must lie in (0, 1)");
    if (per_level_topk < 1) throw std::invalid_argument("per-level top-k must be at least 1");
    if (max_detections < 1) throw std::invalid_argument("max detections must be at least 1");
}

std::vector<Detection> decode_level(std::span<const double> class_logits, std::span<const double> box_deltas,
                                    std::span<const Box> anchors, int num_classes, const InferenceConfig& config,
                                    double image_width, double image_height) {
    const std::size_t n = anchors.size();
    const auto k = static_cast<std::size_t>(num_classes);
    if (class_logits.size() != n * k || box_deltas.size() != n * 4) {
        throw ShapeError("decode_level: outputs do not match " + std::to_string(n) + " anchors x " +
                         std::to_string(k) + " classes");
    }

    struct Candidate {
        double score;
        std::size_t flat;  // anchor * K + class
    };
    std::vector<Candidate> kept;
    for (std::size_t i = 0; i < class_logits.size(); ++i) {
        const double x = class_logits[i];
        const double score = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
        if (score >= config.score_threshold) kept.push_back({score, i});
    }
    auto by_score = [](const Candidate& a, const Candidate& b) {
        return a.score != b.score ? a.score > b.score : a.flat < b.flat;
    };
    if (kept.size() > config.per_level_topk) {
        std::partial_sort(kept.begin(), kept.begin() + static_cast<long>(config.per_level_topk), kept.end(), by_score);
        kept.resize(config.per_level_topk);
    } else {
        std::sort(kept.begin(), kept.end(), by_score);
    }

    std::vector<Detection> out;
    out.reserve(kept.size());
    for (const auto& c : kept) {
        const std::size_t a = c.flat / k;
        const BoxDelta d{box_deltas[a * 4], box_deltas[a * 4 + 1], box_deltas[a * 4 + 2], box_deltas[a * 4 + 3]};
        out.push_back({clip(decode(d, anchors[a]), image_width, image_height), static_cast<int>(c.flat % k), c.score});
    }
    return out;
}

void sort_detections(std::vector<Detection>& detections) {
    std::stable_sort(detections.begin(), detections.end(), [](const Detection& a, const Detection& b) {
        if (a.score != b.score) return a.score > b.score;
        if (a.box.x1 != b.box.x1) return a.box.x1 < b.box.x1;
        return a.box.y1 < b.box.y1;
    });
}

std::vector<Detection> nms(std::vector<Detection> candidates, double iou_threshold) {
    sort_detections(candidates);
    std::vector<Detection> kept;
    std::vector<std::vector<std::size_t>> kept_by_class;
    for (const auto& det : candidates) {
        if (det.class_id < 0) throw std::invalid_argument("nms: negative class id");
        const auto cls = static_cast<std::size_t>(det.class_id);
        if (cls >= kept_by_class.size()) kept_by_class.resize(cls + 1);
        auto& same = kept_by_class[cls];
        const bool suppressed = std::any_of(same.begin(), same.end(),
                                            [&](std::size_t i) { return iou(kept[i].box, det.box) > iou_threshold; });
        if (suppressed) continue;
        same.push_back(kept.size());
        kept.push_back(det);
    }
    return kept;
}

std::vector<Detection> detect(const Tensor& image, const Detector& detector, const InferenceConfig& config) {
    config.validate();
    NoGradGuard no_grad;
    const std::size_t h = image.dim(2), w = image.dim(3);
    const auto outputs = detector.forward(image);
    const auto anchors = detector.anchors(h, w);
    if (anchors.size() != outputs.size()) throw std::logic_error("detect: anchor levels and head outputs disagree");

    const auto a = static_cast<std::size_t>(detector.manifest().head.anchors_per_location);
    const int k = detector.num_classes();
    std::vector<Detection> candidates;
    for (std::size_t l = 0; l < outputs.size(); ++l) {
        const Tensor logits = gather_anchor_rows(std::span(&outputs[l].class_logits, 1), a, static_cast<std::size_t>(k));
        const Tensor deltas = gather_anchor_rows(std::span(&outputs[l].box_deltas, 1), a, 4);
        auto level = decode_level(logits.values(), deltas.values(), anchors[l].boxes, k, config,
                                  static_cast<double>(w), static_cast<double>(h));
        candidates.insert(candidates.end(), level.begin(), level.end());
    }
    auto result = nms(std::move(candidates), config.nms_iou);
    if (result.size() > config.max_detections) result.resize(config.max_detections);
    return result;
}

}  // namespace dfpn
