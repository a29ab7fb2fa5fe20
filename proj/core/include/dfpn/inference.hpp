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

#include <span>
#include <vector>

#include "dfpn/geometry.hpp"
#include "dfpn/model.hpp"

namespace dfpn {

struct Detection {
    Box box;
    int class_id = 0;
    double score = 0.0;

    bool operator==(const Detection&) const = default;
};

struct InferenceConfig {
    double score_threshold = 0.05;
    std::size_t per_level_topk = 1000;
    double nms_iou = 0.5;
    std::size_t max_detections = 100;

    void validate() const;
};

/// Candidates from one level: sigmoid scores at or above the threshold, the
/// top-k of those by score, decoded against their anchors and clipped to the
/// image. `class_logits` is (n, K) and `box_deltas` (n, 4), rows in anchor order.
std::vector<Detection> decode_level(std::span<const double> class_logits, std::span<const double> box_deltas,
                                    std::span<const Box> anchors, int num_classes, const InferenceConfig& config,
                                    double image_width, double image_height);

/// Orders detections by score descending, then x1 ascending, then y1
/// ascending; remaining ties keep input order.
void sort_detections(std::vector<Detection>& detections);

/// Class-wise greedy NMS. A candidate is dropped when a kept detection of the
/// same class overlaps it with IoU > iou_threshold. Output is sorted as by
/// sort_detections().
std::vector<Detection> nms(std::vector<Detection> candidates, double iou_threshold);

/// Full pipeline: forward pass, per-level decoding, NMS over all levels,
/// truncation to max_detections.
std::vector<Detection> detect(const Tensor& image, const Detector& detector, const InferenceConfig& config = {});

}  // namespace dfpn
