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

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "dfpn/geometry.hpp"

namespace dfpn {

struct AnchorConfig {
    /// Width-to-height ratios: 1:1, 1:2, 2:1.
    std::vector<double> ratios{1.0, 0.5, 2.0};
    std::vector<double> scales{1.0, 1.2599210498948732, 1.5874010519681994};
    /// Base anchor side = base_size_factor * stride.
    double base_size_factor = 4.0;

    std::size_t anchors_per_location() const { return ratios.size() * scales.size(); }
};

/// Anchors for one H x W level, row-major over cells, then ratio-major and
/// scale-minor within a cell.
std::vector<Box> generate_anchors(std::size_t level_height, std::size_t level_width, int stride,
                                  const AnchorConfig& config = {});

struct LevelAnchors {
    int level = 0;
    int stride = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<Box> boxes;
};

void write_anchor_csv(std::ostream& os, std::span<const LevelAnchors> levels, const AnchorConfig& config = {});

struct GroundTruth {
    Box box;
    int class_id = 0;
};

struct AssignConfig {
    double positive_iou = 0.5;
    double negative_iou = 0.4;
};

/// Per-anchor training targets.
struct AssignmentResult {
    static constexpr int kBackground = -1;
    static constexpr int kIgnore = -2;

    /// Class index in [0, K), kBackground or kIgnore.
    std::vector<int> labels;
    /// Set exactly for anchors with a class label.
    std::vector<std::optional<BoxDelta>> deltas;
    /// Index into the gt list for positive anchors, -1 otherwise.
    std::vector<int> matched_gt;

    std::size_t size() const { return labels.size(); }
    std::size_t positive_count() const;
    std::size_t background_count() const;
    std::size_t ignore_count() const;
};

/// IoU banding: max IoU >= 0.5 takes the argmax gt's class (lowest index on
/// ties), < 0.4 is background, anything between is ignored. Gts with
/// non-positive area are skipped.
AssignmentResult assign_targets(std::span<const Box> anchors, std::span<const GroundTruth> gts, int num_classes,
                                const AssignConfig& config = {});

}  // namespace dfpn
