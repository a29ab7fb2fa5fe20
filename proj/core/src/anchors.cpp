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

#include "dfpn/anchors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dfpn {

std::vector<Box> generate_anchors(std::size_t level_height, std::size_t level_width, int stride,
                                  const AnchorConfig& config) {
    if (level_height == 0 || level_width == 0 || stride <= 0) {
        throw std::invalid_argument("generate_anchors: level dimensions and stride must be positive");
    }
    const double base = config.base_size_factor * stride;
    std::vector<std::pair<double, double>> shapes;
    shapes.reserve(config.anchors_per_location());
    for (double r : config.ratios) {
        for (double s : config.scales) {
            const double side = base * s;
            shapes.emplace_back(side * std::sqrt(r), side / std::sqrt(r));
        }
    }

    std::vector<Box> anchors;
    anchors.reserve(level_height * level_width * shapes.size());
    for (std::size_t i = 0; i < level_height; ++i) {
        const double cy = (static_cast<double>(i) + 0.5) * stride;
        for (std::size_t j = 0; j < level_width; ++j) {
            const double cx = (static_cast<double>(j) + 0.5) * stride;
            for (const auto& [w, h] : shapes) anchors.push_back(Box::from_center(cx, cy, w, h));
        }
    }
    return anchors;
}

void write_anchor_csv(std::ostream& os, std::span<const LevelAnchors> levels, const AnchorConfig& config) {
    const std::size_t per_cell = config.anchors_per_location();
    os << "level,cell_y,cell_x,ratio,scale,x1,y1,x2,y2\n";
    for (const auto& level : levels) {
        for (std::size_t idx = 0; idx < level.boxes.size(); ++idx) {
            const std::size_t cell = idx / per_cell;
            const std::size_t shape = idx % per_cell;
            const Box& b = level.boxes[idx];
            os << level.level << ',' << cell / level.width << ',' << cell % level.width << ','
               << config.ratios[shape / config.scales.size()] << ',' << config.scales[shape % config.scales.size()]
               << ',' << b.x1 << ',' << b.y1 << ',' << b.x2 << ',' << b.y2 << '\n';
        }
    }
}

std::size_t AssignmentResult::positive_count() const {
    return static_cast<std::size_t>(std::count_if(labels.begin(), labels.end(), [](int l) { return l >= 0; }));
}

std::size_t AssignmentResult::background_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kBackground));
}

std::size_t AssignmentResult::ignore_count() const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), kIgnore));
}

AssignmentResult assign_targets(std::span<const Box> anchors, std::span<const GroundTruth> gts, int num_classes,
                                const AssignConfig& config) {
    if (num_classes < 1) throw std::invalid_argument("assign_targets: need at least one class");
    if (anchors.empty()) throw std::invalid_argument("assign_targets: no anchors");

    std::vector<std::size_t> usable;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        if (gts[g].box.degenerate()) {
            spdlog::warn("assign_targets: skipping ground truth {} with non-positive area", g);
            continue;
        }
        if (gts[g].class_id < 0 || gts[g].class_id >= num_classes) {
            throw std::out_of_range("assign_targets: class " + std::to_string(gts[g].class_id) +
                                    " outside [0, " + std::to_string(num_classes) + ")");
        }
        usable.push_back(g);
    }

    AssignmentResult result;
    result.labels.assign(anchors.size(), AssignmentResult::kBackground);
    result.deltas.assign(anchors.size(), std::nullopt);
    result.matched_gt.assign(anchors.size(), -1);

    for (std::size_t a = 0; a < anchors.size(); ++a) {
        double best = 0.0;
        int best_gt = -1;
        for (std::size_t g : usable) {
            const double v = iou(anchors[a], gts[g].box);
            if (best_gt < 0 || v > best) {
                best = v;
                best_gt = static_cast<int>(g);
            }
        }
        if (best_gt >= 0 && best >= config.positive_iou) {
            const auto& gt = gts[static_cast<std::size_t>(best_gt)];
            result.labels[a] = gt.class_id;
            result.deltas[a] = encode(gt.box, anchors[a]);
            result.matched_gt[a] = best_gt;
        } else if (best >= config.negative_iou) {
            result.labels[a] = AssignmentResult::kIgnore;
        }
    }
    return result;
}

}  // namespace dfpn
