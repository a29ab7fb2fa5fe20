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

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dfpn/geometry.hpp"

namespace dfpn {

/// Ground-truth object. Ignored regions neither reward nor penalise detections.
struct Annotation {
    std::string image_id;
    Box box;
    int class_id = 0;
    bool ignore = false;

    bool operator==(const Annotation&) const = default;
};

/// One row of a detection dump.
struct DetectionRecord {
    std::string image_id;
    int class_id = 0;
    double score = 0.0;
    Box box;

    bool operator==(const DetectionRecord&) const = default;
};

/// Detection dumps are JSON lines:
/// {"image_id": "...", "class_id": 1, "score": 0.9, "box": [x1, y1, x2, y2]}
std::string to_json_line(const DetectionRecord& record);
/// Throws std::invalid_argument on a malformed line.
DetectionRecord parse_detection_line(const std::string& line);
void write_detection_dump(const std::filesystem::path& path, std::span<const DetectionRecord> records);
/// Blank lines are skipped; any malformed line throws std::invalid_argument naming the line number.
std::vector<DetectionRecord> read_detection_dump(const std::filesystem::path& path);

enum class Interpolation { AllPoints, ElevenPoint };

struct PrPoint {
    double recall = 0.0;
    double precision = 0.0;
};

struct ApResult {
    double ap = 0.0;
    std::size_t gt_count = 0;
    std::vector<PrPoint> curve;  // one point per counted detection, in score order
};

/// Average precision of one class. Detections are matched greedily in score
/// order (ties keep input order) to the highest-IoU unmatched, non-ignored gt
/// of the same image with IoU >= threshold; detections that only hit ignored
/// gts are dropped. Returns nullopt when there is no non-ignored gt.
std::optional<ApResult> average_precision_curve(std::span<const DetectionRecord> detections,
                                                std::span<const Annotation> gts, double iou_threshold,
                                                Interpolation interpolation = Interpolation::AllPoints);

std::optional<double> average_precision(std::span<const DetectionRecord> detections, std::span<const Annotation> gts,
                                        double iou_threshold, Interpolation interpolation = Interpolation::AllPoints);

/// 0.50, 0.55, ..., 0.95
std::vector<double> coco_iou_thresholds();

struct EvalReport {
    std::vector<double> thresholds;
    /// Per class: AP at each threshold (same order as `thresholds`).
    std::map<int, std::vector<double>> ap;
    std::map<int, double> ap50;
    std::map<int, std::vector<PrPoint>> pr_curves;  // at IoU 0.5
    double map = 0.0;
    double map50 = 0.0;
    std::optional<double> fps;

    std::string to_json() const;
    std::string to_table() const;
};

/// Mean over classes present in the (non-ignored) ground truth and over the
/// thresholds. Throws std::invalid_argument when the ground truth is empty.
EvalReport mean_average_precision(std::span<const DetectionRecord> detections, std::span<const Annotation> gts,
                                  const std::vector<double>& iou_thresholds = coco_iou_thresholds(),
                                  Interpolation interpolation = Interpolation::AllPoints);

}  // namespace dfpn
