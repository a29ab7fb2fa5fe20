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

#include "dfpn/eval.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace dfpn {

std::optional<ApResult> average_precision_curve(std::span<const DetectionRecord> detections,
                                                std::span<const Annotation> gts, double iou_threshold,
                                                Interpolation interpolation) {
    std::unordered_map<std::string, std::vector<std::size_t>> gts_by_image;
    std::size_t positives = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        gts_by_image[gts[g].image_id].push_back(g);
        if (!gts[g].ignore) ++positives;
    }
    if (positives == 0) return std::nullopt;

    std::vector<std::size_t> order(detections.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return detections[a].score > detections[b].score; });

    std::vector<bool> matched(gts.size(), false);
    ApResult result;
    result.gt_count = positives;
    std::vector<bool> is_tp;
    std::size_t tp = 0, fp = 0;
    for (std::size_t d : order) {
        const auto& det = detections[d];
        double best = -1.0;
        std::size_t best_gt = 0;
        bool hits_ignored = false;
        if (auto it = gts_by_image.find(det.image_id); it != gts_by_image.end()) {
            for (std::size_t g : it->second) {
                const double v = iou(det.box, gts[g].box);
                if (gts[g].ignore) {
                    hits_ignored = hits_ignored || v >= iou_threshold;
                } else if (!matched[g] && v > best) {
                    best = v;
                    best_gt = g;
                }
            }
        }
        if (best >= iou_threshold) {
            matched[best_gt] = true;
            ++tp;
            is_tp.push_back(true);
        } else if (hits_ignored) {
            continue;
        } else {
            ++fp;
            is_tp.push_back(false);
        }
        result.curve.push_back({static_cast<double>(tp) / static_cast<double>(positives),
                                static_cast<double>(tp) / static_cast<double>(tp + fp)});
    }

    // Precision envelope: running max from the right.
    std::vector<double> envelope(result.curve.size());
    double running = 0.0;
    for (std::size_t i = result.curve.size(); i-- > 0;) {
        running = std::max(running, result.curve[i].precision);
        envelope[i] = running;
    }

    if (interpolation == Interpolation::AllPoints) {
        double sum = 0.0;
        for (std::size_t i = 0; i < envelope.size(); ++i)
            if (is_tp[i]) sum += envelope[i];
        result.ap = sum / static_cast<double>(positives);
    } else {
        double sum = 0.0;
        for (int r = 0; r <= 10; ++r) {
            const double level = r / 10.0;
            double best = 0.0;
            for (std::size_t i = 0; i < result.curve.size(); ++i)
                if (result.curve[i].recall >= level) best = std::max(best, result.curve[i].precision);
            sum += best;
        }
        result.ap = sum / 11.0;
    }
    return result;
}

std::optional<double> average_precision(std::span<const DetectionRecord> detections, std::span<const Annotation> gts,
                                        double iou_threshold, Interpolation interpolation) {
    auto r = average_precision_curve(detections, gts, iou_threshold, interpolation);
    if (!r) return std::nullopt;
    return r->ap;
}

std::vector<double> coco_iou_thresholds() {
    std::vector<double> t;
    for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
    return t;
}

EvalReport mean_average_precision(std::span<const DetectionRecord> detections, std::span<const Annotation> gts,
                                  const std::vector<double>& iou_thresholds, Interpolation interpolation) {
    if (gts.empty()) throw std::invalid_argument("mean_average_precision: ground truth is empty");
    if (iou_thresholds.empty()) throw std::invalid_argument("mean_average_precision: no IoU thresholds");

    std::set<int> classes;
    for (const auto& g : gts)
        if (!g.ignore) classes.insert(g.class_id);
    if (classes.empty()) throw std::invalid_argument("mean_average_precision: every ground-truth box is ignored");

    EvalReport report;
    report.thresholds = iou_thresholds;
    double total = 0.0, total50 = 0.0;
    std::size_t count = 0;
    for (int cls : classes) {
        std::vector<DetectionRecord> dets;
        for (const auto& d : detections)
            if (d.class_id == cls) dets.push_back(d);
        // Ignored regions carry their own class id; they apply to every class.
        std::vector<Annotation> cls_gts;
        for (const auto& g : gts)
            if (g.class_id == cls || g.ignore) cls_gts.push_back(g);

        auto& row = report.ap[cls];
        for (double t : iou_thresholds) {
            const double ap = average_precision_curve(dets, cls_gts, t, interpolation)->ap;
            row.push_back(ap);
            total += ap;
            ++count;
        }
        const auto at50 = average_precision_curve(dets, cls_gts, 0.5, interpolation);
        report.ap50[cls] = at50->ap;
        report.pr_curves[cls] = at50->curve;
        total50 += at50->ap;
    }
    report.map = total / static_cast<double>(count);
    report.map50 = total50 / static_cast<double>(classes.size());
    return report;
}

std::string to_json_line(const DetectionRecord& record) {
    nlohmann::json j;
    j["image_id"] = record.image_id;
    j["class_id"] = record.class_id;
    j["score"] = record.score;
    j["box"] = {record.box.x1, record.box.y1, record.box.x2, record.box.y2};
    return j.dump();
}

DetectionRecord parse_detection_line(const std::string& line) {
    try {
        const auto j = nlohmann::json::parse(line);
        const auto& box = j.at("box");
        if (!box.is_array() || box.size() != 4) throw std::invalid_argument("box must have 4 numbers");
        DetectionRecord r;
        r.image_id = j.at("image_id").get<std::string>();
        r.class_id = j.at("class_id").get<int>();
        r.score = j.at("score").get<double>();
        r.box = {box[0].get<double>(), box[1].get<double>(), box[2].get<double>(), box[3].get<double>()};
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("bad detection record: ") + e.what());
    }
}

void write_detection_dump(const std::filesystem::path& path, std::span<const DetectionRecord> records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& r : records) out << to_json_line(r) << '\n';
}

std::vector<DetectionRecord> read_detection_dump(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot read detection dump " + path.string());
    std::vector<DetectionRecord> records;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            records.push_back(parse_detection_line(line));
        } catch (const std::invalid_argument& e) {
            throw std::invalid_argument(path.string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
    return records;
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    j["thresholds"] = thresholds;
    j["mAP"] = map;
    j["mAP50"] = map50;
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& [cls, aps] : ap) {
        nlohmann::json c;
        c["class_id"] = cls;
        c["ap"] = aps;
        c["ap50"] = ap50.at(cls);
        nlohmann::json curve = nlohmann::json::array();
        for (const auto& p : pr_curves.at(cls)) curve.push_back({p.recall, p.precision});
        c["pr_curve_iou50"] = curve;
        classes.push_back(c);
    }
    j["classes"] = classes;
    if (fps) j["fps"] = *fps;
    return j.dump(2);
}

std::string EvalReport::to_table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    os << "class      AP@[.50:.95]   AP@.50\n";
    for (const auto& [cls, aps] : ap) {
        const double mean = std::accumulate(aps.begin(), aps.end(), 0.0) / static_cast<double>(aps.size());
        os << std::left << std::setw(10) << cls << ' ' << std::setw(14) << mean << ' ' << ap50.at(cls) << '\n';
    }
    os << "mAP        " << std::setw(14) << map << ' ' << map50 << '\n';
    if (fps) os << "fps        " << *fps << '\n';
    return os.str();
}

}  // namespace dfpn
