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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "dfpn/eval.hpp"
#include "oracles.hpp"

namespace dfpn {
namespace {

Annotation gt(const std::string& image, Box box, int cls = 1, bool ignore = false) { return {image, box, cls, ignore}; }
DetectionRecord det(const std::string& image, Box box, double score, int cls = 1) { return {image, cls, score, box}; }

struct Instance {
    std::vector<DetectionRecord> dets;
    std::vector<Annotation> gts;
};

Instance random_instance(std::mt19937_64& rng) {
    std::uniform_int_distribution<int> n_gt(0, 10), n_det(0, 20), image(0, 2), score(1, 10), coin(0, 9);
    Instance inst;
    const int g = n_gt(rng);
    for (int i = 0; i < g; ++i) {
        inst.gts.push_back(gt("img" + std::to_string(image(rng)), oracle::random_grid_box(rng, 30, 4, 16), 1,
                              coin(rng) == 0));
    }
    const int d = n_det(rng);
    for (int i = 0; i < d; ++i) {
        // Half of the detections are perturbed copies of gts so matches are common.
        Box b = oracle::random_grid_box(rng, 30, 4, 16);
        std::string img = "img" + std::to_string(image(rng));
        if (!inst.gts.empty() && coin(rng) < 5) {
            const auto& src = inst.gts[std::size_t(rng() % inst.gts.size())];
            std::uniform_int_distribution<int> jitter(-2, 2);
            b = {src.box.x1 + jitter(rng), src.box.y1 + jitter(rng), src.box.x2 + jitter(rng), src.box.y2 + jitter(rng)};
            if (b.x2 <= b.x1) b.x2 = b.x1 + 1;
            if (b.y2 <= b.y1) b.y2 = b.y1 + 1;
            img = src.image_id;
        }
        inst.dets.push_back(det(img, b, score(rng) / 10.0));
    }
    return inst;
}

TEST(Eval, PerfectAndEmpty) {
    const std::vector<Annotation> gts{gt("a", {0, 0, 10, 10}), gt("b", {5, 5, 20, 20})};
    const std::vector<DetectionRecord> perfect{det("a", {0, 0, 10, 10}, 0.9), det("b", {5, 5, 20, 20}, 0.8)};
    EXPECT_EQ(*average_precision(perfect, gts, 0.5), 1.0);
    EXPECT_EQ(*average_precision({}, gts, 0.5), 0.0);
    EXPECT_FALSE(average_precision(perfect, {}, 0.5).has_value());
}

TEST(Eval, HandPrCurves) {
    const std::vector<Annotation> gts{gt("a", {0, 0, 10, 10})};
    const auto tp = det("a", {0, 0, 10, 10}, 0.9);
    auto fp = det("a", {50, 50, 60, 60}, 0.5);
    const auto first = average_precision_curve(std::vector{tp, fp}, gts, 0.5);
    ASSERT_EQ(first->curve.size(), 2u);
    EXPECT_EQ(first->curve[1].precision, 0.5);
    EXPECT_EQ(first->ap, 1.0);
    fp.score = 0.95;
    EXPECT_EQ(*average_precision(std::vector{tp, fp}, gts, 0.5), 0.5);
}

TEST(Eval, IgnoredRegionsAreNeutral) {
    const std::vector<Annotation> gts{gt("a", {0, 0, 10, 10}), gt("a", {30, 30, 50, 50}, 0, true)};
    const std::vector<DetectionRecord> dets{det("a", {30, 30, 50, 50}, 0.99), det("a", {0, 0, 10, 10}, 0.5)};
    const auto r = average_precision_curve(dets, gts, 0.5);
    EXPECT_EQ(r->curve.size(), 1u);
    EXPECT_EQ(r->gt_count, 1u);
    EXPECT_EQ(r->ap, 1.0);
    // Ignored regions apply across classes in the mean.
    EXPECT_EQ(mean_average_precision(dets, gts).map50, 1.0);
}

TEST(Eval, GreedyMatchPrefersHighestIou) {
    const std::vector<Annotation> gts{gt("a", {0, 0, 10, 10}), gt("a", {2, 0, 12, 10})};
    // First detection overlaps gt1 better; the second can then only take gt0.
    const std::vector<DetectionRecord> dets{det("a", {2, 0, 12, 10}, 0.9), det("a", {0, 0, 10, 10}, 0.8)};
    EXPECT_EQ(*average_precision(dets, gts, 0.5), 1.0);
}

TEST(Eval, JitteredBoxesGiveHalfMap) {
    const std::vector<Annotation> gts{gt("a", {0, 0, 100, 100}), gt("b", {10, 10, 60, 60}, 2)};
    const std::vector<DetectionRecord> dets{det("a", {0, 0, 100, 72}, 0.9), det("b", {10, 10, 60, 46}, 0.7, 2)};
    const auto report = mean_average_precision(dets, gts);
    EXPECT_EQ(report.thresholds.size(), 10u);
    EXPECT_NEAR(report.map, 0.5, 1e-15);
    EXPECT_EQ(report.map50, 1.0);
    EXPECT_EQ(report.ap.at(1), (std::vector<double>{1, 1, 1, 1, 1, 0, 0, 0, 0, 0}));
}

TEST(Eval, CocoThresholds) {
    const auto t = coco_iou_thresholds();
    ASSERT_EQ(t.size(), 10u);
    EXPECT_DOUBLE_EQ(t.front(), 0.5);
    EXPECT_DOUBLE_EQ(t.back(), 0.95);
}

TEST(Eval, SingleClassSingleThresholdEqualsAp) {
    std::mt19937_64 rng(90);
    for (int trial = 0; trial < 50; ++trial) {
        auto inst = random_instance(rng);
        inst.gts.push_back(gt("img0", {1, 1, 9, 9}));
        const auto report = mean_average_precision(inst.dets, inst.gts, {0.5});
        EXPECT_EQ(report.map, *average_precision(inst.dets, inst.gts, 0.5));
    }
}

TEST(Eval, MatchesCutoffEnumeration) {
    std::mt19937_64 rng(91);
    for (int trial = 0; trial < 300; ++trial) {
        const auto inst = random_instance(rng);
        const auto got = average_precision(inst.dets, inst.gts, 0.5);
        const auto want = oracle::average_precision(inst.dets, inst.gts, 1, 2);
        ASSERT_EQ(got.has_value(), want.has_value());
        if (got) {
            ASSERT_EQ(*got, *want) << "trial " << trial;
        }
        const auto got75 = average_precision(inst.dets, inst.gts, 0.75);
        const auto want75 = oracle::average_precision(inst.dets, inst.gts, 3, 4);
        if (got75) {
            ASSERT_EQ(*got75, *want75) << "trial " << trial;
        }
    }
}

TEST(Eval, RankOnlyProperties) {
    std::mt19937_64 rng(92);
    for (int trial = 0; trial < 100; ++trial) {
        auto inst = random_instance(rng);
        const auto base = average_precision(inst.dets, inst.gts, 0.5);
        if (!base) continue;
        auto transformed = inst.dets;
        for (auto& d : transformed) d.score = std::exp(3.0 * d.score) - 7.0;
        EXPECT_EQ(*average_precision(transformed, inst.gts, 0.5), *base);
        auto with_fp = inst.dets;
        with_fp.push_back(det("img0", {0, 0, 1, 1}, 0.0));
        EXPECT_LE(*average_precision(with_fp, inst.gts, 0.5), *base);
        EXPECT_GE(*base, 0.0);
        EXPECT_LE(*base, 1.0);
    }
}

TEST(Eval, ElevenPointInterpolation) {
    const std::vector<Annotation> gts{gt("a", {0, 0, 10, 10}), gt("a", {20, 20, 30, 30})};
    const std::vector<DetectionRecord> dets{det("a", {0, 0, 10, 10}, 0.9), det("a", {50, 50, 60, 60}, 0.8),
                                            det("a", {20, 20, 30, 30}, 0.7)};
    // Recall 0.5 at precision 1, recall 1 at precision 2/3.
    EXPECT_NEAR(*average_precision(dets, gts, 0.5, Interpolation::ElevenPoint), (6 * 1.0 + 5 * (2.0 / 3.0)) / 11.0,
                1e-15);
    EXPECT_NEAR(*average_precision(dets, gts, 0.5), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
}

TEST(Eval, ReportFormatsAndErrors) {
    const std::vector<Annotation> gts{gt("a", {0, 0, 10, 10})};
    auto report = mean_average_precision(std::vector{det("a", {0, 0, 10, 10}, 1.0)}, gts);
    report.fps = 12.5;
    const auto j = nlohmann::json::parse(report.to_json());
    EXPECT_EQ(j["mAP"].get<double>(), 1.0);
    EXPECT_EQ(j["fps"].get<double>(), 12.5);
    EXPECT_EQ(j["classes"][0]["class_id"].get<int>(), 1);
    EXPECT_NE(report.to_table().find("mAP"), std::string::npos);
    EXPECT_THROW(mean_average_precision({}, {}), std::invalid_argument);
    EXPECT_THROW(mean_average_precision({}, std::vector{gt("a", {0, 0, 5, 5}, 0, true)}), std::invalid_argument);
}

TEST(Eval, DetectionDumpRoundTrip) {
    const std::vector<DetectionRecord> records{det("a b", {0.5, 1, 10.25, 12}, 0.125, 2), det("c", {1, 2, 3, 4}, 1.0 / 3.0)};
    const auto path = std::filesystem::temp_directory_path() / "dfpn_dump.jsonl";
    write_detection_dump(path, records);
    EXPECT_EQ(read_detection_dump(path), records);
    {
        std::ofstream out(path, std::ios::app);
        out << "\n{\"image_id\": \"x\", \"score\": 1}\n";
    }
    try {
        read_detection_dump(path);
        FAIL() << "expected a parse error";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find(":4:"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_detection_line(R"({"image_id": "x", "class_id": 1, "score": 1, "box": [1, 2, 3]})"),
                 std::invalid_argument);
    std::filesystem::remove(path);
}

}  // namespace
}  // namespace dfpn
