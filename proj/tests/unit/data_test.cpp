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

#include "dfpn/data.hpp"
#include "dfpn/image_io.hpp"

namespace dfpn {
namespace {

const std::filesystem::path kFixture = std::filesystem::path(DFPN_TEST_DATA_DIR) / "visdrone";

std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

Box mask_bounds(const std::vector<bool>& mask, std::size_t h, std::size_t w) {
    std::size_t x1 = w, y1 = h, x2 = 0, y2 = 0;
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            if (mask[y * w + x]) {
                x1 = std::min(x1, x);
                y1 = std::min(y1, y);
                x2 = std::max(x2, x + 1);
                y2 = std::max(y2, y + 1);
            }
    return {double(x1), double(y1), double(x2), double(y2)};
}

bool same_values(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() && std::equal(a.values().begin(), a.values().end(), b.values().begin());
}

TEST(Data, SyntheticIsDeterministicPerIndex) {
    SyntheticConfig cfg;
    const auto a = generate_synthetic(cfg, 6), b = generate_synthetic(cfg, 6);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_TRUE(same_values(a[i].image, b[i].image));
        EXPECT_EQ(a[i].annotations, b[i].annotations);
    }
    const auto tail = generate_synthetic(cfg, 2, 4);
    EXPECT_TRUE(same_values(tail[0].image, a[4].image));
    EXPECT_EQ(tail[1].annotations, a[5].annotations);
    cfg.seed = 8;
    EXPECT_FALSE(same_values(generate_synthetic(cfg, 1)[0].image, a[0].image));
}

TEST(Data, SyntheticImagesAreQuantisedAndInRange) {
    const auto samples = generate_synthetic(SyntheticConfig{}, 3);
    for (const auto& s : samples) {
        EXPECT_EQ(s.image.shape(), (Shape{1, 3, 64, 64}));
        for (double v : s.image.values()) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
            EXPECT_EQ(v, std::round(v * 255.0) / 255.0);
        }
    }
}

TEST(Data, SyntheticBoxesMatchRenderedShapes) {
    SyntheticConfig cfg;
    cfg.max_objects = 3;
    cfg.min_object_size = 6;
    cfg.max_object_size = 20;
    for (const auto& s : generate_synthetic(cfg, 40)) {
        ASSERT_FALSE(s.annotations.empty());
        for (const auto& a : s.annotations) {
            const auto mask = render_shape_mask(static_cast<ShapeKind>(a.class_id), a.box, 64, 64);
            EXPECT_EQ(iou(mask_bounds(mask, 64, 64), a.box), 1.0);
            EXPECT_GE(a.box.x1, 0.0);
            EXPECT_LE(a.box.x2, 64.0);
        }
        for (std::size_t i = 0; i < s.annotations.size(); ++i)
            for (std::size_t j = i + 1; j < s.annotations.size(); ++j)
                EXPECT_EQ(iou(s.annotations[i].box, s.annotations[j].box), 0.0);
    }
}

TEST(Data, DiscBoxIsCentrePlusMinusRadius) {
    const Box box{20, 10, 36, 26};  // centre (28, 18), radius 8
    const auto mask = render_shape_mask(ShapeKind::Disc, box, 64, 64);
    EXPECT_EQ(mask_bounds(mask, 64, 64), box);
    EXPECT_TRUE(mask[18 * 64 + 28]);
    EXPECT_FALSE(mask[10 * 64 + 20]);  // corner lies outside the disc
}

TEST(Data, CrowdedConfigPlacesFewerObjects) {
    SyntheticConfig cfg;
    cfg.min_objects = cfg.max_objects = 5;
    cfg.min_object_size = cfg.max_object_size = 60;
    for (const auto& s : generate_synthetic(cfg, 3)) EXPECT_EQ(s.annotations.size(), 1u);
}

TEST(Data, ImpossibleConfigsAreRejected) {
    SyntheticConfig cfg;
    cfg.max_object_size = 80;
    EXPECT_THROW(generate_synthetic(cfg, 1), std::invalid_argument);
    cfg = {};
    cfg.min_object_size = 3;
    EXPECT_THROW(generate_synthetic(cfg, 1), std::invalid_argument);
    cfg = {};
    cfg.classes.clear();
    EXPECT_THROW(generate_synthetic(cfg, 1), std::invalid_argument);
    EXPECT_THROW(generate_synthetic(SyntheticConfig{}, 0), std::invalid_argument);
}

TEST(Data, NumClassesCoversLargestShapeId) {
    SyntheticConfig cfg;
    cfg.classes = {ShapeKind::Disc, ShapeKind::Square};
    EXPECT_EQ(cfg.num_classes(), 3);
    EXPECT_EQ(parse_shape_kind("triangle"), ShapeKind::Triangle);
    EXPECT_THROW(parse_shape_kind("hexagon"), std::invalid_argument);
}

TEST(Data, VisDroneLineParsing) {
    const auto a = parse_visdrone_line("100,200,50,40,1,4,0,0", "img");
    ASSERT_TRUE(a.has_value());
    EXPECT_EQ(a->box, (Box{100, 200, 150, 240}));
    EXPECT_EQ(a->class_id, 4);
    EXPECT_FALSE(a->ignore);
    EXPECT_TRUE(parse_visdrone_line("1,2,3,4,0,0,0,0", "img")->ignore);
    EXPECT_FALSE(parse_visdrone_line("1,2,0,4,1,3,0,0", "img").has_value());
    EXPECT_FALSE(parse_visdrone_line("x,2,3,4,1,3,0,0", "img").has_value());
    EXPECT_FALSE(parse_visdrone_line("1,2,3", "img").has_value());
    EXPECT_TRUE(parse_visdrone_line("1, 2, 3, 4, 1, 3, 0, 0\r", "img").has_value());
}

TEST(Data, VisDroneFiles) {
    const auto dir = fresh_dir("dfpn_visdrone_files");
    std::ofstream(dir / "empty.txt").close();
    EXPECT_TRUE(read_visdrone_annotations(dir / "empty.txt", "empty").empty());
    EXPECT_TRUE(read_visdrone_annotations(dir / "missing.txt", "missing").empty());
    const std::vector<Annotation> written{{"x", {1, 2, 11, 22}, 5, false}, {"x", {3, 3, 8, 9}, 0, true}};
    write_visdrone_annotations(dir / "x.txt", written);
    EXPECT_EQ(read_visdrone_annotations(dir / "x.txt", "x"), written);
    std::filesystem::remove_all(dir);
}

TEST(Data, LoadsBundledFixture) {
    const auto samples = load_visdrone_annotations(kFixture / "images", kFixture / "annotations");
    ASSERT_EQ(samples.size(), 5u);
    const std::vector<std::size_t> counts{3, 2, 1, 0, 3};
    for (std::size_t i = 0; i < samples.size(); ++i) {
        EXPECT_EQ(samples[i].annotations.size(), counts[i]) << samples[i].image_id;
        for (const auto& a : samples[i].annotations) {
            EXPECT_GE(a.box.x1, 0.0);
            EXPECT_LE(a.box.x2, double(samples[i].width()));
            EXPECT_LE(a.box.y2, double(samples[i].height()));
        }
    }
    EXPECT_EQ(samples[0].image_id, "0000001_00000_d_0000001");
    EXPECT_EQ(samples[0].image.shape(), (Shape{1, 3, 64, 96}));
    EXPECT_TRUE(samples[0].annotations[2].ignore);
    EXPECT_EQ(samples[1].annotations[1].box, (Box{60, 60, 80, 80}));  // clipped
    EXPECT_THROW(load_visdrone_annotations(kFixture / "nope", kFixture / "annotations"), std::invalid_argument);
}

TEST(Data, WrittenDatasetLoadsBackExactly) {
    const auto dir = fresh_dir("dfpn_dataset_roundtrip");
    const auto samples = generate_synthetic(SyntheticConfig{}, 3);
    write_dataset(dir, samples);
    const auto back = load_visdrone_annotations(dir / "images", dir / "annotations");
    ASSERT_EQ(back.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(back[i].image_id, samples[i].image_id);
        EXPECT_TRUE(same_values(back[i].image, samples[i].image));
        EXPECT_EQ(back[i].annotations, samples[i].annotations);
    }
    std::filesystem::remove_all(dir);
}

TEST(Data, HorizontalFlip) {
    Sample s = generate_synthetic(SyntheticConfig{}, 1)[0];
    s.annotations = {{s.image_id, {0, 0, 10, 10}, 1, false}, {s.image_id, {22, 5, 42, 9}, 2, false}};
    const auto f = horizontal_flip(s);
    EXPECT_EQ(f.annotations[0].box, (Box{54, 0, 64, 10}));
    EXPECT_EQ(f.annotations[1].box, (Box{22, 5, 42, 9}));
    EXPECT_EQ(f.image.at({0, 1, 7, 0}), s.image.at({0, 1, 7, 63}));
    const auto ff = horizontal_flip(f);
    EXPECT_TRUE(same_values(ff.image, s.image));
    EXPECT_EQ(ff.annotations, s.annotations);
    for (const auto& a : f.annotations) {
        EXPECT_TRUE(a.box.valid());
        EXPECT_GE(a.box.x1, 0.0);
        EXPECT_LE(a.box.x2, 64.0);
    }
}

TEST(Data, ImageIoRoundTrip) {
    const auto dir = fresh_dir("dfpn_image_io");
    const auto s = generate_synthetic(SyntheticConfig{}, 1)[0];
    write_png(dir / "a.png", s.image);
    EXPECT_TRUE(same_values(read_image(dir / "a.png"), s.image));
    write_annotated_png(dir / "b.png", s.image, {});
    EXPECT_TRUE(std::filesystem::exists(dir / "b.png"));
    EXPECT_THROW(read_image(dir / "missing.png"), std::runtime_error);
    std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace dfpn
