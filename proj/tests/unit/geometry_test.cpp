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
#include <random>

#include "dfpn/geometry.hpp"

namespace dfpn {
namespace {

Box random_box(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> pos(-200.0, 200.0), size(0.5, 150.0);
    const double x = pos(rng), y = pos(rng);
    return {x, y, x + size(rng), y + size(rng)};
}

TEST(Geometry, IouExamples) {
    const Box a{0, 0, 10, 10};
    EXPECT_EQ(iou(a, a), 1.0);
    EXPECT_EQ(iou(a, {20, 20, 30, 30}), 0.0);
    EXPECT_EQ(iou(a, {10, 0, 20, 10}), 0.0);  // touching edges
    EXPECT_DOUBLE_EQ(iou(a, {5, 0, 15, 10}), 50.0 / 150.0);
}

TEST(Geometry, DegenerateBoxesHaveZeroIou) {
    const Box line{0, 0, 0, 10};
    EXPECT_EQ(iou(line, line), 0.0);
    EXPECT_EQ(iou(line, {0, 0, 10, 10}), 0.0);
    EXPECT_TRUE(line.degenerate());
    EXPECT_TRUE(line.valid());
}

TEST(Geometry, EncodeExamples) {
    const Box anchor = Box::from_center(10, 10, 10, 10);
    EXPECT_EQ(encode(anchor, anchor), (BoxDelta{0, 0, 0, 0}));
    const Box gt = Box::from_center(15, 10, 20, 10);
    const auto d = encode(gt, anchor);
    EXPECT_NEAR(d.tx, 0.5, 1e-12);
    EXPECT_NEAR(d.ty, 0.0, 1e-12);
    EXPECT_NEAR(d.tw, 0.693147, 1e-6);
    EXPECT_NEAR(d.th, 0.0, 1e-12);
}

TEST(Geometry, DecodeExamples) {
    const Box anchor = Box::from_center(10, 10, 10, 10);
    EXPECT_EQ(decode({0, 0, 0, 0}, anchor), anchor);
    const Box b = decode({0.5, 0, std::log(2.0), 0}, anchor);
    const Box gt = Box::from_center(15, 10, 20, 10);
    EXPECT_NEAR(b.x1, gt.x1, 1e-12);
    EXPECT_NEAR(b.y1, gt.y1, 1e-12);
    EXPECT_NEAR(b.x2, gt.x2, 1e-12);
    EXPECT_NEAR(b.y2, gt.y2, 1e-12);
}

TEST(Geometry, DecodeClampsLargeLogScales) {
    const Box anchor{0, 0, 1, 1};
    const Box b = decode({0, 0, 1000.0, 60.0}, anchor);
    EXPECT_TRUE(std::isfinite(b.x1) && std::isfinite(b.x2) && std::isfinite(b.y1) && std::isfinite(b.y2));
    EXPECT_DOUBLE_EQ(b.width(), std::exp(kMaxLogScale));
    EXPECT_DOUBLE_EQ(b.height(), std::exp(kMaxLogScale));
}

TEST(Geometry, EncodeRejectsNonPositiveSizes) {
    EXPECT_THROW(encode({0, 0, 0, 5}, {0, 0, 4, 4}), std::invalid_argument);
    EXPECT_THROW(encode({0, 0, 4, 4}, {1, 1, 1, 3}), std::invalid_argument);
}

TEST(Geometry, RoundTripFuzz) {
    std::mt19937_64 rng(101);
    double worst = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const Box g = random_box(rng), a = random_box(rng);
        const Box r = decode(encode(g, a), a);
        worst = std::max({worst, std::abs(r.x1 - g.x1), std::abs(r.y1 - g.y1), std::abs(r.x2 - g.x2),
                          std::abs(r.y2 - g.y2)});
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(Geometry, IouPropertiesFuzz) {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> shift(-50, 50);
    for (int i = 0; i < 20000; ++i) {
        const Box a = random_box(rng), b = random_box(rng);
        const double v = iou(a, b);
        EXPECT_EQ(v, iou(b, a));
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
        EXPECT_EQ(iou(a, a), 1.0);
    }
    // Integer-grid boxes shifted by an integer vector keep their IoU exactly.
    std::uniform_int_distribution<int> coord(0, 100), side(1, 40);
    for (int i = 0; i < 20000; ++i) {
        const int ax = coord(rng), ay = coord(rng), bx = coord(rng), by = coord(rng);
        const Box a{double(ax), double(ay), double(ax + side(rng)), double(ay + side(rng))};
        const Box b{double(bx), double(by), double(bx + side(rng)), double(by + side(rng))};
        const double dx = shift(rng), dy = shift(rng);
        const Box as{a.x1 + dx, a.y1 + dy, a.x2 + dx, a.y2 + dy};
        const Box bs{b.x1 + dx, b.y1 + dy, b.x2 + dx, b.y2 + dy};
        EXPECT_EQ(iou(a, b), iou(as, bs));
    }
}

TEST(Geometry, ClipToImage) {
    const Box c = clip({-5, 3, 70, 80}, 64, 48);
    EXPECT_EQ(c, (Box{0, 3, 64, 48}));
    EXPECT_EQ(clip({1, 2, 3, 4}, 64, 64), (Box{1, 2, 3, 4}));
}

}  // namespace
}  // namespace dfpn
