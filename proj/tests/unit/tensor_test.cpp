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

#include "dfpn/tensor.hpp"

namespace dfpn {
namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(shape_numel(shape));
    for (double& x : v) x = u(rng);
    return Tensor::from_values(std::move(shape), std::move(v));
}

// Away from zero so finite differences never straddle a relu kink.
Tensor random_away_from_zero(Shape shape, std::uint64_t seed) {
    Tensor t = random_tensor(std::move(shape), seed);
    for (double& x : t.mutable_values()) x = x < 0.0 ? x - 1e-3 : x + 1e-3;
    return t;
}

// Direct seven-loop convolution.
std::vector<double> naive_conv(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad) {
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t oc = w.dim(0), k = w.dim(2);
    const std::size_t oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
    std::vector<double> out(n * oc * oh * ow, 0.0);
    for (std::size_t in = 0; in < n; ++in)
        for (std::size_t o = 0; o < oc; ++o)
            for (std::size_t i = 0; i < oh; ++i)
                for (std::size_t j = 0; j < ow; ++j) {
                    double acc = b.values()[o];
                    for (std::size_t ci = 0; ci < c; ++ci)
                        for (std::size_t ki = 0; ki < k; ++ki)
                            for (std::size_t kj = 0; kj < k; ++kj) {
                                const long y = long(i * stride + ki) - pad, xx = long(j * stride + kj) - pad;
                                if (y < 0 || xx < 0 || y >= long(h) || xx >= long(wd)) continue;
                                acc += x.at({in, ci, std::size_t(y), std::size_t(xx)}) * w.at({o, ci, ki, kj});
                            }
                    out[((in * oc + o) * oh + i) * ow + j] = acc;
                }
    return out;
}

TEST(Tensor, ConvOfOnesSumsTheWindow) {
    ConvParams p{Tensor::full({1, 1, 3, 3}, 1.0), Tensor::zeros({1}), 1, 0};
    Tensor y = conv2d(Tensor::full({1, 1, 3, 3}, 1.0), p);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
    EXPECT_EQ(y.item(), 9.0);
}

TEST(Tensor, ConvOutputSizeFormula) {
    ConvParams p{Tensor::full({1, 1, 3, 3}, 1.0), Tensor::zeros({1}), 2, 1};
    EXPECT_EQ(conv2d(Tensor::zeros({1, 1, 4, 4}), p).shape(), (Shape{1, 1, 2, 2}));
    for (std::size_t h = 1; h <= 12; ++h)
        for (std::size_t k = 1; k <= 5; ++k)
            for (int s = 1; s <= 3; ++s)
                for (int pad = 0; pad <= 2; ++pad) {
                    if (h + 2 * pad < k) continue;
                    ConvParams q{Tensor::zeros({2, 1, k, k}), Tensor::zeros({2}), s, pad};
                    const auto y = conv2d(Tensor::zeros({1, 1, h, h + 1}), q);
                    EXPECT_EQ(y.dim(2), (h + 2 * pad - k) / s + 1);
                    EXPECT_EQ(y.dim(3), (h + 1 + 2 * pad - k) / s + 1);
                    EXPECT_EQ(y.dim(2), conv_output_size(h, k, s, pad));
                }
}

TEST(Tensor, ConvMatchesDirectLoops) {
    for (int s = 1; s <= 2; ++s)
        for (int pad = 0; pad <= 1; ++pad) {
            Tensor x = random_tensor({2, 3, 7, 6}, 1 + s + pad);
            ConvParams p{random_tensor({4, 3, 3, 3}, 11), random_tensor({4}, 12), s, pad};
            const auto y = conv2d(x, p);
            const auto ref = naive_conv(x, p.weight, p.bias, s, pad);
            ASSERT_EQ(y.numel(), ref.size());
            for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.values()[i], ref[i], 1e-12);
        }
}

TEST(Tensor, ConvRejectsChannelMismatch) {
    ConvParams p{Tensor::zeros({1, 2, 3, 3}), Tensor::zeros({1}), 1, 1};
    EXPECT_THROW(conv2d(Tensor::zeros({1, 3, 5, 5}), p), ShapeError);
    ConvParams big{Tensor::zeros({1, 1, 5, 5}), Tensor::zeros({1}), 1, 0};
    EXPECT_THROW(conv2d(Tensor::zeros({1, 1, 3, 3}), big), ShapeError);
}

TEST(Tensor, ConvWeightGradientMatchesFiniteDifferences) {
    Tensor x = random_tensor({2, 3, 8, 8}, 3);
    Tensor bias = random_tensor({4}, 5);
    auto f = [&](const Tensor& w) { return sum(mul(conv2d(x, {w, bias, 1, 1}), conv2d(x, {w, bias, 1, 1}))); };
    const auto r = gradcheck(f, random_tensor({4, 3, 3, 3}, 4));
    EXPECT_EQ(r.checked, 108u);
    EXPECT_LT(r.max_relative_error, 1e-6);
}

TEST(Tensor, ConvInputAndBiasGradients) {
    Tensor w = random_tensor({3, 2, 3, 3}, 6);
    Tensor b = random_tensor({3}, 7);
    auto fx = [&](const Tensor& x) { return sum(relu(conv2d(x, {w, b, 2, 1}))); };
    EXPECT_LT(gradcheck(fx, random_tensor({1, 2, 7, 7}, 8)).max_relative_error, 1e-5);
    Tensor x = random_tensor({1, 2, 6, 6}, 9);
    auto fb = [&](const Tensor& bias) { return sum(mul(conv2d(x, {w, bias, 1, 0}), conv2d(x, {w, bias, 1, 0}))); };
    EXPECT_LT(gradcheck(fb, b).max_relative_error, 1e-5);
}

TEST(Tensor, DepthwiseConvGradients) {
    Tensor x = random_tensor({1, 3, 7, 7}, 10);
    Tensor w = random_tensor({3, 1, 3, 3}, 11);
    Tensor b = random_tensor({3}, 12);
    auto fw = [&](const Tensor& wt) {
        const Tensor y = depthwise_conv2d(x, {wt, b, 2, 1});
        return sum(mul(y, y));
    };
    EXPECT_LT(gradcheck(fw, w).max_relative_error, 1e-5);
    auto fx = [&](const Tensor& in) { return sum(mul(depthwise_conv2d(in, {w, b, 1, 1}), depthwise_conv2d(in, {w, b, 1, 1}))); };
    EXPECT_LT(gradcheck(fx, x).max_relative_error, 1e-5);
}

TEST(Tensor, DepthwiseMatchesPerChannelDenseConv) {
    Tensor x = random_tensor({1, 2, 5, 5}, 13);
    Tensor w = random_tensor({2, 1, 3, 3}, 14);
    Tensor b = random_tensor({2}, 15);
    const auto y = depthwise_conv2d(x, {w, b, 1, 1});
    // Dense weight that only connects channel c to itself.
    std::vector<double> dense(2 * 2 * 9, 0.0);
    for (std::size_t c = 0; c < 2; ++c)
        for (std::size_t k = 0; k < 9; ++k) dense[(c * 2 + c) * 9 + k] = w.values()[c * 9 + k];
    const auto ref = naive_conv(x, Tensor::from_values({2, 2, 3, 3}, dense), b, 1, 1);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.values()[i], ref[i], 1e-12);
}

TEST(Tensor, ReluValuesAndGradient) {
    const auto y = relu(Tensor::from_values({3}, {-1.0, 0.0, 2.0}));
    EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()), (std::vector<double>{0.0, 0.0, 2.0}));

    Tensor neg = Tensor::from_values({4}, {-1.0, -2.0, -0.5, -3.0}, true);
    Tensor out = relu(neg);
    for (double v : out.values()) EXPECT_EQ(v, 0.0);
    sum(out).backward();
    for (double g : neg.grad()) EXPECT_EQ(g, 0.0);

    EXPECT_LT(gradcheck([](const Tensor& x) { return sum(mul(relu(x), relu(x))); },
                        random_away_from_zero({2, 3, 4}, 16))
                  .max_relative_error,
              1e-6);
}

TEST(Tensor, SigmoidIsStableAndSymmetric) {
    EXPECT_EQ(sigmoid(Tensor::scalar(0.0)).item(), 0.5);
    for (double x : {0.3, 2.0, 17.0, 40.0, 500.0}) {
        const double a = sigmoid(Tensor::scalar(x)).item();
        const double b = sigmoid(Tensor::scalar(-x)).item();
        EXPECT_TRUE(std::isfinite(a) && std::isfinite(b));
        EXPECT_NEAR(a + b, 1.0, 1e-15);
        EXPECT_GE(b, 0.0);
        EXPECT_LE(a, 1.0);
    }
    EXPECT_LT(gradcheck([](const Tensor& x) { return sum(mul(sigmoid(x), x)); }, random_tensor({10}, 17, -4.0, 4.0))
                  .max_relative_error,
              1e-6);
}

TEST(Tensor, UpsampleReplicatesBlocks) {
    const auto one = upsample_nearest_2x(Tensor::full({1, 1, 1, 1}, 5.0));
    ASSERT_EQ(one.shape(), (Shape{1, 1, 2, 2}));
    for (double v : one.values()) EXPECT_EQ(v, 5.0);

    const auto y = upsample_nearest_2x(Tensor::from_values({1, 1, 2, 2}, {1, 2, 3, 4}));
    const std::vector<double> expected{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4};
    EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()), expected);

    Tensor weights = random_tensor({2, 3, 6, 4}, 18);
    EXPECT_LT(gradcheck([&](const Tensor& x) { return sum(mul(upsample_nearest_2x(x), weights)); },
                        random_tensor({2, 3, 3, 2}, 19))
                  .max_relative_error,
              1e-6);
}

TEST(Tensor, MaxPoolRoundsOddSizesUp) {
    const auto y = max_pool_2x2(Tensor::from_values({1, 1, 3, 3}, {1, 5, 2, 7, 3, 0, 4, 8, 9}));
    ASSERT_EQ(y.shape(), (Shape{1, 1, 2, 2}));
    EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()), (std::vector<double>{7, 2, 8, 9}));
    Tensor weights = random_tensor({1, 2, 3, 2}, 20);
    EXPECT_LT(gradcheck([&](const Tensor& x) { return sum(mul(max_pool_2x2(x), weights)); },
                        random_tensor({1, 2, 5, 4}, 21))
                  .max_relative_error,
              1e-6);
}

TEST(Tensor, AddElementwiseAndCropRule) {
    const auto y = add(Tensor::from_values({2}, {1, 2}), Tensor::from_values({2}, {3, 4}));
    EXPECT_EQ(std::vector<double>(y.values().begin(), y.values().end()), (std::vector<double>{4, 6}));

    // b is one larger in H and W; its bottom row and right column are dropped.
    const auto a = Tensor::zeros({1, 1, 2, 2});
    const auto b = Tensor::from_values({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    const auto c = add(a, b);
    ASSERT_EQ(c.shape(), (Shape{1, 1, 2, 2}));
    EXPECT_EQ(std::vector<double>(c.values().begin(), c.values().end()), (std::vector<double>{1, 2, 4, 5}));

    EXPECT_THROW(add(Tensor::zeros({1, 1, 2, 2}), Tensor::zeros({1, 1, 4, 2})), ShapeError);
    EXPECT_THROW(add(Tensor::zeros({1, 1, 3, 3}), Tensor::zeros({1, 1, 2, 2})), ShapeError);
    EXPECT_THROW(add(Tensor::zeros({1, 2, 2, 2}), Tensor::zeros({1, 1, 2, 2})), ShapeError);
    EXPECT_THROW(add(Tensor::zeros({3}), Tensor::zeros({4})), ShapeError);

    Tensor fixed = random_tensor({1, 2, 3, 4}, 22);
    EXPECT_LT(gradcheck([&](const Tensor& x) { return sum(mul(add(fixed, x), add(fixed, x))); },
                        random_tensor({1, 2, 4, 5}, 23))
                  .max_relative_error,
              1e-6);
}

TEST(Tensor, SumGradientIsOnes) {
    Tensor x = random_tensor({3, 4}, 24);
    const auto r = gradcheck([](const Tensor& t) { return sum(t); }, x);
    EXPECT_LT(r.max_relative_error, 1e-10);
}

TEST(Tensor, SumOfSquaresGradient) {
    Tensor x = Tensor::from_values({2}, {1.0, 2.0}, true);
    sum(mul(x, x)).backward();
    EXPECT_NEAR(x.grad()[0], 2.0, 1e-12);
    EXPECT_NEAR(x.grad()[1], 4.0, 1e-12);
    EXPECT_LT(gradcheck([](const Tensor& t) { return sum(mul(t, t)); }, Tensor::from_values({2}, {1.0, 2.0}))
                  .max_relative_error,
              1e-8);
}

TEST(Tensor, GradcheckRejectsNonFiniteLoss) {
    auto f = [](const Tensor& t) {
        return Tensor::from_op({}, {std::numeric_limits<double>::infinity()}, {t}, [](std::span<const double>) {});
    };
    EXPECT_THROW(gradcheck(f, Tensor::zeros({2})), std::runtime_error);
}

TEST(Tensor, SgdStepDefinition) {
    Tensor p = Tensor::scalar(1.0, true);
    p.grad_accumulator()[0] = 2.0;
    std::vector<Tensor> params{p};
    sgd_step(params, {0.0001, 0});
    EXPECT_NEAR(p.item(), 0.9998, 1e-15);
    EXPECT_EQ(p.grad()[0], 0.0);
}

TEST(Tensor, SgdStepOnScalarSquaredLoss) {
    Tensor w = Tensor::scalar(1.0, true);
    const Tensor x = Tensor::scalar(1.0);
    const Tensor y = mul(w, x);
    mul(y, y).backward();
    std::vector<Tensor> params{w};
    sgd_step(params, {0.1, 0});
    EXPECT_NEAR(w.item(), 0.8, 1e-15);
}

TEST(Tensor, SgdRejectsNegativeLearningRate) {
    std::vector<Tensor> params{Tensor::scalar(1.0, true)};
    EXPECT_THROW(sgd_step(params, {-1.0, 0}), std::invalid_argument);
}

TEST(Tensor, NoGradGuardSkipsGraph) {
    Tensor x = Tensor::from_values({2}, {1.0, -1.0}, true);
    {
        NoGradGuard guard;
        EXPECT_FALSE(grad_enabled());
        Tensor y = sum(relu(x));
        EXPECT_FALSE(y.requires_grad());
    }
    EXPECT_TRUE(grad_enabled());
    EXPECT_TRUE(sum(relu(x)).requires_grad());
}

TEST(Tensor, GradientsAccumulateAcrossBackwardCalls) {
    Tensor x = Tensor::from_values({2}, {3.0, 4.0}, true);
    sum(x).backward();
    sum(x).backward();
    EXPECT_EQ(x.grad()[0], 2.0);
    x.zero_grad();
    EXPECT_EQ(x.grad()[0], 0.0);
}

TEST(Tensor, ReusedNodeReceivesBothGradients) {
    Tensor x = Tensor::from_values({1}, {3.0}, true);
    Tensor y = add(x, x);
    mul(y, x).backward();  // 2x^2
    EXPECT_NEAR(x.grad()[0], 12.0, 1e-12);
}

TEST(Tensor, FromValuesChecksSize) {
    EXPECT_THROW(Tensor::from_values({2, 2}, {1.0, 2.0}), ShapeError);
    EXPECT_THROW(Tensor::from_values({2}, {1.0, 2.0}).item(), ShapeError);
}

TEST(Tensor, IdenticalSeedsGiveIdenticalTrajectories) {
    auto run = [] {
        Tensor w = random_tensor({2, 2, 3, 3}, 25);
        w.set_requires_grad(true);
        Tensor x = random_tensor({1, 2, 5, 5}, 26);
        std::vector<Tensor> params{w};
        for (int i = 0; i < 5; ++i) {
            const Tensor y = conv2d(x, {w, Tensor::zeros({2}), 1, 1});
            sum(mul(y, y)).backward();
            sgd_step(params, {0.01, 3});
        }
        return std::vector<double>(w.values().begin(), w.values().end());
    };
    EXPECT_EQ(run(), run());
}

}  // namespace
}  // namespace dfpn
