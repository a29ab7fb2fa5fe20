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
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dfpn {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

namespace detail {
struct Node;
}

/// Dense float64 tensor with optional reverse-mode gradient tracking.
///
/// A Tensor is a cheap handle: copies share the same storage and graph node.
/// Image-like data is laid out NCHW in row-major order.
class Tensor {
public:
    /// Receives the gradient of the op's output; accumulates into the inputs.
    using BackwardFn = std::function<void(std::span<const double> out_grad)>;

    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    /// Builds the result of a differentiable op. The backward closure runs only
    /// when gradient tracking is enabled and at least one input requires grad.
    static Tensor from_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                          BackwardFn backward);

    bool defined() const { return static_cast<bool>(node_); }
    const Shape& shape() const;
    std::size_t rank() const { return shape().size(); }
    std::size_t dim(std::size_t axis) const;
    std::size_t numel() const;

    std::span<const double> values() const;
    std::span<double> mutable_values();
    double item() const;
    double at(std::initializer_list<std::size_t> index) const;

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    bool has_grad() const;
    /// Empty when no gradient has been accumulated.
    std::span<const double> grad() const;
    /// Gradient buffer, allocated (zeroed) on first use. For op implementations.
    std::span<double> grad_accumulator() const;
    void zero_grad();

    /// Runs reverse-mode differentiation from this scalar.
    void backward() const;

    /// Detached deep copy of the values.
    Tensor clone() const;

    bool same_node(const Tensor& other) const { return node_ == other.node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
    detail::Node& node() const;

    std::shared_ptr<detail::Node> node_;
};

/// Whether ops currently record a backward graph on this thread.
bool grad_enabled();

/// Disables graph recording on the current thread for its lifetime.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

struct ConvParams {
    Tensor weight;  // (outC, inC, kH, kW); depthwise: (C, 1, kH, kW)
    Tensor bias;    // (outC)
    int stride = 1;
    int padding = 0;

    std::size_t out_channels() const { return weight.dim(0); }
    std::size_t in_channels() const { return weight.dim(1); }
    std::size_t kernel() const { return weight.dim(2); }
};

/// floor((size + 2*padding - kernel) / stride) + 1
std::size_t conv_output_size(std::size_t size, std::size_t kernel, int stride, int padding);

Tensor conv2d(const Tensor& input, const ConvParams& params);
Tensor depthwise_conv2d(const Tensor& input, const ConvParams& params);
Tensor relu(const Tensor& input);
Tensor sigmoid(const Tensor& input);
Tensor upsample_nearest_2x(const Tensor& input);
/// 2x2 stride-2 max pooling; odd extents round up (windows clipped at the border).
Tensor max_pool_2x2(const Tensor& input);

/// Elementwise sum. `b` may be one larger than `a` along H and/or W of an NCHW
/// tensor; its bottom row / right column is cropped away in that case.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor sum(const Tensor& input);

struct SgdConfig {
    double learning_rate = 1e-4;
    std::uint64_t seed = 0;

    void validate() const;
};

/// p <- p - lr * grad for every parameter, then zeroes the gradients.
void sgd_step(std::span<Tensor> params, const SgdConfig& config);

struct GradcheckResult {
    double max_relative_error = 0.0;
    std::size_t checked = 0;
};

/// Compares the analytic gradient of scalar `f` at `x` with central differences.
/// Relative error per coordinate: |analytic - numeric| / max(1, |numeric|).
GradcheckResult gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x,
                          double eps = 1e-5);

struct ParameterCoordinate {
    std::size_t tensor = 0;
    std::size_t index = 0;
};

/// Same comparison, for selected coordinates of a parameter set, by perturbing
/// the parameters in place (restored afterwards).
GradcheckResult gradcheck_parameters(const std::function<Tensor()>& loss, std::span<Tensor> params,
                                     std::span<const ParameterCoordinate> coordinates,
                                     double eps = 1e-5);

}  // namespace dfpn
