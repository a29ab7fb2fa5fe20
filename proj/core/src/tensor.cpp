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

#include "dfpn/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

namespace dfpn {

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> inputs;
    Tensor::BackwardFn backward;
};

}  // namespace detail

namespace {

thread_local bool t_grad_enabled = true;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

void check_finite(const std::vector<double>& values, const char* op) {
#ifndef NDEBUG
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw std::runtime_error(std::string("non-finite value produced by ") + op);
        }
    }
#else
    (void)values;
    (void)op;
#endif
}

void require_rank4(const Tensor& t, const char* op) {
    if (!t.defined() || t.rank() != 4) {
        throw ShapeError(std::string(op) + ": expected an NCHW tensor, got " +
                         (t.defined() ? shape_to_string(t.shape()) : std::string("undefined")));
    }
}

struct ConvGeometry {
    std::size_t batch, in_c, in_h, in_w, out_c, kernel, out_h, out_w;
    int stride, padding;
};

ConvGeometry conv_geometry(const Tensor& input, const ConvParams& params, bool depthwise,
                           const char* op) {
    require_rank4(input, op);
    if (!params.weight.defined() || params.weight.rank() != 4) {
        throw ShapeError(std::string(op) + ": weight must be (outC, inC, kH, kW)");
    }
    const Shape& ws = params.weight.shape();
    if (ws[2] != ws[3]) {
        throw ShapeError(std::string(op) + ": only square kernels are supported, got " +
                         shape_to_string(ws));
    }
    if (params.stride < 1 || params.padding < 0) {
        throw ShapeError(std::string(op) + ": stride must be >= 1 and padding >= 0");
    }
    ConvGeometry g{};
    g.batch = input.dim(0);
    g.in_c = input.dim(1);
    g.in_h = input.dim(2);
    g.in_w = input.dim(3);
    g.kernel = ws[2];
    g.stride = params.stride;
    g.padding = params.padding;
    if (depthwise) {
        if (ws[1] != 1 || ws[0] != g.in_c) {
            throw ShapeError(std::string(op) + ": weight " + shape_to_string(ws) +
                             " incompatible with input " + shape_to_string(input.shape()));
        }
        g.out_c = g.in_c;
    } else {
        if (ws[1] != g.in_c) {
            throw ShapeError(std::string(op) + ": input has " + std::to_string(g.in_c) +
                             " channels but weight expects " + std::to_string(ws[1]) + " (" +
                             shape_to_string(ws) + ")");
        }
        g.out_c = ws[0];
    }
    if (!params.bias.defined() || params.bias.numel() != g.out_c) {
        throw ShapeError(std::string(op) + ": bias must have " + std::to_string(g.out_c) +
                         " entries");
    }
    const std::size_t padded_h = g.in_h + 2 * static_cast<std::size_t>(g.padding);
    const std::size_t padded_w = g.in_w + 2 * static_cast<std::size_t>(g.padding);
    if (padded_h < g.kernel || padded_w < g.kernel) {
        throw ShapeError(std::string(op) + ": input " + shape_to_string(input.shape()) +
                         " smaller than kernel " + std::to_string(g.kernel) + " after padding");
    }
    g.out_h = conv_output_size(g.in_h, g.kernel, g.stride, g.padding);
    g.out_w = conv_output_size(g.in_w, g.kernel, g.stride, g.padding);
    return g;
}

// Unfolds one image (C,H,W) into a (C*k*k, outH*outW) row-major matrix.
void im2col(const double* image, const ConvGeometry& g, double* cols) {
    const std::size_t k = g.kernel;
    const std::size_t positions = g.out_h * g.out_w;
    for (std::size_t c = 0; c < g.in_c; ++c) {
        const double* plane = image + c * g.in_h * g.in_w;
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                double* row = cols + ((c * k + ky) * k + kx) * positions;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const long iy = static_cast<long>(oy) * g.stride - g.padding +
                                    static_cast<long>(ky);
                    double* out = row + oy * g.out_w;
                    if (iy < 0 || iy >= static_cast<long>(g.in_h)) {
                        std::fill(out, out + g.out_w, 0.0);
                        continue;
                    }
                    const double* src = plane + static_cast<std::size_t>(iy) * g.in_w;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const long ix = static_cast<long>(ox) * g.stride - g.padding +
                                        static_cast<long>(kx);
                        out[ox] = (ix < 0 || ix >= static_cast<long>(g.in_w))
                                      ? 0.0
                                      : src[static_cast<std::size_t>(ix)];
                    }
                }
            }
        }
    }
}

void col2im(const double* cols, const ConvGeometry& g, double* image_grad) {
    const std::size_t k = g.kernel;
    const std::size_t positions = g.out_h * g.out_w;
    for (std::size_t c = 0; c < g.in_c; ++c) {
        double* plane = image_grad + c * g.in_h * g.in_w;
        for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) {
                const double* row = cols + ((c * k + ky) * k + kx) * positions;
                for (std::size_t oy = 0; oy < g.out_h; ++oy) {
                    const long iy = static_cast<long>(oy) * g.stride - g.padding +
                                    static_cast<long>(ky);
                    if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
                    double* dst = plane + static_cast<std::size_t>(iy) * g.in_w;
                    const double* src = row + oy * g.out_w;
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const long ix = static_cast<long>(ox) * g.stride - g.padding +
                                        static_cast<long>(kx);
                        if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
                        dst[static_cast<std::size_t>(ix)] += src[ox];
                    }
                }
            }
        }
    }
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    const std::size_t n = shape_numel(shape);
    return from_values(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        throw ShapeError("shape " + shape_to_string(shape) + " needs " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
    }
    auto node = std::make_shared<detail::Node>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_values({}, {value}, requires_grad);
}

Tensor Tensor::from_op(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                       BackwardFn backward) {
    Tensor out = from_values(std::move(shape), std::move(values));
    if (!t_grad_enabled) return out;
    const bool any = std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor& t) { return t.defined() && t.requires_grad(); });
    if (!any) return out;
    auto& node = out.node();
    node.requires_grad = true;
    node.inputs.reserve(inputs.size());
    for (auto& in : inputs) {
        if (in.defined()) node.inputs.push_back(in.node_);
    }
    node.backward = std::move(backward);
    return out;
}

detail::Node& Tensor::node() const {
    if (!node_) throw std::logic_error("use of an undefined Tensor");
    return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
    const Shape& s = shape();
    if (axis >= s.size()) {
        throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_to_string(s));
    }
    return s[axis];
}

std::size_t Tensor::numel() const { return node().value.size(); }

std::span<const double> Tensor::values() const { return node().value; }
std::span<double> Tensor::mutable_values() { return node().value; }

double Tensor::item() const {
    if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_to_string(shape()));
    return node().value[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
    const Shape& s = shape();
    if (index.size() != s.size()) throw ShapeError("index rank mismatch");
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
        if (i >= s[axis]) throw ShapeError("index out of range");
        flat = flat * s[axis] + i;
        ++axis;
    }
    return node().value[flat];
}

bool Tensor::requires_grad() const { return node().requires_grad; }
void Tensor::set_requires_grad(bool flag) { node().requires_grad = flag; }
bool Tensor::has_grad() const { return !node().grad.empty(); }
std::span<const double> Tensor::grad() const { return node().grad; }

std::span<double> Tensor::grad_accumulator() const {
    auto& n = node();
    if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
    return n.grad;
}

void Tensor::zero_grad() {
    auto& n = node();
    std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

Tensor Tensor::clone() const {
    return from_values(shape(), std::vector<double>(values().begin(), values().end()));
}

void Tensor::backward() const {
    auto& root = node();
    if (root.value.size() != 1) {
        throw ShapeError("backward() requires a scalar, got " + shape_to_string(root.shape));
    }
    if (!root.requires_grad) return;

    // Iterative post-order DFS gives a topological order (inputs before outputs).
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{&root, 0}};
    visited.insert(&root);
    while (!stack.empty()) {
        auto& [n, next] = stack.back();
        if (next < n->inputs.size()) {
            detail::Node* child = n->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }

    if (root.grad.empty()) root.grad.assign(1, 0.0);
    root.grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backward && !n->grad.empty()) n->backward(n->grad);
    }
}

bool grad_enabled() { return t_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

// ---------------------------------------------------------------------------
// Ops

std::size_t conv_output_size(std::size_t size, std::size_t kernel, int stride, int padding) {
    const std::size_t padded = size + 2 * static_cast<std::size_t>(padding);
    if (padded < kernel) throw ShapeError("kernel larger than padded input");
    return (padded - kernel) / static_cast<std::size_t>(stride) + 1;
}

Tensor conv2d(const Tensor& input, const ConvParams& params) {
    const ConvGeometry g = conv_geometry(input, params, false, "conv2d");
    const std::size_t patch = g.in_c * g.kernel * g.kernel;
    const std::size_t positions = g.out_h * g.out_w;

    auto cols = std::make_shared<std::vector<double>>(g.batch * patch * positions);
    std::vector<double> out(g.batch * g.out_c * positions);
    ConstMatrixMap weight(params.weight.values().data(), static_cast<Eigen::Index>(g.out_c),
                          static_cast<Eigen::Index>(patch));
    const auto bias = params.bias.values();
    for (std::size_t n = 0; n < g.batch; ++n) {
        double* col = cols->data() + n * patch * positions;
        im2col(input.values().data() + n * g.in_c * g.in_h * g.in_w, g, col);
        MatrixMap result(out.data() + n * g.out_c * positions, static_cast<Eigen::Index>(g.out_c),
                         static_cast<Eigen::Index>(positions));
        result.noalias() = weight * ConstMatrixMap(col, static_cast<Eigen::Index>(patch),
                                                   static_cast<Eigen::Index>(positions));
        for (std::size_t o = 0; o < g.out_c; ++o) result.row(static_cast<Eigen::Index>(o)).array() += bias[o];
    }
    check_finite(out, "conv2d");

    Tensor in = input, w = params.weight, b = params.bias;
    return Tensor::from_op(
        {g.batch, g.out_c, g.out_h, g.out_w}, std::move(out), {in, w, b},
        [in, w, b, g, cols, patch, positions](std::span<const double> dout) {
            const auto P = static_cast<Eigen::Index>(positions);
            const auto K = static_cast<Eigen::Index>(patch);
            const auto O = static_cast<Eigen::Index>(g.out_c);
            std::vector<double> dcol(patch * positions);
            for (std::size_t n = 0; n < g.batch; ++n) {
                ConstMatrixMap grad_out(dout.data() + n * g.out_c * positions, O, P);
                ConstMatrixMap col(cols->data() + n * patch * positions, K, P);
                if (w.requires_grad()) {
                    MatrixMap dw(w.grad_accumulator().data(), O, K);
                    dw.noalias() += grad_out * col.transpose();
                }
                if (b.requires_grad()) {
                    auto db = b.grad_accumulator();
                    for (Eigen::Index o = 0; o < O; ++o) db[static_cast<std::size_t>(o)] += grad_out.row(o).sum();
                }
                if (in.requires_grad()) {
                    MatrixMap dc(dcol.data(), K, P);
                    dc.noalias() = ConstMatrixMap(w.values().data(), O, K).transpose() * grad_out;
                    col2im(dcol.data(), g, in.grad_accumulator().data() + n * g.in_c * g.in_h * g.in_w);
                }
            }
        });
}

Tensor depthwise_conv2d(const Tensor& input, const ConvParams& params) {
    const ConvGeometry g = conv_geometry(input, params, true, "depthwise_conv2d");
    const std::size_t k = g.kernel;
    std::vector<double> out(g.batch * g.out_c * g.out_h * g.out_w);
    const auto x = input.values();
    const auto w = params.weight.values();
    const auto bias = params.bias.values();

    // Visits every (output cell, kernel tap) pair that lands inside the input.
    auto for_each_tap = [g, k](auto&& fn) {
        for (std::size_t n = 0; n < g.batch; ++n)
            for (std::size_t c = 0; c < g.in_c; ++c)
                for (std::size_t oy = 0; oy < g.out_h; ++oy)
                    for (std::size_t ox = 0; ox < g.out_w; ++ox) {
                        const std::size_t o = ((n * g.in_c + c) * g.out_h + oy) * g.out_w + ox;
                        for (std::size_t ky = 0; ky < k; ++ky) {
                            const long iy = static_cast<long>(oy) * g.stride - g.padding + static_cast<long>(ky);
                            if (iy < 0 || iy >= static_cast<long>(g.in_h)) continue;
                            for (std::size_t kx = 0; kx < k; ++kx) {
                                const long ix = static_cast<long>(ox) * g.stride - g.padding + static_cast<long>(kx);
                                if (ix < 0 || ix >= static_cast<long>(g.in_w)) continue;
                                const std::size_t i = ((n * g.in_c + c) * g.in_h + static_cast<std::size_t>(iy)) * g.in_w +
                                                      static_cast<std::size_t>(ix);
                                fn(o, i, (c * k + ky) * k + kx, c);
                            }
                        }
                    }
    };

    for (std::size_t n = 0; n < g.batch; ++n)
        for (std::size_t c = 0; c < g.in_c; ++c)
            std::fill_n(out.begin() + static_cast<long>((n * g.in_c + c) * g.out_h * g.out_w),
                        g.out_h * g.out_w, bias[c]);
    for_each_tap([&](std::size_t o, std::size_t i, std::size_t wi, std::size_t) { out[o] += w[wi] * x[i]; });
    check_finite(out, "depthwise_conv2d");

    Tensor in = input, wt = params.weight, b = params.bias;
    return Tensor::from_op({g.batch, g.out_c, g.out_h, g.out_w}, std::move(out), {in, wt, b},
                           [in, wt, b, g, for_each_tap](std::span<const double> dout) {
                               const auto xv = in.values();
                               const auto wv = wt.values();
                               std::span<double> dx, dw;
                               if (in.requires_grad()) dx = in.grad_accumulator();
                               if (wt.requires_grad()) dw = wt.grad_accumulator();
                               for_each_tap([&](std::size_t o, std::size_t i, std::size_t wi, std::size_t) {
                                   if (!dx.empty()) dx[i] += wv[wi] * dout[o];
                                   if (!dw.empty()) dw[wi] += xv[i] * dout[o];
                               });
                               if (b.requires_grad()) {
                                   auto db = b.grad_accumulator();
                                   const std::size_t plane = g.out_h * g.out_w;
                                   for (std::size_t n = 0; n < g.batch; ++n)
                                       for (std::size_t c = 0; c < g.in_c; ++c)
                                           for (std::size_t p = 0; p < plane; ++p)
                                               db[c] += dout[(n * g.in_c + c) * plane + p];
                               }
                           });
}

Tensor relu(const Tensor& input) {
    const auto x = input.values();
    std::vector<double> out(x.size());
    std::transform(x.begin(), x.end(), out.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
    Tensor in = input;
    return Tensor::from_op(input.shape(), std::move(out), {in}, [in](std::span<const double> dout) {
        const auto xv = in.values();
        auto dx = in.grad_accumulator();
        for (std::size_t i = 0; i < dx.size(); ++i)
            if (xv[i] > 0.0) dx[i] += dout[i];
    });
}

Tensor sigmoid(const Tensor& input) {
    const auto x = input.values();
    std::vector<double> out(x.size());
    std::transform(x.begin(), x.end(), out.begin(), [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
    auto saved = std::make_shared<std::vector<double>>(out);
    Tensor in = input;
    return Tensor::from_op(input.shape(), std::move(out), {in}, [in, saved](std::span<const double> dout) {
        auto dx = in.grad_accumulator();
        const auto& s = *saved;
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dout[i] * s[i] * (1.0 - s[i]);
    });
}

Tensor upsample_nearest_2x(const Tensor& input) {
    require_rank4(input, "upsample_nearest_2x");
    const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::size_t oh = 2 * h, ow = 2 * w;
    const auto x = input.values();
    std::vector<double> out(n * c * oh * ow);
    for (std::size_t p = 0; p < n * c; ++p)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xx = 0; xx < ow; ++xx)
                out[(p * oh + y) * ow + xx] = x[(p * h + y / 2) * w + xx / 2];
    Tensor in = input;
    return Tensor::from_op({n, c, oh, ow}, std::move(out), {in}, [in, n, c, h, w](std::span<const double> dout) {
        auto dx = in.grad_accumulator();
        const std::size_t oh2 = 2 * h, ow2 = 2 * w;
        for (std::size_t p = 0; p < n * c; ++p)
            for (std::size_t y = 0; y < oh2; ++y)
                for (std::size_t xx = 0; xx < ow2; ++xx)
                    dx[(p * h + y / 2) * w + xx / 2] += dout[(p * oh2 + y) * ow2 + xx];
    });
}

Tensor max_pool_2x2(const Tensor& input) {
    require_rank4(input, "max_pool_2x2");
    const std::size_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::size_t oh = (h + 1) / 2, ow = (w + 1) / 2;
    const auto x = input.values();
    std::vector<double> out(n * c * oh * ow);
    auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
    for (std::size_t p = 0; p < n * c; ++p)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t xx = 0; xx < ow; ++xx) {
                std::size_t best = (p * h + 2 * y) * w + 2 * xx;
                for (std::size_t dy = 0; dy < 2 && 2 * y + dy < h; ++dy)
                    for (std::size_t dx = 0; dx < 2 && 2 * xx + dx < w; ++dx) {
                        const std::size_t i = (p * h + 2 * y + dy) * w + 2 * xx + dx;
                        if (x[i] > x[best]) best = i;
                    }
                const std::size_t o = (p * oh + y) * ow + xx;
                out[o] = x[best];
                (*argmax)[o] = best;
            }
    Tensor in = input;
    return Tensor::from_op({n, c, oh, ow}, std::move(out), {in}, [in, argmax](std::span<const double> dout) {
        auto dx = in.grad_accumulator();
        for (std::size_t o = 0; o < dout.size(); ++o) dx[(*argmax)[o]] += dout[o];
    });
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() == b.shape()) {
        const auto av = a.values(), bv = b.values();
        std::vector<double> out(av.size());
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
        Tensor ta = a, tb = b;
        return Tensor::from_op(a.shape(), std::move(out), {ta, tb}, [ta, tb](std::span<const double> dout) {
            for (const Tensor* t : {&ta, &tb}) {
                if (!t->requires_grad()) continue;
                auto d = t->grad_accumulator();
                for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i];
            }
        });
    }

    // Odd-size pyramid merge: b may exceed a by one pixel along H and/or W.
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    const bool croppable = sa.size() == 4 && sb.size() == 4 && sa[0] == sb[0] && sa[1] == sb[1] &&
                           sb[2] >= sa[2] && sb[2] - sa[2] <= 1 && sb[3] >= sa[3] && sb[3] - sa[3] <= 1;
    if (!croppable) {
        throw ShapeError("add: incompatible shapes " + shape_to_string(sa) + " and " + shape_to_string(sb));
    }
    const std::size_t planes = sa[0] * sa[1], h = sa[2], w = sa[3], bw = sb[3], bh = sb[2];
    const auto av = a.values(), bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                out[(p * h + y) * w + x] = av[(p * h + y) * w + x] + bv[(p * bh + y) * bw + x];
    Tensor ta = a, tb = b;
    return Tensor::from_op(sa, std::move(out), {ta, tb}, [ta, tb, planes, h, w, bh, bw](std::span<const double> dout) {
        if (ta.requires_grad()) {
            auto d = ta.grad_accumulator();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i];
        }
        if (tb.requires_grad()) {
            auto d = tb.grad_accumulator();
            for (std::size_t p = 0; p < planes; ++p)
                for (std::size_t y = 0; y < h; ++y)
                    for (std::size_t x = 0; x < w; ++x) d[(p * bh + y) * bw + x] += dout[(p * h + y) * w + x];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("mul: shape mismatch " + shape_to_string(a.shape()) + " vs " + shape_to_string(b.shape()));
    }
    const auto av = a.values(), bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
    Tensor ta = a, tb = b;
    return Tensor::from_op(a.shape(), std::move(out), {ta, tb}, [ta, tb](std::span<const double> dout) {
        const auto av2 = ta.values(), bv2 = tb.values();
        if (ta.requires_grad()) {
            auto d = ta.grad_accumulator();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i] * bv2[i];
        }
        if (tb.requires_grad()) {
            auto d = tb.grad_accumulator();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += dout[i] * av2[i];
        }
    });
}

Tensor sum(const Tensor& input) {
    const auto x = input.values();
    const double total = std::accumulate(x.begin(), x.end(), 0.0);
    Tensor in = input;
    return Tensor::from_op({}, {total}, {in}, [in](std::span<const double> dout) {
        auto dx = in.grad_accumulator();
        for (double& v : dx) v += dout[0];
    });
}

// ---------------------------------------------------------------------------
// Optimisation and verification

void SgdConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw std::invalid_argument("learning rate must be finite and non-negative");
    }
}

void sgd_step(std::span<Tensor> params, const SgdConfig& config) {
    config.validate();
    for (Tensor& p : params) {
        if (!p.has_grad()) continue;
        auto v = p.mutable_values();
        const auto g = p.grad();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= config.learning_rate * g[i];
        p.zero_grad();
    }
}

namespace {

double checked_scalar(const Tensor& y) {
    const double v = y.item();
    if (!std::isfinite(v)) throw std::runtime_error("gradcheck: loss is not finite");
    return v;
}

double relative_error(double analytic, double numeric) {
    return std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
}

}  // namespace

GradcheckResult gradcheck(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
    Tensor probe = x.clone();
    probe.set_requires_grad(true);
    Tensor y = f(probe);
    checked_scalar(y);
    y.backward();
    std::vector<double> analytic(probe.numel(), 0.0);
    if (probe.has_grad()) std::copy(probe.grad().begin(), probe.grad().end(), analytic.begin());

    GradcheckResult result;
    NoGradGuard no_grad;
    auto v = probe.mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double orig = v[i];
        v[i] = orig + eps;
        const double up = checked_scalar(f(probe));
        v[i] = orig - eps;
        const double down = checked_scalar(f(probe));
        v[i] = orig;
        const double numeric = (up - down) / (2.0 * eps);
        result.max_relative_error = std::max(result.max_relative_error, relative_error(analytic[i], numeric));
        ++result.checked;
    }
    return result;
}

GradcheckResult gradcheck_parameters(const std::function<Tensor()>& loss, std::span<Tensor> params,
                                     std::span<const ParameterCoordinate> coordinates, double eps) {
    for (Tensor& p : params) p.zero_grad();
    Tensor y = loss();
    checked_scalar(y);
    y.backward();

    GradcheckResult result;
    NoGradGuard no_grad;
    for (const auto& c : coordinates) {
        if (c.tensor >= params.size() || c.index >= params[c.tensor].numel()) {
            throw std::out_of_range("gradcheck_parameters: coordinate out of range");
        }
        Tensor& p = params[c.tensor];
        const double analytic = p.has_grad() ? p.grad()[c.index] : 0.0;
        auto v = p.mutable_values();
        const double orig = v[c.index];
        v[c.index] = orig + eps;
        const double up = checked_scalar(loss());
        v[c.index] = orig - eps;
        const double down = checked_scalar(loss());
        v[c.index] = orig;
        result.max_relative_error =
            std::max(result.max_relative_error, relative_error(analytic, (up - down) / (2.0 * eps)));
        ++result.checked;
    }
    for (Tensor& p : params) p.zero_grad();
    return result;
}

}  // namespace dfpn
