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

#include "dfpn/model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dfpn {

// ---------------------------------------------------------------------------
// Parameters

Tensor& ParameterSet::add(std::string name, Tensor tensor) {
    tensor.set_requires_grad(true);
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(tensor));
    return tensors_.back();
}

std::size_t ParameterSet::scalar_count() const {
    return std::accumulate(tensors_.begin(), tensors_.end(), std::size_t{0},
                           [](std::size_t acc, const Tensor& t) { return acc + t.numel(); });
}

Tensor ParameterInit::uniform(Shape shape, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> values(shape_numel(shape));
    for (double& v : values) v = dist(rng_);
    return Tensor::from_values(std::move(shape), std::move(values));
}

ConvParams ParameterInit::conv(ParameterSet& params, const std::string& name, int in_channels, int out_channels,
                               int kernel, int stride, int padding, double gain) {
    const auto in = static_cast<std::size_t>(in_channels);
    const auto out = static_cast<std::size_t>(out_channels);
    const auto k = static_cast<std::size_t>(kernel);
    const double bound = gain * std::sqrt(6.0 / static_cast<double>(in * k * k));
    ConvParams p;
    p.weight = params.add(name + ".weight", uniform({out, in, k, k}, bound));
    p.bias = params.add(name + ".bias", Tensor::zeros({out}));
    p.stride = stride;
    p.padding = padding;
    return p;
}

ConvParams ParameterInit::depthwise(ParameterSet& params, const std::string& name, int channels, int kernel,
                                    int stride, int padding) {
    const auto c = static_cast<std::size_t>(channels);
    const auto k = static_cast<std::size_t>(kernel);
    ConvParams p;
    p.weight = params.add(name + ".weight", uniform({c, 1, k, k}, std::sqrt(6.0 / static_cast<double>(k * k))));
    p.bias = params.add(name + ".bias", Tensor::zeros({c}));
    p.stride = stride;
    p.padding = padding;
    return p;
}

// ---------------------------------------------------------------------------
// Backbone

Backbone::Backbone(const BackboneConfig& config, ParameterSet& params, ParameterInit& init) : config_(config) {
    config_.validate();
    int in = config_.input_channels;
    for (std::size_t s = 0; s < config_.stage_channels.size(); ++s) {
        const int out = config_.stage_channels[s];
        const std::string name = "backbone.stage" + std::to_string(s);
        Stage stage;
        switch (config_.kind) {
            case BackboneKind::TinyPlain:
            case BackboneKind::TinyResidual:
                stage.main.push_back({init.conv(params, name + ".conv0", in, out, 3, 2, 1), false});
                stage.main.push_back({init.conv(params, name + ".conv1", out, out, 3, 1, 1), false});
                if (config_.kind == BackboneKind::TinyResidual) {
                    stage.skip = {init.conv(params, name + ".skip", in, out, 1, 2, 0), false};
                }
                break;
            case BackboneKind::TinyDepthwise:
                stage.main.push_back({init.depthwise(params, name + ".dw0", in, 3, 2, 1), true, false});
                stage.main.push_back({init.conv(params, name + ".pw0", in, out, 1, 1, 0), false});
                stage.main.push_back({init.depthwise(params, name + ".dw1", out, 3, 1, 1), true, false});
                stage.main.push_back({init.conv(params, name + ".pw1", out, out, 1, 1, 0), false});
                break;
        }
        stages_.push_back(std::move(stage));
        in = out;
    }
}

std::size_t Backbone::stage_parameter_count(BackboneKind kind, std::size_t in, std::size_t out) {
    switch (kind) {
        case BackboneKind::TinyPlain:
            return (9 * in * out + out) + (9 * out * out + out);
        case BackboneKind::TinyResidual:
            return (9 * in * out + out) + (9 * out * out + out) + (in * out + out);
        case BackboneKind::TinyDepthwise:
            return (9 * in + in) + (in * out + out) + (9 * out + out) + (out * out + out);
    }
    return 0;
}

Tensor Backbone::plain_path(std::size_t stage, const Tensor& x) const {
    Tensor h = x;
    for (const auto& layer : stages_.at(stage).main) h = layer.activate ? relu(layer(h)) : layer(h);
    return h;
}

Tensor Backbone::skip_path(std::size_t stage, const Tensor& x) const {
    const auto& s = stages_.at(stage);
    if (!s.skip.params.weight.defined()) throw std::logic_error("backbone variant has no skip projection");
    return s.skip(x);
}

std::vector<Tensor> Backbone::forward(const Tensor& image) const {
    if (image.rank() != 4 || image.dim(1) != static_cast<std::size_t>(config_.input_channels)) {
        throw ShapeError("backbone expects a (1, " + std::to_string(config_.input_channels) + ", H, W) image, got " +
                         shape_to_string(image.shape()));
    }
    const std::size_t min_size = config_.min_input_size();
    if (image.dim(2) < min_size || image.dim(3) < min_size) {
        throw std::invalid_argument("image " + std::to_string(image.dim(2)) + "x" + std::to_string(image.dim(3)) +
                                    " too small: a " + std::to_string(stages_.size()) +
                                    "-stage backbone needs at least " + std::to_string(min_size) + "x" +
                                    std::to_string(min_size));
    }
    std::vector<Tensor> maps;
    Tensor h = image;
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        Tensor out = plain_path(s, h);
        if (config_.kind == BackboneKind::TinyResidual) out = add(out, skip_path(s, h));
        maps.push_back(out);
        h = out;
    }
    return maps;
}

// ---------------------------------------------------------------------------
// Pyramid

std::vector<LevelSize> pyramid_level_sizes(std::size_t image_height, std::size_t image_width) {
    std::vector<LevelSize> sizes;
    std::size_t h = image_height, w = image_width;
    int index = 0;
    do {
        h = (h + 1) / 2;
        w = (w + 1) / 2;
        ++index;
        sizes.push_back({index, 1 << index, h, w});
    } while (h > 1 || w > 1);
    return sizes;
}

FeaturePyramid::FeaturePyramid(const std::vector<int>& stage_channels, int pyramid_channels, ExtensionKind extension,
                               ParameterSet& params, ParameterInit& init)
    : channels_(pyramid_channels), extension_(extension) {
    for (std::size_t s = 0; s < stage_channels.size(); ++s) {
        laterals_.push_back(
            {init.conv(params, "pyramid.lateral" + std::to_string(s), stage_channels[s], pyramid_channels, 1, 1, 0),
             false});
    }
    if (extension_ == ExtensionKind::StridedConv) {
        extend_ = {init.conv(params, "pyramid.extend", pyramid_channels, pyramid_channels, 3, 2, 1), false};
    }
    smooth_ = {init.conv(params, "pyramid.smooth", pyramid_channels, pyramid_channels, 3, 1, 1), false};
}

std::vector<PyramidLevel> FeaturePyramid::forward(std::span<const Tensor> stage_maps, int min_stride) const {
    if (stage_maps.size() != laterals_.size()) {
        throw std::invalid_argument("pyramid expects " + std::to_string(laterals_.size()) + " stage maps, got " +
                                    std::to_string(stage_maps.size()));
    }
    for (std::size_t s = 1; s < stage_maps.size(); ++s) {
        const auto& prev = stage_maps[s - 1];
        const auto& cur = stage_maps[s];
        if (cur.dim(2) != (prev.dim(2) + 1) / 2 || cur.dim(3) != (prev.dim(3) + 1) / 2) {
            throw std::invalid_argument("pyramid: stage maps must halve in size, got " + shape_to_string(prev.shape()) +
                                        " then " + shape_to_string(cur.shape()));
        }
    }

    // Bottom-up: projected backbone stages, then extension levels down to 1x1.
    // Stage maps finer than min_stride never reach an output level.
    const std::size_t stages = stage_maps.size();
    std::vector<Tensor> bottom_up(stages);
    std::vector<int> strides;
    for (std::size_t s = 0; s < stages; ++s) {
        strides.push_back(2 << s);
        if (strides.back() >= min_stride || s + 1 == stages) bottom_up[s] = laterals_[s](stage_maps[s]);
    }
    while (bottom_up.back().dim(2) > 1 || bottom_up.back().dim(3) > 1) {
        const Tensor& prev = bottom_up.back();
        bottom_up.push_back(extension_ == ExtensionKind::StridedConv ? extend_(relu(prev)) : max_pool_2x2(prev));
        strides.push_back(strides.back() * 2);
    }

    // Top-down from the 1x1 level.
    std::vector<Tensor> merged(bottom_up.size());
    merged.back() = bottom_up.back();
    for (std::size_t l = bottom_up.size() - 1; l-- > 0;) {
        if (strides[l] < min_stride) break;
        merged[l] = add(bottom_up[l], upsample_nearest_2x(merged[l + 1]));
    }

    std::vector<PyramidLevel> levels;
    for (std::size_t l = 0; l < merged.size(); ++l) {
        if (strides[l] < min_stride) continue;
        levels.push_back({static_cast<int>(std::log2(strides[l])), strides[l], smooth_(merged[l])});
    }
    return levels;
}

// ---------------------------------------------------------------------------
// Heads

DetectionHeads::DetectionHeads(const HeadConfig& config, ParameterSet& params, ParameterInit& init)
    : config_(config) {
    config_.validate();
    const int c = config_.pyramid_channels;
    for (int i = 0; i < config_.depth; ++i) {
        class_tower_.push_back({init.conv(params, "heads.class" + std::to_string(i), c, c, 3, 1, 1), false});
    }
    // Prediction layers start small so that initial scores sit at the prior.
    class_out_ = {init.conv(params, "heads.class_out", c, config_.class_depth(), 3, 1, 1, 0.01), false};
    const double prior_bias = -std::log((1.0 - kPriorProbability) / kPriorProbability);
    for (double& b : class_out_.params.bias.mutable_values()) b = prior_bias;

    for (int i = 0; i < config_.depth; ++i) {
        box_tower_.push_back({init.conv(params, "heads.box" + std::to_string(i), c, c, 3, 1, 1), false});
    }
    box_out_ = {init.conv(params, "heads.box_out", c, config_.box_depth(), 3, 1, 1, 0.01), false};
}

LevelOutput DetectionHeads::forward_level(const PyramidLevel& level) const {
    if (level.feature.dim(1) != static_cast<std::size_t>(config_.pyramid_channels)) {
        throw ShapeError("heads expect " + std::to_string(config_.pyramid_channels) + " channels, got " +
                         shape_to_string(level.feature.shape()));
    }
    Tensor c = level.feature;
    for (const auto& layer : class_tower_) c = relu(layer(c));
    Tensor b = level.feature;
    for (const auto& layer : box_tower_) b = relu(layer(b));
    return {level.index, level.stride, class_out_(c), box_out_(b)};
}

std::vector<LevelOutput> DetectionHeads::forward(std::span<const PyramidLevel> pyramid) const {
    std::vector<LevelOutput> out;
    out.reserve(pyramid.size());
    for (const auto& level : pyramid) out.push_back(forward_level(level));
    return out;
}

Tensor gather_anchor_rows(std::span<const Tensor> level_maps, std::size_t anchors_per_location, std::size_t width) {
    const std::size_t depth = anchors_per_location * width;
    std::size_t rows = 0;
    for (const auto& m : level_maps) {
        if (m.rank() != 4 || m.dim(0) != 1 || m.dim(1) != depth) {
            throw ShapeError("gather_anchor_rows: expected (1, " + std::to_string(depth) + ", H, W), got " +
                             shape_to_string(m.shape()));
        }
        rows += m.dim(2) * m.dim(3) * anchors_per_location;
    }

    // index[r * width + c] = (level, flat source offset)
    auto sources = std::make_shared<std::vector<std::pair<std::size_t, std::size_t>>>();
    sources->reserve(rows * width);
    std::vector<double> out;
    out.reserve(rows * width);
    for (std::size_t l = 0; l < level_maps.size(); ++l) {
        const std::size_t h = level_maps[l].dim(2), w = level_maps[l].dim(3);
        const auto v = level_maps[l].values();
        for (std::size_t i = 0; i < h; ++i)
            for (std::size_t j = 0; j < w; ++j)
                for (std::size_t a = 0; a < anchors_per_location; ++a)
                    for (std::size_t c = 0; c < width; ++c) {
                        const std::size_t src = ((a * width + c) * h + i) * w + j;
                        out.push_back(v[src]);
                        sources->emplace_back(l, src);
                    }
    }
    std::vector<Tensor> inputs(level_maps.begin(), level_maps.end());
    return Tensor::from_op({rows, width}, std::move(out), inputs, [inputs, sources](std::span<const double> dout) {
        std::vector<std::span<double>> grads(inputs.size());
        for (std::size_t l = 0; l < inputs.size(); ++l)
            if (inputs[l].requires_grad()) grads[l] = inputs[l].grad_accumulator();
        for (std::size_t k = 0; k < dout.size(); ++k) {
            const auto [l, src] = (*sources)[k];
            if (!grads[l].empty()) grads[l][src] += dout[k];
        }
    });
}

// ---------------------------------------------------------------------------
// Detector

Detector::Detector(ModelManifest manifest, std::uint64_t seed)
    : manifest_((manifest.validate(), std::move(manifest))),
      params_(),
      init_(seed),
      backbone_(manifest_.backbone, params_, init_),
      pyramid_(manifest_.backbone.stage_channels, manifest_.head.pyramid_channels, manifest_.extension, params_,
               init_),
      heads_(manifest_.head, params_, init_) {
    if (static_cast<std::size_t>(manifest_.head.anchors_per_location) != anchor_config_.anchors_per_location()) {
        throw std::invalid_argument("manifest anchors_per_location must be " +
                                    std::to_string(anchor_config_.anchors_per_location()));
    }
}

std::vector<LevelOutput> Detector::forward(const Tensor& image) const {
    const auto stages = backbone_.forward(image);
    const auto levels = pyramid_.forward(stages, manifest_.head_min_stride);
    return heads_.forward(levels);
}

std::vector<LevelAnchors> Detector::anchors(std::size_t image_height, std::size_t image_width) const {
    std::vector<LevelAnchors> out;
    for (const auto& s : pyramid_level_sizes(image_height, image_width)) {
        if (s.stride < manifest_.head_min_stride) continue;
        out.push_back({s.index, s.stride, s.height, s.width,
                       generate_anchors(s.height, s.width, s.stride, anchor_config_)});
    }
    return out;
}

Checkpoint Detector::to_checkpoint() const {
    Checkpoint ckpt;
    ckpt.tag = manifest_.hash();
    const auto tensors = params_.tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        ckpt.tensors.push_back({params_.names()[i], tensors[i].shape(),
                                std::vector<double>(tensors[i].values().begin(), tensors[i].values().end())});
    }
    return ckpt;
}

void Detector::load_checkpoint(const Checkpoint& checkpoint) {
    if (checkpoint.tag != manifest_.hash()) {
        throw CheckpointError("checkpoint was written for a different model manifest");
    }
    auto tensors = params_.tensors();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const NamedTensor* src = checkpoint.find(params_.names()[i]);
        if (!src) throw CheckpointError("checkpoint is missing parameter '" + params_.names()[i] + "'");
        if (src->shape != tensors[i].shape()) {
            throw CheckpointError("parameter '" + params_.names()[i] + "' has shape " + shape_to_string(src->shape) +
                                  ", model expects " + shape_to_string(tensors[i].shape()));
        }
    }
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        const NamedTensor* src = checkpoint.find(params_.names()[i]);
        std::copy(src->values.begin(), src->values.end(), tensors[i].mutable_values().begin());
        tensors[i].zero_grad();
    }
}

}  // namespace dfpn
