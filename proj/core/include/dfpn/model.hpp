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

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dfpn/anchors.hpp"
#include "dfpn/checkpoint.hpp"
#include "dfpn/manifest.hpp"
#include "dfpn/tensor.hpp"

namespace dfpn {

/// Ordered, named parameter tensors of a model.
class ParameterSet {
public:
    Tensor& add(std::string name, Tensor tensor);
    std::span<Tensor> tensors() { return tensors_; }
    std::span<const Tensor> tensors() const { return tensors_; }
    const std::vector<std::string>& names() const { return names_; }
    std::size_t scalar_count() const;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
};

/// He-uniform initialisation, seeded; draws happen in registration order.
class ParameterInit {
public:
    explicit ParameterInit(std::uint64_t seed) : rng_(seed) {}

    ConvParams conv(ParameterSet& params, const std::string& name, int in_channels, int out_channels, int kernel,
                    int stride, int padding, double gain = 1.0);
    ConvParams depthwise(ParameterSet& params, const std::string& name, int channels, int kernel, int stride,
                         int padding);

private:
    Tensor uniform(Shape shape, double bound);

    std::mt19937_64 rng_;
};

/// Convolution layer, dense or depthwise.
struct ConvLayer {
    ConvParams params;
    bool depthwise = false;
    bool activate = true;

    Tensor operator()(const Tensor& x) const { return depthwise ? depthwise_conv2d(x, params) : conv2d(x, params); }
};

class Backbone {
public:
    Backbone(const BackboneConfig& config, ParameterSet& params, ParameterInit& init);

    /// Stage maps at strides 2, 4, 8, ... Throws std::invalid_argument if the
    /// image is smaller than min_input_size().
    std::vector<Tensor> forward(const Tensor& image) const;

    const BackboneConfig& config() const { return config_; }

    /// Closed-form parameter count of one stage, for the given variant.
    static std::size_t stage_parameter_count(BackboneKind kind, std::size_t in_channels, std::size_t out_channels);

    struct Stage {
        std::vector<ConvLayer> main;  // each followed by relu
        ConvLayer skip;               // tiny-residual only: 1x1 stride-2 projection
    };

    /// Main path only (no skip projection); used to check the residual variant.
    Tensor plain_path(std::size_t stage, const Tensor& x) const;
    Tensor skip_path(std::size_t stage, const Tensor& x) const;

private:
    BackboneConfig config_;
    std::vector<Stage> stages_;
};

struct PyramidLevel {
    int index = 0;   // log2(stride)
    int stride = 0;
    Tensor feature;  // (1, C_pyr, H, W)

    std::size_t height() const { return feature.dim(2); }
    std::size_t width() const { return feature.dim(3); }
};

struct LevelSize {
    int index = 0;
    int stride = 0;
    std::size_t height = 0;
    std::size_t width = 0;
};

/// Spatial sizes of every pyramid level for an input image: ceil-halving from
/// the first backbone stage down to 1x1.
std::vector<LevelSize> pyramid_level_sizes(std::size_t image_height, std::size_t image_width);

/// Deep feature pyramid: lateral 1x1 projections of the backbone stages,
/// extension below the coarsest stage until the map is 1x1, then a top-down
/// pass (nearest 2x upsample + lateral add + 3x3 smoothing) over every level.
class FeaturePyramid {
public:
    FeaturePyramid(const std::vector<int>& stage_channels, int pyramid_channels, ExtensionKind extension,
                   ParameterSet& params, ParameterInit& init);

    /// Returns the levels with stride >= min_stride, finest first. Levels
    /// below min_stride still feed the top-down pass but skip smoothing.
    std::vector<PyramidLevel> forward(std::span<const Tensor> stage_maps, int min_stride = 1) const;

    int channels() const { return channels_; }

private:
    int channels_;
    ExtensionKind extension_;
    std::vector<ConvLayer> laterals_;
    ConvLayer extend_;
    ConvLayer smooth_;
};

struct LevelOutput {
    int index = 0;
    int stride = 0;
    Tensor class_logits;  // (1, A*K, H, W), pre-sigmoid
    Tensor box_deltas;    // (1, 4*A, H, W)

    std::size_t height() const { return class_logits.dim(2); }
    std::size_t width() const { return class_logits.dim(3); }
};

/// Classification and box-regression subnets shared across pyramid levels.
class DetectionHeads {
public:
    static constexpr double kPriorProbability = 0.01;

    DetectionHeads(const HeadConfig& config, ParameterSet& params, ParameterInit& init);

    std::vector<LevelOutput> forward(std::span<const PyramidLevel> pyramid) const;
    LevelOutput forward_level(const PyramidLevel& level) const;

    const HeadConfig& config() const { return config_; }

private:
    HeadConfig config_;
    std::vector<ConvLayer> class_tower_;
    ConvLayer class_out_;
    std::vector<ConvLayer> box_tower_;
    ConvLayer box_out_;
};

/// Rearranges per-level (1, A*width, H, W) maps into one (N, width) tensor
/// whose rows follow anchor order: levels in sequence, then cells row-major,
/// then the A anchor shapes.
Tensor gather_anchor_rows(std::span<const Tensor> level_maps, std::size_t anchors_per_location,
                          std::size_t width);

class Detector {
public:
    Detector(ModelManifest manifest, std::uint64_t seed);
    Detector(const Detector&) = delete;
    Detector& operator=(const Detector&) = delete;
    Detector(Detector&&) = default;
    Detector& operator=(Detector&&) = default;

    std::vector<LevelOutput> forward(const Tensor& image) const;

    /// Anchors for the head levels of an image of the given size.
    std::vector<LevelAnchors> anchors(std::size_t image_height, std::size_t image_width) const;

    const ModelManifest& manifest() const { return manifest_; }
    const AnchorConfig& anchor_config() const { return anchor_config_; }
    int num_classes() const { return manifest_.head.num_classes; }

    ParameterSet& parameters() { return params_; }
    const ParameterSet& parameters() const { return params_; }

    const Backbone& backbone() const { return backbone_; }
    const FeaturePyramid& pyramid() const { return pyramid_; }
    const DetectionHeads& heads() const { return heads_; }

    /// Parameters as a checkpoint tagged with the manifest hash.
    Checkpoint to_checkpoint() const;
    /// Copies parameters from a checkpoint. Throws CheckpointError when the
    /// manifest hash, a name, or a shape disagrees.
    void load_checkpoint(const Checkpoint& checkpoint);

private:
    ModelManifest manifest_;
    AnchorConfig anchor_config_;
    ParameterSet params_;
    ParameterInit init_;
    Backbone backbone_;
    FeaturePyramid pyramid_;
    DetectionHeads heads_;
};

}  // namespace dfpn
