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
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dfpn/eval.hpp"
#include "dfpn/tensor.hpp"

namespace dfpn {

/// An image (1, 3, H, W) with values in [0, 1] and its annotations.
struct Sample {
    std::string image_id;
    Tensor image;
    std::vector<Annotation> annotations;

    std::size_t height() const { return image.dim(2); }
    std::size_t width() const { return image.dim(3); }
};

/// Synthetic object kinds. The enumerator value is the class id; 0 is kept
/// free because the on-disk annotation format reserves category 0 for
/// ignored regions.
enum class ShapeKind { Disc = 1, Square = 2, Triangle = 3 };

std::string to_string(ShapeKind kind);
ShapeKind parse_shape_kind(const std::string& text);

struct SyntheticConfig {
    std::size_t image_size = 64;
    std::vector<ShapeKind> classes{ShapeKind::Disc, ShapeKind::Square, ShapeKind::Triangle};
    std::size_t min_objects = 1;
    std::size_t max_objects = 2;
    /// Object side lengths in pixels (disc diameters are rounded down to even).
    std::size_t min_object_size = 24;
    std::size_t max_object_size = 36;
    /// Half-width of the uniform background noise.
    double noise = 0.08;
    std::uint64_t seed = 7;

    void validate() const;
    /// Largest class id produced plus one, i.e. the head class count needed.
    int num_classes() const;
};

/// Samples `first_index` .. `first_index + n - 1`. Each sample has its own RNG
/// stream derived from (seed, index), so any index range is reproducible.
/// Pixel values are multiples of 1/255 so PNG storage is lossless.
std::vector<Sample> generate_synthetic(const SyntheticConfig& config, std::size_t n, std::size_t first_index = 0);

/// Pixels covered by a rendered shape, row-major H x W.
std::vector<bool> render_shape_mask(ShapeKind kind, const Box& box, std::size_t height, std::size_t width);

/// One VisDrone annotation line:
/// bbox_left,bbox_top,bbox_width,bbox_height,score,object_category,truncation,occlusion
/// Category 0 becomes an ignored region. Returns nullopt (with a warning) for
/// unparsable lines and non-positive sizes.
std::optional<Annotation> parse_visdrone_line(const std::string& line, const std::string& image_id);

std::vector<Annotation> read_visdrone_annotations(const std::filesystem::path& path, const std::string& image_id);
void write_visdrone_annotations(const std::filesystem::path& path, const std::vector<Annotation>& annotations);

/// Loads every .jpg/.jpeg/.png in `image_dir` (sorted by name) with the
/// matching `<stem>.txt` from `annotation_dir`. Boxes are clipped to the image.
std::vector<Sample> load_visdrone_annotations(const std::filesystem::path& image_dir,
                                              const std::filesystem::path& annotation_dir);

/// Writes `images/<id>.png` and `annotations/<id>.txt` under `root`.
void write_dataset(const std::filesystem::path& root, const std::vector<Sample>& samples);

/// Mirrors the image about its vertical axis; (x1, y1, x2, y2) -> (W-x2, y1, W-x1, y2).
Sample horizontal_flip(const Sample& sample);

/// Deterministic generator for (seed, a, b) streams.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace dfpn
