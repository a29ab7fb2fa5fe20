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

#include "dfpn/data.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "dfpn/image_io.hpp"

namespace dfpn {

namespace {

struct Rgb {
    double r, g, b;
};

Rgb base_color(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Disc: return {0.85, 0.20, 0.20};
        case ShapeKind::Square: return {0.20, 0.80, 0.25};
        case ShapeKind::Triangle: return {0.20, 0.30, 0.90};
    }
    return {1.0, 1.0, 1.0};
}

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

bool boxes_overlap(const Box& a, const Box& b) {
    return std::min(a.x2, b.x2) > std::max(a.x1, b.x1) && std::min(a.y2, b.y2) > std::max(a.y1, b.y1);
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

}  // namespace

std::string to_string(ShapeKind kind) {
    switch (kind) {
        case ShapeKind::Disc: return "disc";
        case ShapeKind::Square: return "square";
        case ShapeKind::Triangle: return "triangle";
    }
    return "unknown";
}

ShapeKind parse_shape_kind(const std::string& text) {
    for (auto k : {ShapeKind::Disc, ShapeKind::Square, ShapeKind::Triangle})
        if (to_string(k) == text) return k;
    throw std::invalid_argument("unknown shape kind '" + text + "'");
}

void SyntheticConfig::validate() const {
    if (classes.empty()) throw std::invalid_argument("synthetic: at least one shape class is required");
    if (min_object_size < 4) throw std::invalid_argument("synthetic: objects must be at least 4 px");
    if (min_object_size > max_object_size) throw std::invalid_argument("synthetic: min_object_size > max_object_size");
    if (max_object_size > image_size) {
        throw std::invalid_argument("synthetic: objects of " + std::to_string(max_object_size) +
                                    " px cannot fit in a " + std::to_string(image_size) + " px image");
    }
    if (min_objects > max_objects) throw std::invalid_argument("synthetic: min_objects > max_objects");
    if (!(noise >= 0.0)) throw std::invalid_argument("synthetic: noise must be non-negative");
}

int SyntheticConfig::num_classes() const {
    int top = 0;
    for (auto k : classes) top = std::max(top, static_cast<int>(k));
    return top + 1;
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    auto lo = [](std::uint64_t v) { return static_cast<std::uint32_t>(v & 0xffffffffu); };
    auto hi = [](std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); };
    std::seed_seq seq{lo(seed), hi(seed), lo(a), hi(a), lo(b), hi(b)};
    return std::mt19937_64(seq);
}

std::vector<bool> render_shape_mask(ShapeKind kind, const Box& box, std::size_t height, std::size_t width) {
    std::vector<bool> mask(height * width, false);
    const double cx = box.center_x(), cy = box.center_y();
    const double r = 0.5 * box.width();
    for (std::size_t y = 0; y < height; ++y) {
        const double py = static_cast<double>(y) + 0.5;
        if (py < box.y1 || py > box.y2) continue;
        for (std::size_t x = 0; x < width; ++x) {
            const double px = static_cast<double>(x) + 0.5;
            bool inside = false;
            switch (kind) {
                case ShapeKind::Disc:
                    inside = (px - cx) * (px - cx) + (py - cy) * (py - cy) <= r * r;
                    break;
                case ShapeKind::Square:
                    inside = px > box.x1 && px < box.x2;
                    break;
                case ShapeKind::Triangle: {
                    // Apex at the top centre; each pixel row uses the width at its lower edge.
                    const double row_bottom = static_cast<double>(y) + 1.0 - box.y1;
                    const double half = 0.5 * box.width() * row_bottom / box.height();
                    const double xl = static_cast<double>(x);
                    inside = xl < cx + half && xl + 1.0 > cx - half;
                    break;
                }
            }
            mask[y * width + x] = inside;
        }
    }
    return mask;
}

std::vector<Sample> generate_synthetic(const SyntheticConfig& config, std::size_t n, std::size_t first_index) {
    config.validate();
    if (n < 1) throw std::invalid_argument("synthetic: n must be at least 1");
    const std::size_t s = config.image_size;
    const std::size_t plane = s * s;

    std::vector<Sample> samples;
    samples.reserve(n);
    for (std::size_t idx = first_index; idx < first_index + n; ++idx) {
        auto rng = make_rng(config.seed, idx);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        auto uniform_int = [&](std::size_t lo, std::size_t hi) {
            return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
        };

        Sample sample;
        sample.image_id = "synthetic_" + std::to_string(idx);
        std::vector<double> pixels(3 * plane);
        const std::array<double, 3> tint{0.35 + 0.2 * unit(rng), 0.35 + 0.2 * unit(rng), 0.35 + 0.2 * unit(rng)};
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < plane; ++i) pixels[c * plane + i] = tint[c] + config.noise * (2.0 * unit(rng) - 1.0);

        const std::size_t wanted = uniform_int(config.min_objects, config.max_objects);
        for (std::size_t o = 0; o < wanted; ++o) {
            const ShapeKind kind = config.classes[uniform_int(0, config.classes.size() - 1)];
            std::size_t size = uniform_int(config.min_object_size, config.max_object_size);
            if (kind == ShapeKind::Disc) size -= size % 2;
            std::optional<Box> placed;
            for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
                const auto x1 = static_cast<double>(uniform_int(0, s - size));
                const auto y1 = static_cast<double>(uniform_int(0, s - size));
                const Box candidate{x1, y1, x1 + static_cast<double>(size), y1 + static_cast<double>(size)};
                const bool clear = std::none_of(sample.annotations.begin(), sample.annotations.end(),
                                                [&](const Annotation& a) { return boxes_overlap(a.box, candidate); });
                if (clear) placed = candidate;
            }
            if (!placed) {
                spdlog::debug("synthetic: placed {} of {} objects in {} (no free space)", sample.annotations.size(),
                             wanted, sample.image_id);
                break;
            }
            const Rgb base = base_color(kind);
            const std::array<double, 3> color{base.r + 0.16 * (unit(rng) - 0.5), base.g + 0.16 * (unit(rng) - 0.5),
                                              base.b + 0.16 * (unit(rng) - 0.5)};
            const auto mask = render_shape_mask(kind, *placed, s, s);
            for (std::size_t i = 0; i < plane; ++i) {
                if (!mask[i]) continue;
                for (std::size_t c = 0; c < 3; ++c) pixels[c * plane + i] = color[c] + 0.5 * config.noise * (2.0 * unit(rng) - 1.0);
            }
            sample.annotations.push_back({sample.image_id, *placed, static_cast<int>(kind), false});
        }
        for (double& v : pixels) v = quantize(v);
        sample.image = Tensor::from_values({1, 3, s, s}, std::move(pixels));
        samples.push_back(std::move(sample));
    }
    return samples;
}

std::optional<Annotation> parse_visdrone_line(const std::string& line, const std::string& image_id) {
    std::vector<int> fields;
    std::stringstream ss(line);
    std::string item;
    try {
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) continue;
            std::size_t used = 0;
            fields.push_back(std::stoi(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        }
    } catch (const std::exception&) {
        spdlog::warn("visdrone {}: skipping unparsable line '{}'", image_id, line);
        return std::nullopt;
    }
    if (fields.size() < 6) {
        spdlog::warn("visdrone {}: skipping line with {} fields: '{}'", image_id, fields.size(), line);
        return std::nullopt;
    }
    const int left = fields[0], top = fields[1], w = fields[2], h = fields[3], category = fields[5];
    if (w <= 0 || h <= 0) {
        spdlog::warn("visdrone {}: skipping box with non-positive size '{}'", image_id, line);
        return std::nullopt;
    }
    Annotation a;
    a.image_id = image_id;
    a.box = {static_cast<double>(left), static_cast<double>(top), static_cast<double>(left + w),
             static_cast<double>(top + h)};
    a.class_id = category;
    a.ignore = category == 0;
    return a;
}

std::vector<Annotation> read_visdrone_annotations(const std::filesystem::path& path, const std::string& image_id) {
    std::ifstream in(path);
    if (!in) {
        spdlog::warn("visdrone: missing annotation file {}", path.string());
        return {};
    }
    std::vector<Annotation> out;
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        if (auto a = parse_visdrone_line(line, image_id)) out.push_back(std::move(*a));
    }
    return out;
}

void write_visdrone_annotations(const std::filesystem::path& path, const std::vector<Annotation>& annotations) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write annotations " + path.string());
    for (const auto& a : annotations) {
        out << std::lround(a.box.x1) << ',' << std::lround(a.box.y1) << ',' << std::lround(a.box.width()) << ','
            << std::lround(a.box.height()) << ',' << (a.ignore ? 0 : 1) << ',' << (a.ignore ? 0 : a.class_id)
            << ",0,0\n";
    }
}

std::vector<Sample> load_visdrone_annotations(const std::filesystem::path& image_dir,
                                              const std::filesystem::path& annotation_dir) {
    if (!std::filesystem::is_directory(image_dir)) {
        throw std::invalid_argument("image directory " + image_dir.string() + " does not exist");
    }
    std::vector<std::filesystem::path> images;
    for (const auto& entry : std::filesystem::directory_iterator(image_dir)) {
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (entry.is_regular_file() && (ext == ".jpg" || ext == ".jpeg" || ext == ".png")) images.push_back(entry.path());
    }
    std::sort(images.begin(), images.end());

    std::vector<Sample> samples;
    for (const auto& path : images) {
        Sample s;
        s.image_id = path.stem().string();
        s.image = read_image(path);
        const double w = static_cast<double>(s.width()), h = static_cast<double>(s.height());
        for (auto& a : read_visdrone_annotations(annotation_dir / (s.image_id + ".txt"), s.image_id)) {
            const Box clipped = clip(a.box, w, h);
            if (clipped != a.box) {
                spdlog::warn("visdrone {}: clipped box ({}, {}, {}, {}) to the image", s.image_id, a.box.x1, a.box.y1,
                             a.box.x2, a.box.y2);
                if (clipped.degenerate()) continue;
                a.box = clipped;
            }
            s.annotations.push_back(std::move(a));
        }
        samples.push_back(std::move(s));
    }
    return samples;
}

void write_dataset(const std::filesystem::path& root, const std::vector<Sample>& samples) {
    std::filesystem::create_directories(root / "images");
    std::filesystem::create_directories(root / "annotations");
    for (const auto& s : samples) {
        write_png(root / "images" / (s.image_id + ".png"), s.image);
        write_visdrone_annotations(root / "annotations" / (s.image_id + ".txt"), s.annotations);
    }
}

Sample horizontal_flip(const Sample& sample) {
    const std::size_t c = sample.image.dim(1), h = sample.height(), w = sample.width();
    const auto src = sample.image.values();
    std::vector<double> dst(src.size());
    for (std::size_t p = 0; p < c * h; ++p)
        for (std::size_t x = 0; x < w; ++x) dst[p * w + x] = src[p * w + (w - 1 - x)];

    Sample out;
    out.image_id = sample.image_id;
    out.image = Tensor::from_values(sample.image.shape(), std::move(dst));
    const double width = static_cast<double>(w);
    for (auto a : sample.annotations) {
        a.box = {width - a.box.x2, a.box.y1, width - a.box.x1, a.box.y2};
        out.annotations.push_back(std::move(a));
    }
    return out;
}

}  // namespace dfpn
