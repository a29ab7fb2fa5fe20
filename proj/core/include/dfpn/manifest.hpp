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
#include <istream>
#include <map>
#include <string>
#include <vector>

namespace dfpn {

enum class BackboneKind { TinyPlain, TinyResidual, TinyDepthwise };
enum class ExtensionKind { StridedConv, MaxPool };

std::string to_string(BackboneKind kind);
std::string to_string(ExtensionKind kind);
BackboneKind parse_backbone_kind(const std::string& text);
ExtensionKind parse_extension_kind(const std::string& text);

struct BackboneConfig {
    BackboneKind kind = BackboneKind::TinyPlain;
    int input_channels = 3;
    std::vector<int> stage_channels{16, 32, 64};
    std::vector<int> stage_strides{2, 2, 2};

    void validate() const;
    /// Smallest image side the backbone accepts: 2^(stage count).
    std::size_t min_input_size() const { return std::size_t{1} << stage_channels.size(); }

    bool operator==(const BackboneConfig&) const = default;
};

struct HeadConfig {
    int anchors_per_location = 9;
    int num_classes = 3;
    int pyramid_channels = 64;
    int depth = 4;

    void validate() const;
    int class_depth() const { return anchors_per_location * num_classes; }
    int box_depth() const { return 4 * anchors_per_location; }

    bool operator==(const HeadConfig&) const = default;
};

/// Architecture description stored next to checkpoints, as `key = value` text.
struct ModelManifest {
    BackboneConfig backbone;
    HeadConfig head;
    ExtensionKind extension = ExtensionKind::StridedConv;
    /// Heads run on pyramid levels whose stride is at least this value.
    int head_min_stride = 8;

    void validate() const;
    std::string to_text() const;
    static ModelManifest from_text(const std::string& text);
    static ModelManifest load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    /// FNV-1a over the canonical text form.
    std::uint64_t hash() const;

    bool operator==(const ModelManifest&) const = default;
};

/// Parses `key = value` lines; `#` starts a comment. Duplicate keys: last wins.
std::map<std::string, std::string> parse_key_values(std::istream& in);
std::vector<int> parse_int_list(const std::string& text);

}  // namespace dfpn
