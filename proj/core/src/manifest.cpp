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

#include "dfpn/manifest.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dfpn {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string join(const std::vector<int>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

int to_int(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("manifest: '" + key + "' expects an integer, got '" + value + "'");
    }
}

}  // namespace

std::string to_string(BackboneKind kind) {
    switch (kind) {
        case BackboneKind::TinyPlain: return "tiny-plain";
        case BackboneKind::TinyResidual: return "tiny-residual";
        case BackboneKind::TinyDepthwise: return "tiny-depthwise";
    }
    return "unknown";
}

std::string to_string(ExtensionKind kind) {
    return kind == ExtensionKind::StridedConv ? "strided-conv" : "max-pool";
}

BackboneKind parse_backbone_kind(const std::string& text) {
    for (auto k : {BackboneKind::TinyPlain, BackboneKind::TinyResidual, BackboneKind::TinyDepthwise})
        if (to_string(k) == text) return k;
    throw std::invalid_argument("unknown backbone kind '" + text + "'");
}

ExtensionKind parse_extension_kind(const std::string& text) {
    for (auto k : {ExtensionKind::StridedConv, ExtensionKind::MaxPool})
        if (to_string(k) == text) return k;
    throw std::invalid_argument("unknown extension kind '" + text + "'");
}

void BackboneConfig::validate() const {
    if (stage_channels.size() < 3) throw std::invalid_argument("backbone needs at least 3 stages");
    if (stage_strides.size() != stage_channels.size())
        throw std::invalid_argument("backbone stage_strides and stage_channels differ in length");
    if (std::any_of(stage_strides.begin(), stage_strides.end(), [](int s) { return s != 2; }))
        throw std::invalid_argument("backbone stages must each have stride 2");
    if (std::any_of(stage_channels.begin(), stage_channels.end(), [](int c) { return c <= 0; }))
        throw std::invalid_argument("backbone stage channels must be positive");
    if (input_channels <= 0) throw std::invalid_argument("input_channels must be positive");
}

void HeadConfig::validate() const {
    if (anchors_per_location <= 0 || num_classes <= 0 || pyramid_channels <= 0 || depth < 0)
        throw std::invalid_argument("head config values must be positive");
}

void ModelManifest::validate() const {
    backbone.validate();
    head.validate();
    if (head_min_stride < 2 || (head_min_stride & (head_min_stride - 1)) != 0)
        throw std::invalid_argument("head_min_stride must be a power of two >= 2");
}

std::string ModelManifest::to_text() const {
    std::ostringstream os;
    os << "format = dfpn-manifest-1\n"
       << "backbone = " << to_string(backbone.kind) << '\n'
       << "input_channels = " << backbone.input_channels << '\n'
       << "stage_channels = " << join(backbone.stage_channels) << '\n'
       << "stage_strides = " << join(backbone.stage_strides) << '\n'
       << "pyramid_channels = " << head.pyramid_channels << '\n'
       << "extension = " << to_string(extension) << '\n'
       << "head_min_stride = " << head_min_stride << '\n'
       << "head_depth = " << head.depth << '\n'
       << "anchors_per_location = " << head.anchors_per_location << '\n'
       << "num_classes = " << head.num_classes << '\n';
    return os.str();
}

ModelManifest ModelManifest::from_text(const std::string& text) {
    std::istringstream in(text);
    const auto kv = parse_key_values(in);
    ModelManifest m;
    for (const auto& [key, value] : kv) {
        if (key == "format") {
            if (value != "dfpn-manifest-1") throw std::invalid_argument("unsupported manifest format '" + value + "'");
        } else if (key == "backbone") {
            m.backbone.kind = parse_backbone_kind(value);
        } else if (key == "input_channels") {
            m.backbone.input_channels = to_int(key, value);
        } else if (key == "stage_channels") {
            m.backbone.stage_channels = parse_int_list(value);
        } else if (key == "stage_strides") {
            m.backbone.stage_strides = parse_int_list(value);
        } else if (key == "pyramid_channels") {
            m.head.pyramid_channels = to_int(key, value);
        } else if (key == "extension") {
            m.extension = parse_extension_kind(value);
        } else if (key == "head_min_stride") {
            m.head_min_stride = to_int(key, value);
        } else if (key == "head_depth") {
            m.head.depth = to_int(key, value);
        } else if (key == "anchors_per_location") {
            m.head.anchors_per_location = to_int(key, value);
        } else if (key == "num_classes") {
            m.head.num_classes = to_int(key, value);
        } else {
            throw std::invalid_argument("manifest: unknown key '" + key + "'");
        }
    }
    if (m.backbone.stage_strides.size() != m.backbone.stage_channels.size() && !kv.count("stage_strides"))
        m.backbone.stage_strides.assign(m.backbone.stage_channels.size(), 2);
    m.validate();
    return m;
}

ModelManifest ModelManifest::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return from_text(ss.str());
}

void ModelManifest::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest " + path.string());
    out << to_text();
}

std::uint64_t ModelManifest::hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : to_text()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::map<std::string, std::string> parse_key_values(std::istream& in) {
    std::map<std::string, std::string> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("line " + std::to_string(line_no) + ": expected 'key = value'");
        std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw std::invalid_argument("line " + std::to_string(line_no) + ": empty key");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_int("list", trim(item)));
    return out;
}

}  // namespace dfpn
