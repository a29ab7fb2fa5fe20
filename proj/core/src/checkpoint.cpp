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

#include "dfpn/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace dfpn {

namespace {

constexpr char kMagic[8] = {'D', 'F', 'P', 'N', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::string& out, T value) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(bytes), std::end(bytes));
    out.append(reinterpret_cast<const char*>(bytes), sizeof(T));
}

class Reader {
public:
    explicit Reader(const std::string& bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        unsigned char raw[sizeof(T)];
        std::memcpy(raw, bytes_.data() + pos_, sizeof(T));
        if constexpr (std::endian::native == std::endian::big) std::reverse(std::begin(raw), std::end(raw));
        pos_ += sizeof(T);
        T value;
        std::memcpy(&value, raw, sizeof(T));
        return value;
    }

    std::string get_bytes(std::size_t n) {
        need(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
    }

    const std::string& bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

const NamedTensor* Checkpoint::find(const std::string& name) const {
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const NamedTensor& t) { return t.name == name; });
    return it == tensors.end() ? nullptr : &*it;
}

std::string encode_checkpoint(const Checkpoint& checkpoint) {
    std::string out(kMagic, sizeof(kMagic));
    put<std::uint32_t>(out, Checkpoint::kFormatVersion);
    put<std::uint64_t>(out, checkpoint.tag);
    put<std::uint64_t>(out, checkpoint.tensors.size());
    for (const auto& t : checkpoint.tensors) {
        if (shape_numel(t.shape) != t.values.size()) {
            throw CheckpointError("tensor '" + t.name + "' has inconsistent shape");
        }
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
        out += t.name;
        put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
        for (std::size_t e : t.shape) put<std::uint64_t>(out, e);
        for (double v : t.values) put<double>(out, v);
    }
    return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
    Reader in(bytes);
    if (in.get_bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
        throw CheckpointError("not a checkpoint file (bad magic)");
    }
    const auto version = in.get<std::uint32_t>();
    if (version != Checkpoint::kFormatVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.tag = in.get<std::uint64_t>();
    const auto count = in.get<std::uint64_t>();
    for (std::uint64_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = in.get_bytes(in.get<std::uint32_t>());
        const auto rank = in.get<std::uint32_t>();
        for (std::uint32_t r = 0; r < rank; ++r) t.shape.push_back(static_cast<std::size_t>(in.get<std::uint64_t>()));
        const std::size_t n = shape_numel(t.shape);
        if (n > bytes.size() / sizeof(double)) throw CheckpointError("checkpoint truncated");
        t.values.resize(n);
        for (double& v : t.values) v = in.get<double>();
        ckpt.tensors.push_back(std::move(t));
    }
    if (!in.done()) throw CheckpointError("trailing bytes after checkpoint payload");
    return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    const std::string bytes = encode_checkpoint(checkpoint);
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw CheckpointError("cannot open " + tmp + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw CheckpointError("failed writing " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace dfpn
