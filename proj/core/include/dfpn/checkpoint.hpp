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
#include <string>
#include <vector>

#include "dfpn/tensor.hpp"

namespace dfpn {

struct NamedTensor {
    std::string name;
    Shape shape;
    std::vector<double> values;
};

/// Versioned binary parameter file.
///
/// Layout, all integers little-endian:
///   8 bytes  magic "DFPNCKPT"
///   u32      format version (currently 1)
///   u64      tag (architecture manifest hash; 0 when unused)
///   u64      tensor count
///   per tensor: u32 name length, name bytes, u32 rank, u64 extents[rank],
///               float64 values[product(extents)]
struct Checkpoint {
    static constexpr std::uint32_t kFormatVersion = 1;

    std::uint64_t tag = 0;
    std::vector<NamedTensor> tensors;

    const NamedTensor* find(const std::string& name) const;
};

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace dfpn
