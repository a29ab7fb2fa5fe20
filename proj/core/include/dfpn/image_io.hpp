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

#include <filesystem>
#include <span>

#include "dfpn/inference.hpp"
#include "dfpn/tensor.hpp"

namespace dfpn {

/// Reads a PNG/JPEG as a (1, 3, H, W) RGB tensor in [0, 1].
Tensor read_image(const std::filesystem::path& path);

/// Writes a (1, 3, H, W) tensor in [0, 1] as an 8-bit RGB PNG.
void write_png(const std::filesystem::path& path, const Tensor& image);

/// Writes the image with detection boxes overlaid as a PNG.
void write_annotated_png(const std::filesystem::path& path, const Tensor& image,
                         std::span<const Detection> detections);

}  // namespace dfpn
