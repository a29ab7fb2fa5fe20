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

#include <cstddef>
#include <functional>
#include <span>

#include "dfpn/inference.hpp"

namespace dfpn {

struct BenchReport {
    std::size_t warmup = 0;
    std::size_t measured = 0;
    /// Wall-clock time of the measured window only.
    double seconds = 0.0;
    double fps = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
};

/// Calls `frame(i)` for i in [0, warmup + measured). The first `warmup` calls
/// are untimed; fps = measured / wall-clock seconds of the remaining calls.
BenchReport benchmark_fps(const std::function<void(std::size_t)>& frame, std::size_t warmup, std::size_t measured);

/// Runs detect() over `images`, cycling through them.
BenchReport benchmark_detector(const Detector& detector, std::span<const Tensor> images, std::size_t warmup,
                               std::size_t measured, const InferenceConfig& config = {});

/// Linear-interpolated percentile, q in [0, 100].
double percentile(std::vector<double> values, double q);

}  // namespace dfpn
