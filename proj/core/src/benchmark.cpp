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

#include "dfpn/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace dfpn {

double percentile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BenchReport benchmark_fps(const std::function<void(std::size_t)>& frame, std::size_t warmup, std::size_t measured) {
    if (measured < 1) throw std::invalid_argument("benchmark: need at least one measured frame");
    using Clock = std::chrono::steady_clock;
    for (std::size_t i = 0; i < warmup; ++i) frame(i);

    std::vector<double> latencies_ms;
    latencies_ms.reserve(measured);
    const auto start = Clock::now();
    auto last = start;
    for (std::size_t i = 0; i < measured; ++i) {
        frame(warmup + i);
        const auto now = Clock::now();
        latencies_ms.push_back(std::chrono::duration<double, std::milli>(now - last).count());
        last = now;
    }

    BenchReport report;
    report.warmup = warmup;
    report.measured = measured;
    report.seconds = std::chrono::duration<double>(last - start).count();
    report.fps = report.seconds > 0.0 ? static_cast<double>(measured) / report.seconds : 0.0;
    report.p50_ms = percentile(latencies_ms, 50.0);
    report.p95_ms = percentile(latencies_ms, 95.0);
    return report;
}

BenchReport benchmark_detector(const Detector& detector, std::span<const Tensor> images, std::size_t warmup,
                               std::size_t measured, const InferenceConfig& config) {
    if (images.empty()) throw std::invalid_argument("benchmark: no images");
    return benchmark_fps([&](std::size_t i) { (void)detect(images[i % images.size()], detector, config); }, warmup,
                         measured);
}

}  // namespace dfpn
