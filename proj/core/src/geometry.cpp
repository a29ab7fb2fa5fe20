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

#include "dfpn/geometry.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dfpn {

double iou(const Box& a, const Box& b) {
    if (a.degenerate() || b.degenerate()) return 0.0;
    const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
    const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
    if (iw <= 0.0 || ih <= 0.0) return 0.0;
    const double inter = iw * ih;
    const double uni = a.area() + b.area() - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

BoxDelta encode(const Box& gt, const Box& anchor) {
    if (!(anchor.width() > 0.0 && anchor.height() > 0.0)) {
        throw std::invalid_argument("encode: anchor must have positive size");
    }
    if (!(gt.width() > 0.0 && gt.height() > 0.0)) {
        throw std::invalid_argument("encode: ground-truth box must have positive size");
    }
    const double aw = anchor.width(), ah = anchor.height();
    return {(gt.center_x() - anchor.center_x()) / aw, (gt.center_y() - anchor.center_y()) / ah,
            std::log(gt.width() / aw), std::log(gt.height() / ah)};
}

Box decode(const BoxDelta& delta, const Box& anchor) {
    if (!(anchor.width() > 0.0 && anchor.height() > 0.0)) {
        throw std::invalid_argument("decode: anchor must have positive size");
    }
    double tw = delta.tw, th = delta.th;
    if (tw > kMaxLogScale || th > kMaxLogScale) {
        SPDLOG_DEBUG("decode: clamping log-scale ({}, {}) to {}", tw, th, kMaxLogScale);
        tw = std::min(tw, kMaxLogScale);
        th = std::min(th, kMaxLogScale);
    }
    const double aw = anchor.width(), ah = anchor.height();
    const double cx = anchor.center_x() + delta.tx * aw;
    const double cy = anchor.center_y() + delta.ty * ah;
    return Box::from_center(cx, cy, aw * std::exp(tw), ah * std::exp(th));
}

Box clip(const Box& box, double width, double height) {
    return {std::clamp(box.x1, 0.0, width), std::clamp(box.y1, 0.0, height), std::clamp(box.x2, 0.0, width),
            std::clamp(box.y2, 0.0, height)};
}

}  // namespace dfpn
