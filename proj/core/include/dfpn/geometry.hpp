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

namespace dfpn {

/// Axis-aligned box in pixel coordinates, (x1, y1) inclusive top-left and
/// (x2, y2) exclusive bottom-right.
struct Box {
    double x1 = 0.0;
    double y1 = 0.0;
    double x2 = 0.0;
    double y2 = 0.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double center_x() const { return x1 + 0.5 * width(); }
    double center_y() const { return y1 + 0.5 * height(); }
    bool valid() const { return x2 >= x1 && y2 >= y1; }
    bool degenerate() const { return !(width() > 0.0 && height() > 0.0); }

    static Box from_center(double cx, double cy, double w, double h) {
        return {cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h};
    }

    bool operator==(const Box&) const = default;
};

/// Faster R-CNN style offsets of a box relative to an anchor.
struct BoxDelta {
    double tx = 0.0;
    double ty = 0.0;
    double tw = 0.0;
    double th = 0.0;

    bool operator==(const BoxDelta&) const = default;
};

/// Largest log-scale accepted by decode() before exponentiation.
inline constexpr double kMaxLogScale = 50.0;

/// Intersection over union; 0 when either box is degenerate.
double iou(const Box& a, const Box& b);

/// tx = (x - xa) / wa, ty = (y - ya) / ha, tw = ln(w / wa), th = ln(h / ha).
/// Throws std::invalid_argument on a non-positive gt or anchor size.
BoxDelta encode(const Box& gt, const Box& anchor);

/// Inverse of encode(). tw/th are clamped to kMaxLogScale before exp.
Box decode(const BoxDelta& delta, const Box& anchor);

Box clip(const Box& box, double width, double height);

}  // namespace dfpn
