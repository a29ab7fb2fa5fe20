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

#include "dfpn/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

namespace dfpn {

namespace {

cv::Mat to_bgr8(const Tensor& image) {
    if (image.rank() != 4 || image.dim(0) != 1 || image.dim(1) != 3) {
        throw ShapeError("expected a (1, 3, H, W) image, got " + shape_to_string(image.shape()));
    }
    const int h = static_cast<int>(image.dim(2)), w = static_cast<int>(image.dim(3));
    const auto v = image.values();
    const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    cv::Mat mat(h, w, CV_8UC3);
    for (int y = 0; y < h; ++y) {
        auto* row = mat.ptr<cv::Vec3b>(y);
        for (int x = 0; x < w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * static_cast<std::size_t>(w) + static_cast<std::size_t>(x);
            for (int c = 0; c < 3; ++c) {
                const double px = std::clamp(v[static_cast<std::size_t>(c) * plane + i], 0.0, 1.0);
                row[x][2 - c] = static_cast<unsigned char>(std::lround(px * 255.0));
            }
        }
    }
    return mat;
}

void write_mat(const std::filesystem::path& path, const cv::Mat& mat) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    if (!cv::imwrite(path.string(), mat)) throw std::runtime_error("failed to write image " + path.string());
}

}  // namespace

Tensor read_image(const std::filesystem::path& path) {
    const cv::Mat mat = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (mat.empty()) throw std::runtime_error("cannot read image " + path.string());
    const auto h = static_cast<std::size_t>(mat.rows), w = static_cast<std::size_t>(mat.cols);
    std::vector<double> values(3 * h * w);
    for (std::size_t y = 0; y < h; ++y) {
        const auto* row = mat.ptr<cv::Vec3b>(static_cast<int>(y));
        for (std::size_t x = 0; x < w; ++x)
            for (std::size_t c = 0; c < 3; ++c) values[(c * h + y) * w + x] = row[x][2 - c] / 255.0;
    }
    return Tensor::from_values({1, 3, h, w}, std::move(values));
}

void write_png(const std::filesystem::path& path, const Tensor& image) { write_mat(path, to_bgr8(image)); }

void write_annotated_png(const std::filesystem::path& path, const Tensor& image,
                         std::span<const Detection> detections) {
    static const std::array<cv::Scalar, 6> palette{cv::Scalar(0, 255, 255), cv::Scalar(255, 0, 255),
                                                   cv::Scalar(255, 255, 0), cv::Scalar(0, 128, 255),
                                                   cv::Scalar(255, 128, 0), cv::Scalar(128, 255, 0)};
    cv::Mat mat = to_bgr8(image);
    for (const auto& d : detections) {
        const cv::Point tl(static_cast<int>(std::lround(d.box.x1)), static_cast<int>(std::lround(d.box.y1)));
        const cv::Point br(static_cast<int>(std::lround(d.box.x2)) - 1, static_cast<int>(std::lround(d.box.y2)) - 1);
        cv::rectangle(mat, tl, br, palette[static_cast<std::size_t>(d.class_id) % palette.size()], 1);
    }
    write_mat(path, mat);
}

}  // namespace dfpn
