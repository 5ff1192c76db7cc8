// Copyright 2026 The fairexpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "fairexpr/image.hpp"

#include <algorithm>
#include <cmath>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "fairexpr/errors.hpp"

namespace fairexpr {
namespace {

cv::Mat to_mat(const Image& image) {
  cv::Mat mat(image.height, image.width, CV_32FC(image.channels));
  std::copy(image.pixels.begin(), image.pixels.end(), mat.ptr<float>());
  return mat;
}

Image from_mat(const cv::Mat& mat) {
  Image image(mat.rows, mat.cols, mat.channels());
  cv::Mat contiguous = mat.isContinuous() ? mat : mat.clone();
  const float* src = contiguous.ptr<float>();
  std::copy(src, src + image.pixels.size(), image.pixels.begin());
  return image;
}

}  // namespace

Image read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot decode image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  if (!rgb.isContinuous()) rgb = rgb.clone();
  // Same expression as quantize_8bit so 8-bit round trips are exact.
  Image image(rgb.rows, rgb.cols, 3);
  const unsigned char* src = rgb.ptr<unsigned char>();
  for (std::size_t i = 0; i < image.pixels.size(); ++i) image.pixels[i] = static_cast<float>(src[i]) / 255.0F;
  return image;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels != 3 && image.channels != 1) {
    throw ValidationError("write_png: expected 1 or 3 channels");
  }
  cv::Mat bytes(image.height, image.width, image.channels == 3 ? CV_8UC3 : CV_8UC1);
  auto* dst = bytes.ptr<unsigned char>();
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const float v = std::clamp(image.pixels[i], 0.0F, 1.0F);
    dst[i] = static_cast<unsigned char>(std::lround(v * 255.0F));
  }
  if (image.channels == 3) cv::cvtColor(bytes, bytes, cv::COLOR_RGB2BGR);
  if (!cv::imwrite(path.string(), bytes)) throw IoError("cannot write image " + path.string());
}

Image resize_bilinear(const Image& image, int side) {
  if (side <= 0) throw ValidationError("resize_bilinear: side must be positive");
  if (image.height == side && image.width == side) return image;
  cv::Mat out;
  cv::resize(to_mat(image), out, cv::Size(side, side), 0, 0, cv::INTER_LINEAR);
  return from_mat(out);
}

Image quantize_8bit(const Image& image) {
  Image out = image;
  for (auto& v : out.pixels) {
    v = static_cast<float>(std::lround(std::clamp(v, 0.0F, 1.0F) * 255.0F)) / 255.0F;
  }
  return out;
}

}  // namespace fairexpr
