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

#ifndef FAIREXPR_IMAGE_HPP_
#define FAIREXPR_IMAGE_HPP_

#include <cstddef>
#include <filesystem>
#include <vector>

namespace fairexpr {

/// Interleaved (HWC) float image with values nominally in [0, 1].
struct Image {
  int height = 0;
  int width = 0;
  int channels = 3;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0F)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c), fill) {}

  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) *
               static_cast<std::size_t>(channels) +
           static_cast<std::size_t>(c);
  }
  float& at(int y, int x, int c) noexcept { return pixels[index(y, x, c)]; }
  float at(int y, int x, int c) const noexcept { return pixels[index(y, x, c)]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Decodes any format OpenCV understands into an RGB image scaled to [0, 1].
Image read_image(const std::filesystem::path& path);

/// Writes an 8-bit lossless PNG (values are rounded from [0, 1] to 0..255).
void write_png(const std::filesystem::path& path, const Image& image);

/// Bilinear resize to side x side.
Image resize_bilinear(const Image& image, int side);

/// Rounds every pixel to the nearest multiple of 1/255, the value an 8-bit
/// encode/decode cycle reproduces.
Image quantize_8bit(const Image& image);

}  // namespace fairexpr

#endif  // FAIREXPR_IMAGE_HPP_
