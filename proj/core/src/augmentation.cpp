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

#include "fairexpr/augmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "fairexpr/errors.hpp"

namespace fairexpr {

void AugmentConfig::validate(int input_side) const {
  if (crop_size <= 0) throw ValidationError("augment: crop_size must be positive");
  if (crop_size > input_side) {
    throw ValidationError("augment: crop_size " + std::to_string(crop_size) + " exceeds input side " +
                          std::to_string(input_side));
  }
  if (rotation_min_degrees > rotation_max_degrees) throw ValidationError("augment: empty rotation range");
  if (mirror_probability < 0.0 || mirror_probability > 1.0) {
    throw ValidationError("augment: mirror_probability outside [0, 1]");
  }
  if (blend_weight < 0.0 || blend_weight > 1.0) throw ValidationError("augment: blend_weight outside [0, 1]");
}

GeometryParams draw_geometry(const Image& image, Rng& rng, const AugmentConfig& cfg) {
  cfg.validate(std::min(image.height, image.width));
  GeometryParams p;
  p.offset_x = static_cast<int>(rng.uniform_int(0, image.width - cfg.crop_size));
  p.offset_y = static_cast<int>(rng.uniform_int(0, image.height - cfg.crop_size));
  p.angle_degrees = rng.uniform(cfg.rotation_min_degrees, cfg.rotation_max_degrees);
  p.mirror = rng.bernoulli(cfg.mirror_probability);
  return p;
}

Image crop(const Image& image, int x, int y, int size) {
  if (x < 0 || y < 0 || size <= 0 || x + size > image.width || y + size > image.height) {
    throw ValidationError("crop: window outside image");
  }
  Image out(size, size, image.channels);
  const auto row = static_cast<std::size_t>(size) * static_cast<std::size_t>(image.channels);
  for (int r = 0; r < size; ++r) {
    const auto* src = &image.pixels[image.index(y + r, x, 0)];
    std::copy(src, src + row, &out.pixels[out.index(r, 0, 0)]);
  }
  return out;
}

Image center_crop(const Image& image, int size) {
  if (size > image.width || size > image.height) throw ValidationError("center_crop: size exceeds image");
  return crop(image, (image.width - size) / 2, (image.height - size) / 2, size);
}

Image rotate(const Image& image, double degrees) {
  if (degrees == 0.0) return image;
  Image out(image.height, image.width, image.channels);
  const double theta = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double cx = (image.width - 1) / 2.0;
  const double cy = (image.height - 1) / 2.0;
  const auto clamp_x = [&](int v) { return std::clamp(v, 0, image.width - 1); };
  const auto clamp_y = [&](int v) { return std::clamp(v, 0, image.height - 1); };
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      // Inverse map: output pixel samples the source at R(-theta) * (p - c) + c.
      const double dx = x - cx;
      const double dy = y - cy;
      const double sx = c * dx + s * dy + cx;
      const double sy = -s * dx + c * dy + cy;
      const double fx = std::floor(sx);
      const double fy = std::floor(sy);
      const double ax = sx - fx;
      const double ay = sy - fy;
      const int x0 = clamp_x(static_cast<int>(fx));
      const int x1 = clamp_x(static_cast<int>(fx) + 1);
      const int y0 = clamp_y(static_cast<int>(fy));
      const int y1 = clamp_y(static_cast<int>(fy) + 1);
      for (int ch = 0; ch < image.channels; ++ch) {
        const double v = (1 - ay) * ((1 - ax) * image.at(y0, x0, ch) + ax * image.at(y0, x1, ch)) +
                         ay * ((1 - ax) * image.at(y1, x0, ch) + ax * image.at(y1, x1, ch));
        out.at(y, x, ch) = static_cast<float>(v);
      }
    }
  }
  return out;
}

Image mirror_horizontal(const Image& image) {
  Image out(image.height, image.width, image.channels);
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int ch = 0; ch < image.channels; ++ch) out.at(y, image.width - 1 - x, ch) = image.at(y, x, ch);
    }
  }
  return out;
}

Image apply_geometry(const Image& image, const GeometryParams& params, int crop_size) {
  Image out = crop(image, params.offset_x, params.offset_y, crop_size);
  out = rotate(out, params.angle_degrees);
  if (params.mirror) out = mirror_horizontal(out);
  for (auto& v : out.pixels) v = std::clamp(v, 0.0F, 1.0F);
  return out;
}

Image strategy_one(const Image& image, Rng& rng, const AugmentConfig& cfg) {
  const auto params = draw_geometry(image, rng, cfg);
  return apply_geometry(image, params, cfg.crop_size);
}

Image strategy_two(const Image& image) {
  Image out = image;
  const std::size_t n = static_cast<std::size_t>(image.height) * static_cast<std::size_t>(image.width);
  if (n == 0) return out;
  std::vector<int> level(n);
  for (int ch = 0; ch < image.channels; ++ch) {
    std::array<std::size_t, 256> hist{};
    for (std::size_t i = 0; i < n; ++i) {
      const float v = std::clamp(image.pixels[i * static_cast<std::size_t>(image.channels) + static_cast<std::size_t>(ch)], 0.0F, 1.0F);
      level[i] = static_cast<int>(std::lround(v * 255.0F));
      ++hist[static_cast<std::size_t>(level[i])];
    }
    std::array<std::size_t, 256> cdf{};
    std::size_t running = 0;
    std::size_t cdf_min = 0;
    for (std::size_t v = 0; v < 256; ++v) {
      running += hist[v];
      cdf[v] = running;
      if (cdf_min == 0 && running > 0) cdf_min = running;
    }
    if (cdf_min == n) continue;  // single occupied level
    const double denom = static_cast<double>(n - cdf_min);
    std::array<float, 256> lut{};
    for (std::size_t v = 0; v < 256; ++v) {
      const double scaled = cdf[v] >= cdf_min ? static_cast<double>(cdf[v] - cdf_min) / denom : 0.0;
      lut[v] = static_cast<float>(std::round(scaled * 255.0) / 255.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
      out.pixels[i * static_cast<std::size_t>(image.channels) + static_cast<std::size_t>(ch)] =
          lut[static_cast<std::size_t>(level[i])];
    }
  }
  return out;
}

Image augment(const Image& image, Rng& rng, const AugmentConfig& cfg) {
  if (!cfg.enabled) return eval_transform(image, cfg);
  const Image geometric = strategy_one(image, rng, cfg);
  const Image equalized = strategy_two(geometric);
  const float w = static_cast<float>(cfg.blend_weight);
  Image out = geometric;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) {
    out.pixels[i] = std::clamp(w * geometric.pixels[i] + (1.0F - w) * equalized.pixels[i], 0.0F, 1.0F);
  }
  return out;
}

Image eval_transform(const Image& image, const AugmentConfig& cfg) {
  cfg.validate(std::min(image.height, image.width));
  return center_crop(image, cfg.crop_size);
}

}  // namespace fairexpr
