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

#ifndef FAIREXPR_AUGMENTATION_HPP_
#define FAIREXPR_AUGMENTATION_HPP_

#include "fairexpr/image.hpp"
#include "fairexpr/random.hpp"

namespace fairexpr {

/// Train-time augmentation parameters.
///
/// Geometric augmentation (strategy one) crops a random crop_size window,
/// rotates it by a uniform angle in [rotation_min, rotation_max] degrees and
/// mirrors it horizontally with `mirror_probability`. Strategy two is
/// per-channel histogram equalization. The two are combined pixel-wise as
/// `blend_weight * geometric + (1 - blend_weight) * equalized(geometric)`.
struct AugmentConfig {
  int crop_size = 96;
  double rotation_min_degrees = -15.0;
  double rotation_max_degrees = 15.0;
  double mirror_probability = 0.5;
  double blend_weight = 0.5;
  bool enabled = true;

  /// Throws ValidationError on out-of-range fields or crop_size > input_side.
  void validate(int input_side) const;

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

struct GeometryParams {
  int offset_x = 0;
  int offset_y = 0;
  double angle_degrees = 0.0;
  bool mirror = false;
};

/// Draws offset_x, offset_y, angle, mirror in that order.
GeometryParams draw_geometry(const Image& image, Rng& rng, const AugmentConfig& cfg);

Image crop(const Image& image, int x, int y, int size);
Image center_crop(const Image& image, int size);
/// Rotation about the image centre with bilinear sampling; out-of-bounds
/// samples replicate the nearest edge pixel. A zero angle is an exact copy.
Image rotate(const Image& image, double degrees);
Image mirror_horizontal(const Image& image);

/// mirror(rotate(crop(image))), clamped to [0, 1].
Image apply_geometry(const Image& image, const GeometryParams& params, int crop_size);

Image strategy_one(const Image& image, Rng& rng, const AugmentConfig& cfg);

/// Per-channel histogram equalization over 256 levels. Channels with a
/// single occupied level are returned unchanged.
Image strategy_two(const Image& image);

/// Blend of strategy one and its equalized version; with `enabled == false`
/// this is the deterministic evaluation transform (centre crop only).
Image augment(const Image& image, Rng& rng, const AugmentConfig& cfg);

/// Evaluation-time preprocessing: centre crop to cfg.crop_size.
Image eval_transform(const Image& image, const AugmentConfig& cfg);

}  // namespace fairexpr

#endif  // FAIREXPR_AUGMENTATION_HPP_
