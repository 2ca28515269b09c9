// Copyright 2026 The covis Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "covis/volume/geometry.hpp"

namespace covis {

enum class DType { u8, u16, f32 };

inline std::string_view to_string(DType t) {
  switch (t) {
    case DType::u8: return "u8";
    case DType::u16: return "u16";
    case DType::f32: return "f32";
  }
  return "?";
}

inline std::size_t dtype_size(DType t) {
  switch (t) {
    case DType::u8: return 1;
    case DType::u16: return 2;
    case DType::f32: return 4;
  }
  return 0;
}

using Dims = std::array<int, 3>;

/// Dense scalar grid, x-fastest, samples at voxel centers. Values live in [0,1]
/// regardless of the on-disk dtype.
struct Volume {
  Dims dims{1, 1, 1};
  Vec3 spacing{1.0, 1.0, 1.0};
  Vec3 origin{};
  DType dtype{DType::f32};
  std::vector<float> data;
  // f32 inputs outside [0,1] that were clamped on load.
  std::size_t clamped_samples{0};

  Volume() : data(1, 0.0f) {}

  Volume(Dims d, Vec3 sp, Vec3 org, DType t)
      : dims(d), spacing(sp), origin(org), dtype(t) {
    validate_shape();
    data.assign(voxel_count(), 0.0f);
  }

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }

  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) *
               (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
  }

  float at(int i, int j, int k) const { return data[index(i, j, k)]; }
  float& at(int i, int j, int k) { return data[index(i, j, k)]; }

  Vec3 world(double i, double j, double k) const {
    return {origin.x + i * spacing.x, origin.y + j * spacing.y, origin.z + k * spacing.z};
  }

  // Continuous voxel coordinate of a dataset-local millimetre position.
  Vec3 to_voxel(const Vec3& mm) const {
    return {(mm.x - origin.x) / spacing.x, (mm.y - origin.y) / spacing.y, (mm.z - origin.z) / spacing.z};
  }

  void validate_shape() const {
    for (int d : dims)
      if (d < 1) throw std::invalid_argument("volume dims must all be >= 1");
    if (!(spacing.x > 0.0 && spacing.y > 0.0 && spacing.z > 0.0))
      throw std::invalid_argument("volume spacing must all be > 0");
  }

  void validate() const {
    validate_shape();
    if (data.size() != voxel_count()) throw std::invalid_argument("volume data length does not match dims");
  }
};

enum class ImageKind { scalar_f32, rgb_u8 };

/// Row-major 2D image. Scalar images keep one float per pixel; RGB images keep
/// three bytes per pixel.
struct Image2D {
  int width{1};
  int height{1};
  ImageKind kind{ImageKind::scalar_f32};
  std::vector<float> scalars;
  std::vector<std::uint8_t> rgb;

  static Image2D scalar(int w, int h) {
    check_size(w, h);
    Image2D img;
    img.width = w;
    img.height = h;
    img.kind = ImageKind::scalar_f32;
    img.scalars.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0.0f);
    return img;
  }

  static Image2D color(int w, int h) {
    check_size(w, h);
    Image2D img;
    img.width = w;
    img.height = h;
    img.kind = ImageKind::rgb_u8;
    img.rgb.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, 0);
    return img;
  }

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }

  float& value(int r, int c) { return scalars[static_cast<std::size_t>(r) * width + c]; }
  float value(int r, int c) const { return scalars[static_cast<std::size_t>(r) * width + c]; }

  std::array<std::uint8_t, 3> pixel(int r, int c) const {
    const std::size_t o = (static_cast<std::size_t>(r) * width + c) * 3;
    return {rgb[o], rgb[o + 1], rgb[o + 2]};
  }

  void set_pixel(int r, int c, std::array<std::uint8_t, 3> px) {
    const std::size_t o = (static_cast<std::size_t>(r) * width + c) * 3;
    rgb[o] = px[0];
    rgb[o + 1] = px[1];
    rgb[o + 2] = px[2];
  }

  bool operator==(const Image2D&) const = default;

 private:
  static void check_size(int w, int h) {
    if (w < 1 || h < 1) throw std::invalid_argument("image dimensions must be >= 1");
  }
};

}  // namespace covis
