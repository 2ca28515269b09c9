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

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "covis/volume/scene.hpp"
#include "covis/volume/volume.hpp"

namespace covis {

/// Window/level ramp: clamp((in - (level - width/2)) / width, 0, 1). At width 1 and
/// level 0.5 the lower edge is exactly 0, so the ramp is the identity bit for bit.
inline double window_level_value(double in, const WindowLevel& wl) {
  return std::clamp((in - (wl.level - wl.width / 2.0)) / wl.width, 0.0, 1.0);
}

inline Image2D apply_window_level(const Image2D& img, const WindowLevel& wl) {
  if (img.kind != ImageKind::scalar_f32) throw std::invalid_argument("window/level needs a scalar image");
  if (!wl.valid()) throw std::invalid_argument("window width must be > 0");
  Image2D out = img;
  for (float& f : out.scalars) f = static_cast<float>(window_level_value(f, wl));
  return out;
}

using Rgb = std::array<std::uint8_t, 3>;

struct Colormap {
  std::string name;
  std::array<Rgb, 256> lut{};

  /// Table index for a normalised value, rounding half up.
  static int index_of(double v) {
    if (std::isnan(v)) return 0;
    return static_cast<int>(std::clamp(std::floor(v * 255.0 + 0.5), 0.0, 255.0));
  }

  Rgb lookup(double v) const { return lut[static_cast<std::size_t>(index_of(v))]; }
};

namespace detail {

struct ColorStop {
  double at;
  double r, g, b;
};

// Piecewise-linear table through the stops, rounded half up.
inline Colormap ramp(std::string name, const std::vector<ColorStop>& stops) {
  Colormap cm;
  cm.name = std::move(name);
  for (int i = 0; i < 256; ++i) {
    const double t = i / 255.0;
    std::size_t s = 0;
    while (s + 2 < stops.size() && t > stops[s + 1].at) ++s;
    const ColorStop& a = stops[s];
    const ColorStop& b = stops[s + 1];
    const double f = std::clamp((t - a.at) / (b.at - a.at), 0.0, 1.0);
    auto mix = [f](double x, double y) {
      return static_cast<std::uint8_t>(std::clamp(std::floor(x + (y - x) * f + 0.5), 0.0, 255.0));
    };
    cm.lut[static_cast<std::size_t>(i)] = {mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
  }
  return cm;
}

}  // namespace detail

inline const Colormap& grayscale_colormap() {
  static const Colormap cm = [] {
    Colormap c;
    c.name = "grayscale";
    for (int i = 0; i < 256; ++i) {
      const auto v = static_cast<std::uint8_t>(i);
      c.lut[static_cast<std::size_t>(i)] = {v, v, v};
    }
    return c;
  }();
  return cm;
}

inline const Colormap& viridis_colormap() {
  static const Colormap cm = detail::ramp("viridis", {{0.0, 68, 1, 84},
                                                      {0.125, 71, 44, 122},
                                                      {0.25, 59, 82, 139},
                                                      {0.375, 44, 113, 142},
                                                      {0.5, 33, 145, 140},
                                                      {0.625, 39, 173, 129},
                                                      {0.75, 92, 200, 99},
                                                      {0.875, 170, 220, 50},
                                                      {1.0, 253, 231, 37}});
  return cm;
}

inline const Colormap& coolwarm_colormap() {
  static const Colormap cm =
      detail::ramp("coolwarm", {{0.0, 59, 76, 192}, {0.5, 221, 221, 221}, {1.0, 180, 4, 38}});
  return cm;
}

inline const std::vector<std::string>& colormap_names() {
  static const std::vector<std::string> names{"coolwarm", "grayscale", "viridis"};
  return names;
}

inline bool is_colormap_name(std::string_view name) {
  const auto& n = colormap_names();
  return std::find(n.begin(), n.end(), name) != n.end();
}

inline const Colormap& colormap_by_name(std::string_view name) {
  if (name == "grayscale") return grayscale_colormap();
  if (name == "viridis") return viridis_colormap();
  if (name == "coolwarm") return coolwarm_colormap();
  throw std::invalid_argument("unknown colormap '" + std::string(name) + "'");
}

inline Image2D apply_colormap(const Image2D& img, const Colormap& cm) {
  if (img.kind != ImageKind::scalar_f32) throw std::invalid_argument("colormap needs a scalar image");
  Image2D out = Image2D::color(img.width, img.height);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) out.set_pixel(r, c, cm.lookup(img.value(r, c)));
  return out;
}

}  // namespace covis
