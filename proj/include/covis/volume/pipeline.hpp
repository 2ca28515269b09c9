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
#include <span>
#include <variant>
#include <vector>

#include "covis/volume/cutout.hpp"
#include "covis/volume/intensity.hpp"
#include "covis/volume/sampling.hpp"
#include "covis/volume/volume.hpp"

namespace covis {

struct AxisSliceSpec {
  SliceAxis axis{SliceAxis::axial};
  int index{0};
};

struct ObliqueSliceSpec {
  Vec3 center{};
  Vec3 normal{0.0, 0.0, 1.0};
  std::array<double, 2> extent_mm{};
  std::array<int, 2> resolution{2, 2};
};

using SliceSpec = std::variant<AxisSliceSpec, ObliqueSliceSpec>;

/// Scalar slice plus the dataset-local position of every pixel.
struct SampledSlice {
  Image2D image;
  std::vector<Vec3> points;
};

inline SampledSlice sample_slice(const Volume& v, const SliceSpec& spec) {
  SampledSlice out;
  if (const auto* a = std::get_if<AxisSliceSpec>(&spec)) {
    out.image = extract_axis_slice(v, a->axis, a->index);
    out.points.reserve(out.image.pixel_count());
    for (int r = 0; r < out.image.height; ++r)
      for (int c = 0; c < out.image.width; ++c) {
        const auto ijk = axis_slice_voxel(a->axis, a->index, r, c);
        out.points.push_back(v.world(ijk[0], ijk[1], ijk[2]));
      }
  } else {
    const auto& o = std::get<ObliqueSliceSpec>(spec);
    const ObliqueGrid grid = make_oblique_grid(o.center, o.normal, o.extent_mm, o.resolution);
    out.image = Image2D::scalar(o.resolution[0], o.resolution[1]);
    out.points.reserve(out.image.pixel_count());
    for (int r = 0; r < o.resolution[1]; ++r)
      for (int c = 0; c < o.resolution[0]; ++c) {
        const Vec3 p = grid.point(r, c);
        out.image.value(r, c) = static_cast<float>(sample_trilinear(v, v.to_voxel(p)));
        out.points.push_back(p);
      }
  }
  return out;
}

/// slice -> visibility mask -> window/level -> colormap. Hidden pixels come out as
/// RGB (0,0,0).
inline Image2D masked_slice(const Volume& v, const SliceSpec& spec, const WindowLevel& wl, const Colormap& cm,
                            const PlaneState& plane, std::span<const Region> regions) {
  const SampledSlice s = sample_slice(v, spec);
  Image2D rgb = apply_colormap(apply_window_level(s.image, wl), cm);
  for (int r = 0; r < rgb.height; ++r)
    for (int c = 0; c < rgb.width; ++c)
      if (!visible(s.points[static_cast<std::size_t>(r) * rgb.width + c], plane, regions))
        rgb.set_pixel(r, c, {0, 0, 0});
  return rgb;
}

}  // namespace covis
