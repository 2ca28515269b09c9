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
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "covis/volume/geometry.hpp"
#include "covis/volume/scene.hpp"
#include "covis/volume/volume.hpp"

namespace covis {

// Coordinates this close to a grid line are snapped onto it, so grids built from
// millimetre arithmetic hit voxel centres exactly.
inline constexpr double kGridSnap = 1e-9;

/// Trilinear interpolation at a continuous voxel coordinate. Any coordinate outside
/// [0, n-1] on some axis samples the 0.0 background.
inline double sample_trilinear(const Volume& v, const Vec3& p) {
  std::array<int, 3> lo{};
  std::array<double, 3> t{};
  for (int a = 0; a < 3; ++a) {
    double c = p[a];
    if (const double r = std::round(c); std::abs(c - r) < kGridSnap) c = r;
    const int n = v.dims[a];
    if (!(c >= 0.0 && c <= static_cast<double>(n - 1))) return 0.0;
    if (n == 1) {
      lo[a] = 0;
      t[a] = 0.0;
      continue;
    }
    int i = static_cast<int>(std::floor(c));
    if (i > n - 2) i = n - 2;
    lo[a] = i;
    t[a] = c - i;
  }
  auto corner = [&](int dx, int dy, int dz) -> double {
    const int i = std::min(lo[0] + dx, v.dims[0] - 1);
    const int j = std::min(lo[1] + dy, v.dims[1] - 1);
    const int k = std::min(lo[2] + dz, v.dims[2] - 1);
    return v.at(i, j, k);
  };
  const double c00 = corner(0, 0, 0) * (1 - t[0]) + corner(1, 0, 0) * t[0];
  const double c10 = corner(0, 1, 0) * (1 - t[0]) + corner(1, 1, 0) * t[0];
  const double c01 = corner(0, 0, 1) * (1 - t[0]) + corner(1, 0, 1) * t[0];
  const double c11 = corner(0, 1, 1) * (1 - t[0]) + corner(1, 1, 1) * t[0];
  const double c0 = c00 * (1 - t[1]) + c10 * t[1];
  const double c1 = c01 * (1 - t[1]) + c11 * t[1];
  return c0 * (1 - t[2]) + c1 * t[2];
}

// sagittal fixes i, coronal fixes j, axial fixes k.
enum class SliceAxis { sagittal = 0, coronal = 1, axial = 2 };

inline std::string_view to_string(SliceAxis a) {
  switch (a) {
    case SliceAxis::sagittal: return "sagittal";
    case SliceAxis::coronal: return "coronal";
    case SliceAxis::axial: return "axial";
  }
  return "?";
}

inline SliceAxis parse_slice_axis(std::string_view s) {
  if (s == "sagittal") return SliceAxis::sagittal;
  if (s == "coronal") return SliceAxis::coronal;
  if (s == "axial") return SliceAxis::axial;
  throw std::invalid_argument("unknown slice axis '" + std::string(s) + "'");
}

/// Voxel grid coordinates of pixel (row, col) of an axis slice.
inline std::array<int, 3> axis_slice_voxel(SliceAxis axis, int index, int row, int col) {
  switch (axis) {
    case SliceAxis::axial: return {col, row, index};
    case SliceAxis::coronal: return {col, index, row};
    case SliceAxis::sagittal: return {index, col, row};
  }
  return {0, 0, 0};
}

/// (cols, rows) of an axis slice.
inline std::pair<int, int> axis_slice_size(const Volume& v, SliceAxis axis) {
  switch (axis) {
    case SliceAxis::axial: return {v.dims[0], v.dims[1]};
    case SliceAxis::coronal: return {v.dims[0], v.dims[2]};
    case SliceAxis::sagittal: return {v.dims[1], v.dims[2]};
  }
  return {0, 0};
}

inline Image2D extract_axis_slice(const Volume& v, SliceAxis axis, int index) {
  const int n = v.dims[static_cast<int>(axis)];
  if (index < 0 || index >= n)
    throw std::out_of_range(std::string(to_string(axis)) + " slice index " + std::to_string(index) +
                            " outside [0, " + std::to_string(n) + ")");
  const auto [cols, rows] = axis_slice_size(v, axis);
  Image2D img = Image2D::scalar(cols, rows);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const auto ijk = axis_slice_voxel(axis, index, r, c);
      img.value(r, c) = v.at(ijk[0], ijk[1], ijk[2]);
    }
  return img;
}

/// Orthonormal in-plane basis: u = normalize(n x a), w = n x u, where a is +z unless
/// the normal is within ~25 degrees of it, then +y.
inline std::pair<Vec3, Vec3> in_plane_basis(const Vec3& normal) {
  const Vec3 a = std::abs(dot(normal, Vec3{0, 0, 1})) > 0.9 ? Vec3{0, 1, 0} : Vec3{0, 0, 1};
  const Vec3 u = normalized(cross(normal, a));
  const Vec3 w = cross(normal, u);
  return {u, w};
}

/// Sampling grid of an oblique slice in dataset-local millimetres. The grid spans
/// `extent_mm` edge-sample to edge-sample, centred on `center`. Columns advance
/// along -u and rows along -w, so a +z normal lays out like the axial slice.
struct ObliqueGrid {
  Vec3 center;
  Vec3 u;
  Vec3 w;
  std::array<double, 2> extent_mm{};
  std::array<int, 2> resolution{};

  Vec3 point(int row, int col) const {
    const double cu = extent_mm[0] / 2.0 - col * (extent_mm[0] / (resolution[0] - 1));
    const double cw = extent_mm[1] / 2.0 - row * (extent_mm[1] / (resolution[1] - 1));
    return center + u * cu + w * cw;
  }
};

inline ObliqueGrid make_oblique_grid(const Vec3& center, const Vec3& normal, std::array<double, 2> extent_mm,
                                     std::array<int, 2> resolution) {
  if (resolution[0] < 2 || resolution[1] < 2)
    throw std::invalid_argument("oblique slice resolution must be at least 2x2");
  if (std::abs(norm(normal) - 1.0) > kUnitTolerance) throw std::invalid_argument("plane normal must be unit length");
  if (!(extent_mm[0] >= 0.0 && extent_mm[1] >= 0.0)) throw std::invalid_argument("slice extent must be >= 0");
  const auto [u, w] = in_plane_basis(normal);
  return {center, u, w, extent_mm, resolution};
}

inline Image2D extract_oblique_slice(const Volume& v, const Vec3& center, const Vec3& normal,
                                     std::array<double, 2> extent_mm, std::array<int, 2> resolution) {
  const ObliqueGrid grid = make_oblique_grid(center, normal, extent_mm, resolution);
  Image2D img = Image2D::scalar(resolution[0], resolution[1]);
  for (int r = 0; r < resolution[1]; ++r)
    for (int c = 0; c < resolution[0]; ++c)
      img.value(r, c) = static_cast<float>(sample_trilinear(v, v.to_voxel(grid.point(r, c))));
  return img;
}

inline Image2D extract_oblique_slice(const Volume& v, const PlaneState& plane, std::array<double, 2> extent_mm,
                                     std::array<int, 2> resolution) {
  return extract_oblique_slice(v, plane.point, plane.normal, extent_mm, resolution);
}

}  // namespace covis
