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
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "covis/volume/geometry.hpp"
#include "covis/volume/volume.hpp"

namespace covis {

enum class DefectKind { missing_strut, broken_strut, thin_strut, pore, dross };

inline std::string_view to_string(DefectKind k) {
  switch (k) {
    case DefectKind::missing_strut: return "missing_strut";
    case DefectKind::broken_strut: return "broken_strut";
    case DefectKind::thin_strut: return "thin_strut";
    case DefectKind::pore: return "pore";
    case DefectKind::dross: return "dross";
  }
  return "?";
}

inline DefectKind parse_defect_kind(std::string_view s) {
  for (auto k : {DefectKind::missing_strut, DefectKind::broken_strut, DefectKind::thin_strut, DefectKind::pore,
                 DefectKind::dross})
    if (to_string(k) == s) return k;
  throw std::invalid_argument("unknown defect kind '" + std::string(s) + "'");
}

inline constexpr int kOctetStrutsPerCell = 36;

struct DefectSpec {
  DefectKind kind{DefectKind::missing_strut};
  std::array<int, 3> cell{};
  int strut{0};  // [0, kOctetStrutsPerCell)
  double magnitude{1.0};
};

struct LatticeParams {
  std::array<int, 3> cells{1, 1, 1};
  int cell_size_vox{32};
  double strut_radius_vox{2.5};
  std::vector<DefectSpec> defects;
};

namespace lattice_detail {

// Integer point on the doubled grid: a cell of L voxels spans 2L units and voxel i
// has its centre at 2i + 1, so every node and voxel centre is an integer.
using IPoint = std::array<std::int64_t, 3>;

struct Segment {
  IPoint a;
  IPoint b;
};

inline std::array<IPoint, 6> face_centers(std::int64_t s) {
  const std::int64_t h = s / 2;
  return {{{0, h, h}, {s, h, h}, {h, 0, h}, {h, s, h}, {h, h, 0}, {h, h, s}}};
}

// Struts 0..23 join each face centre (faces ordered -x,+x,-y,+y,-z,+z) to the four
// corners of that face; struts 24..35 are the octahedron edges between face
// centres on different axes.
inline std::array<Segment, kOctetStrutsPerCell> cell_struts(std::int64_t s) {
  std::array<Segment, kOctetStrutsPerCell> out{};
  const auto fc = face_centers(s);
  int n = 0;
  for (int f = 0; f < 6; ++f) {
    const int axis = f / 2;
    const int u = (axis + 1) % 3;
    const int v = (axis + 2) % 3;
    for (int c = 0; c < 4; ++c) {
      IPoint corner{};
      corner[axis] = (f % 2) * s;
      corner[u] = (c & 1) * s;
      corner[v] = ((c >> 1) & 1) * s;
      out[n++] = {fc[f], corner};
    }
  }
  for (int f1 = 0; f1 < 6; ++f1)
    for (int f2 = f1 + 1; f2 < 6; ++f2)
      if (f1 / 2 != f2 / 2) out[n++] = {fc[f1], fc[f2]};
  return out;
}

inline std::int64_t idot(const IPoint& p, const IPoint& q) { return p[0] * q[0] + p[1] * q[1] + p[2] * q[2]; }
inline IPoint isub(const IPoint& p, const IPoint& q) { return {p[0] - q[0], p[1] - q[1], p[2] - q[2]}; }

// Squared distance test, exact in integers: compares dist^2 * |d|^2 against r^2 * |d|^2.
inline bool within_capsule(const IPoint& p, const Segment& s, double radius2) {
  const IPoint d = isub(s.b, s.a);
  const IPoint w = isub(p, s.a);
  const std::int64_t den = idot(d, d);
  const std::int64_t t = idot(w, d);
  if (t <= 0) return static_cast<double>(idot(w, w)) <= radius2;
  if (t >= den) {
    const IPoint e = isub(p, s.b);
    return static_cast<double>(idot(e, e)) <= radius2;
  }
  const std::int64_t num = idot(w, w) * den - t * t;
  return static_cast<double>(num) <= radius2 * static_cast<double>(den);
}

inline Vec3 to_vec(const IPoint& p) {
  return {static_cast<double>(p[0]), static_cast<double>(p[1]), static_cast<double>(p[2])};
}

inline bool within_capsule(const Vec3& p, const Vec3& a, const Vec3& b, double radius2) {
  const Vec3 d = b - a;
  const double den = dot(d, d);
  double t = den > 0.0 ? dot(p - a, d) / den : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const Vec3 e = p - (a + d * t);
  return dot(e, e) <= radius2;
}

struct Bounds {
  std::array<int, 3> lo;
  std::array<int, 3> hi;  // inclusive
};

// Voxels whose doubled centres 2i+1 fall within [lo, hi].
inline Bounds voxel_bounds(const Vec3& lo, const Vec3& hi, const Dims& dims) {
  Bounds b{};
  for (int a = 0; a < 3; ++a) {
    b.lo[a] = std::max(0, static_cast<int>(std::ceil((lo[a] - 1.0) / 2.0)));
    b.hi[a] = std::min(dims[a] - 1, static_cast<int>(std::floor((hi[a] - 1.0) / 2.0)));
  }
  return b;
}

template <typename Fn>
void for_each_voxel(const Bounds& b, Fn&& fn) {
  for (int k = b.lo[2]; k <= b.hi[2]; ++k)
    for (int j = b.lo[1]; j <= b.hi[1]; ++j)
      for (int i = b.lo[0]; i <= b.hi[0]; ++i) fn(i, j, k);
}

struct StrutState {
  Segment seg;
  IPoint cell_center;
  double radius;     // doubled units
  double gap{0.0};   // fraction removed from the middle
  bool removed{false};
};

}  // namespace lattice_detail

/// Voxelised octet-truss lattice. Every strut is a capsule of the given radius;
/// a voxel is 1.0 when its centre lies within any capsule. Struts shared between
/// neighbouring cells are the same strut, so a defect on one affects both cells.
inline Volume generate_octet_lattice(const LatticeParams& params) {
  using namespace lattice_detail;
  const auto& cells = params.cells;
  const int cell = params.cell_size_vox;
  const double r = params.strut_radius_vox;
  for (int c : cells)
    if (c < 1) throw std::invalid_argument("lattice needs at least one cell per axis");
  if (cell < 8) throw std::invalid_argument("cell size must be >= 8 voxels");
  if (!(r > 0.0 && r < cell / 2.0)) throw std::invalid_argument("strut radius must be in (0, cell_size/2)");

  const Dims dims{cells[0] * cell, cells[1] * cell, cells[2] * cell};
  Volume vol(dims, {1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}, DType::u8);

  const std::int64_t s = 2 * static_cast<std::int64_t>(cell);
  const auto local = cell_struts(s);
  const double radius = 2.0 * r;

  // Unique struts keyed by sorted endpoints; map iteration order is deterministic.
  std::map<std::pair<IPoint, IPoint>, StrutState> struts;
  auto key_of = [](const Segment& g) { return g.a < g.b ? std::pair{g.a, g.b} : std::pair{g.b, g.a}; };
  auto global = [&](const std::array<int, 3>& c, int n) {
    const IPoint off{c[0] * s, c[1] * s, c[2] * s};
    const Segment& l = local[static_cast<std::size_t>(n)];
    return Segment{{l.a[0] + off[0], l.a[1] + off[1], l.a[2] + off[2]},
                   {l.b[0] + off[0], l.b[1] + off[1], l.b[2] + off[2]}};
  };
  for (int cz = 0; cz < cells[2]; ++cz)
    for (int cy = 0; cy < cells[1]; ++cy)
      for (int cx = 0; cx < cells[0]; ++cx)
        for (int n = 0; n < kOctetStrutsPerCell; ++n) {
          const Segment g = global({cx, cy, cz}, n);
          const IPoint center{cx * s + s / 2, cy * s + s / 2, cz * s + s / 2};
          struts.try_emplace(key_of(g), StrutState{g, center, radius});
        }

  struct Sphere {
    Vec3 center;
    double radius;
  };
  std::vector<Sphere> pores;
  std::vector<Sphere> dross;

  for (const DefectSpec& d : params.defects) {
    for (int a = 0; a < 3; ++a)
      if (d.cell[a] < 0 || d.cell[a] >= cells[a]) throw std::out_of_range("defect cell index out of lattice bounds");
    if (d.strut < 0 || d.strut >= kOctetStrutsPerCell) throw std::out_of_range("defect strut selector out of range");
    if (!(d.magnitude > 0.0 && d.magnitude <= 1.0)) throw std::invalid_argument("defect magnitude must be in (0,1]");
    StrutState& st = struts.at(key_of(global(d.cell, d.strut)));
    const Vec3 a = to_vec(st.seg.a);
    const Vec3 b = to_vec(st.seg.b);
    switch (d.kind) {
      case DefectKind::missing_strut: st.removed = true; break;
      case DefectKind::broken_strut: st.gap = std::max(st.gap, d.magnitude); break;
      case DefectKind::thin_strut: st.radius *= (1.0 - d.magnitude); break;
      case DefectKind::pore: pores.push_back({(a + b) * 0.5, d.magnitude * radius}); break;
      case DefectKind::dross: {
        const double dr = d.magnitude * radius;
        // A blob beside node a, just clear of the junction where other struts
        // meet, on the side of the strut facing the hollow cell interior.
        const Vec3 dir = normalized(b - a);
        const Vec3 foot = a + dir * (2.0 * radius + dr);
        Vec3 toward = to_vec(st.cell_center) - foot;
        toward = toward - dir * dot(toward, dir);
        const Vec3 n = norm(toward) > 0.0 ? normalized(toward) : normalized(cross(dir, Vec3{0, 0, 1}));
        dross.push_back({foot + n * (radius + 0.5 * dr), dr});
        break;
      }
    }
  }

  auto fill = [&](int i, int j, int k) { vol.at(i, j, k) = 1.0f; };
  for (const auto& [key, st] : struts) {
    if (st.removed || st.gap >= 1.0) continue;
    const Vec3 a = to_vec(st.seg.a);
    const Vec3 b = to_vec(st.seg.b);
    const Vec3 lo{std::min(a.x, b.x) - st.radius, std::min(a.y, b.y) - st.radius, std::min(a.z, b.z) - st.radius};
    const Vec3 hi{std::max(a.x, b.x) + st.radius, std::max(a.y, b.y) + st.radius, std::max(a.z, b.z) + st.radius};
    const Bounds bb = voxel_bounds(lo, hi, dims);
    const double r2 = st.radius * st.radius;
    if (st.gap <= 0.0 && st.radius == radius) {
      for_each_voxel(bb, [&](int i, int j, int k) {
        if (within_capsule(IPoint{2 * i + 1, 2 * j + 1, 2 * k + 1}, st.seg, r2)) fill(i, j, k);
      });
      continue;
    }
    const Vec3 d = b - a;
    const Vec3 cut0 = a + d * (0.5 - st.gap / 2.0);
    const Vec3 cut1 = a + d * (0.5 + st.gap / 2.0);
    for_each_voxel(bb, [&](int i, int j, int k) {
      const Vec3 p{2.0 * i + 1, 2.0 * j + 1, 2.0 * k + 1};
      const bool hit = st.gap > 0.0 ? (within_capsule(p, a, cut0, r2) || within_capsule(p, cut1, b, r2))
                                    : within_capsule(p, a, b, r2);
      if (hit) fill(i, j, k);
    });
  }

  auto paint_sphere = [&](const Sphere& sp, float value) {
    const Vec3 ext{sp.radius, sp.radius, sp.radius};
    const double r2 = sp.radius * sp.radius;
    for_each_voxel(voxel_bounds(sp.center - ext, sp.center + ext, dims), [&](int i, int j, int k) {
      const Vec3 e = Vec3{2.0 * i + 1, 2.0 * j + 1, 2.0 * k + 1} - sp.center;
      if (dot(e, e) <= r2) vol.at(i, j, k) = value;
    });
  };
  for (const Sphere& sp : dross) paint_sphere(sp, 1.0f);
  for (const Sphere& sp : pores) paint_sphere(sp, 0.0f);
  return vol;
}

inline std::size_t count_filled(const Volume& v) {
  return static_cast<std::size_t>(std::count_if(v.data.begin(), v.data.end(), [](float f) { return f > 0.5f; }));
}

inline double fill_fraction(const Volume& v) {
  return static_cast<double>(count_filled(v)) / static_cast<double>(v.voxel_count());
}

}  // namespace covis
