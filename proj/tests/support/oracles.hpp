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

// Reference implementations written independently of the library code they check.

#include <array>
#include <cmath>

#include "covis/volume/scene.hpp"
#include "covis/volume/volume.hpp"

namespace covis::testing {

// Explicit sum over the eight cell corners, each weighted by the product of its
// per-axis weights. Points outside [0, n-1] on any axis read as 0.
inline double trilinear_oracle(const Volume& v, double x, double y, double z) {
  const double p[3] = {x, y, z};
  int i0[3];
  int i1[3];
  double t[3];
  for (int a = 0; a < 3; ++a) {
    const int n = v.dims[a];
    if (p[a] < 0.0 || p[a] > n - 1) return 0.0;
    i0[a] = static_cast<int>(std::floor(p[a]));
    i1[a] = i0[a] + 1 < n ? i0[a] + 1 : i0[a];
    t[a] = p[a] - i0[a];
  }
  double sum = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    int idx[3];
    for (int a = 0; a < 3; ++a) {
      const bool hi = (corner >> a) & 1;
      w *= hi ? t[a] : 1.0 - t[a];
      idx[a] = hi ? i1[a] : i0[a];
    }
    sum += w * v.data[static_cast<std::size_t>(idx[0]) +
                      static_cast<std::size_t>(v.dims[0]) *
                          (static_cast<std::size_t>(idx[1]) + static_cast<std::size_t>(v.dims[1]) * idx[2])];
  }
  return sum;
}

using Mat3 = std::array<std::array<double, 3>, 3>;

// Rotation matrix of a unit quaternion (w, x, y, z).
inline Mat3 rotation_matrix(const Quat& q) {
  const double w = q.w, x = q.x, y = q.y, z = q.z;
  return {{{1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)},
           {2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)},
           {2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)}}};
}

inline Vec3 mat_mul(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v.x + m[0][1] * v.y + m[0][2] * v.z, m[1][0] * v.x + m[1][1] * v.y + m[1][2] * v.z,
          m[2][0] * v.x + m[2][1] * v.y + m[2][2] * v.z};
}

inline Vec3 mat_mul_transposed(const Mat3& m, const Vec3& v) {
  return {m[0][0] * v.x + m[1][0] * v.y + m[2][0] * v.z, m[0][1] * v.x + m[1][1] * v.y + m[2][1] * v.z,
          m[0][2] * v.x + m[1][2] * v.y + m[2][2] * v.z};
}

// Signed slack of the box test: positive inside, negative outside. The point is
// taken into the box frame with R^T (p - c) / s.
inline double box_slack_oracle(const Region& r, const Vec3& p) {
  const Vec3 d{p.x - r.pose.position.x, p.y - r.pose.position.y, p.z - r.pose.position.z};
  const Vec3 local = mat_mul_transposed(rotation_matrix(r.pose.rotation), d);
  const double s = r.pose.scale;
  return std::min({r.half_extents.x - std::abs(local.x / s), r.half_extents.y - std::abs(local.y / s),
                   r.half_extents.z - std::abs(local.z / s)});
}

}  // namespace covis::testing
