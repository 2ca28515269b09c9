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

#include <cmath>
#include <stdexcept>

namespace covis {

struct Vec3 {
  double x{0.0};
  double y{0.0};
  double z{0.0};

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
  constexpr bool operator==(const Vec3&) const = default;

  constexpr double operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
};

constexpr Vec3 operator*(double s, const Vec3& v) { return v * s; }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 normalized(const Vec3& v) {
  const double n = norm(v);
  if (n == 0.0) throw std::domain_error("cannot normalize a zero vector");
  return v / n;
}

// Unit quaternion, scalar first.
struct Quat {
  double w{1.0};
  double x{0.0};
  double y{0.0};
  double z{0.0};

  constexpr bool operator==(const Quat&) const = default;

  static Quat from_axis_angle(const Vec3& axis, double radians) {
    const Vec3 a = normalized(axis);
    const double s = std::sin(radians / 2.0);
    return {std::cos(radians / 2.0), a.x * s, a.y * s, a.z * s};
  }
};

inline double norm(const Quat& q) { return std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z); }

constexpr Quat conjugate(const Quat& q) { return {q.w, -q.x, -q.y, -q.z}; }

constexpr Quat operator*(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

// v' = q v q*, expanded to avoid building the pure quaternion.
constexpr Vec3 rotate(const Quat& q, const Vec3& v) {
  const Vec3 u{q.x, q.y, q.z};
  const Vec3 t = 2.0 * cross(u, v);
  return v + q.w * t + cross(u, t);
}

inline Quat normalized(const Quat& q) {
  const double n = norm(q);
  if (n == 0.0) throw std::domain_error("cannot normalize a zero quaternion");
  return {q.w / n, q.x / n, q.y / n, q.z / n};
}

// Normalized linear interpolation; takes the short arc.
inline Quat nlerp(const Quat& a, Quat b, double t) {
  const double d = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
  if (d < 0.0) b = {-b.w, -b.x, -b.y, -b.z};
  return normalized(Quat{a.w + (b.w - a.w) * t, a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t,
                         a.z + (b.z - a.z) * t});
}

inline constexpr double kUnitTolerance = 1e-6;

/// Rigid transform plus uniform scale. Maps local coordinates to the parent frame as
/// position + rotation * (scale * local).
struct Pose {
  Vec3 position{};
  Quat rotation{};
  double scale{1.0};

  bool operator==(const Pose&) const = default;

  bool valid() const {
    return std::abs(norm(rotation) - 1.0) <= kUnitTolerance && scale > 0.0 && std::isfinite(scale);
  }

  Vec3 apply(const Vec3& local) const { return position + rotate(rotation, local * scale); }

  Vec3 apply_inverse(const Vec3& parent) const {
    return rotate(conjugate(rotation), parent - position) / scale;
  }
};

}  // namespace covis
