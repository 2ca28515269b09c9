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
#include <string>
#include <string_view>
#include <stdexcept>

#include "covis/volume/geometry.hpp"

namespace covis {

/// Cross-section plane in dataset-local millimetres. When enabled, the half-space
/// the normal points into is cut away.
struct PlaneState {
  Vec3 point{};
  Vec3 normal{0.0, 0.0, 1.0};
  bool enabled{false};

  bool operator==(const PlaneState&) const = default;

  bool valid() const { return std::abs(norm(normal) - 1.0) <= kUnitTolerance; }
};

enum class RegionShape { box, sphere };
enum class RegionMode { inclusive, exclusive };

inline std::string_view to_string(RegionShape s) { return s == RegionShape::box ? "box" : "sphere"; }
inline std::string_view to_string(RegionMode m) { return m == RegionMode::inclusive ? "inclusive" : "exclusive"; }

inline RegionShape parse_region_shape(std::string_view s) {
  if (s == "box") return RegionShape::box;
  if (s == "sphere") return RegionShape::sphere;
  throw std::invalid_argument("unknown region shape '" + std::string(s) + "'");
}

inline RegionMode parse_region_mode(std::string_view s) {
  if (s == "inclusive") return RegionMode::inclusive;
  if (s == "exclusive") return RegionMode::exclusive;
  throw std::invalid_argument("unknown region mode '" + std::string(s) + "'");
}

/// Box or sphere cutout. Spheres use only pose.position and radius; boxes use the
/// full pose and half_extents.
struct Region {
  RegionShape shape{RegionShape::box};
  Pose pose{};
  Vec3 half_extents{1.0, 1.0, 1.0};
  double radius{1.0};
  RegionMode mode{RegionMode::exclusive};
  bool enabled{true};

  static Region box(const Pose& pose, const Vec3& half_extents, RegionMode mode) {
    Region r;
    r.shape = RegionShape::box;
    r.pose = pose;
    r.half_extents = half_extents;
    r.mode = mode;
    return r;
  }

  static Region sphere(const Vec3& center, double radius, RegionMode mode) {
    Region r;
    r.shape = RegionShape::sphere;
    r.pose.position = center;
    r.radius = radius;
    r.mode = mode;
    return r;
  }

  bool operator==(const Region& o) const {
    if (shape != o.shape || mode != o.mode || enabled != o.enabled) return false;
    if (shape == RegionShape::sphere) return pose.position == o.pose.position && radius == o.radius;
    return pose == o.pose && half_extents == o.half_extents;
  }

  bool valid() const {
    if (shape == RegionShape::sphere) return radius > 0.0 && std::isfinite(radius);
    return pose.valid() && half_extents.x > 0.0 && half_extents.y > 0.0 && half_extents.z > 0.0;
  }
};

/// Linear intensity ramp centred at `level` spanning `width`, in normalised units.
struct WindowLevel {
  double width{1.0};
  double level{0.5};

  bool operator==(const WindowLevel&) const = default;

  bool valid() const { return width > 0.0 && std::isfinite(width) && std::isfinite(level); }
};

}  // namespace covis
