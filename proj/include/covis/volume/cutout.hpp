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

#include <span>

#include "covis/volume/geometry.hpp"
#include "covis/volume/scene.hpp"

namespace covis {

/// Closed containment test in dataset-local millimetres.
inline bool region_contains(const Region& r, const Vec3& p) {
  if (r.shape == RegionShape::sphere) {
    const Vec3 d = p - r.pose.position;
    return dot(d, d) <= r.radius * r.radius;
  }
  const Vec3 local = r.pose.apply_inverse(p);
  return std::abs(local.x) <= r.half_extents.x && std::abs(local.y) <= r.half_extents.y &&
         std::abs(local.z) <= r.half_extents.z;
}

/// A point is hidden when it lies strictly on the positive side of an enabled
/// plane, inside any enabled exclusive region, or outside every enabled inclusive
/// region (when there is at least one).
inline bool visible(const Vec3& p, const PlaneState& plane, std::span<const Region> regions) {
  if (plane.enabled && dot(p - plane.point, plane.normal) > 0.0) return false;
  bool any_inclusive = false;
  bool in_inclusive = false;
  for (const Region& r : regions) {
    if (!r.enabled) continue;
    if (r.mode == RegionMode::exclusive) {
      if (region_contains(r, p)) return false;
    } else {
      any_inclusive = true;
      if (!in_inclusive && region_contains(r, p)) in_inclusive = true;
    }
  }
  return !any_inclusive || in_inclusive;
}

}  // namespace covis
