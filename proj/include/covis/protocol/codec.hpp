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
#include <cstdint>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "covis/volume/geometry.hpp"
#include "covis/volume/intensity.hpp"
#include "covis/volume/scene.hpp"

// JSON forms of the replicated value types. Readers are strict: wrong shapes or
// types throw PayloadError, which the protocol layer turns into bad_payload.
namespace covis::protocol {

using nlohmann::json;

class PayloadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace codec {

inline const json& field(const json& j, const char* key) {
  if (!j.is_object()) throw PayloadError("expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw PayloadError(std::string("missing field '") + key + "'");
  return *it;
}

inline double real(const json& j) {
  if (!j.is_number()) throw PayloadError("expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw PayloadError("non-finite number");
  return v;
}

inline std::int64_t integer(const json& j) {
  if (!j.is_number_integer()) throw PayloadError("expected an integer");
  return j.get<std::int64_t>();
}

inline std::uint64_t unsigned_integer(const json& j) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    throw PayloadError("expected a non-negative integer");
  return j.get<std::uint64_t>();
}

inline bool boolean(const json& j) {
  if (!j.is_boolean()) throw PayloadError("expected a boolean");
  return j.get<bool>();
}

inline const std::string& string(const json& j) {
  if (!j.is_string()) throw PayloadError("expected a string");
  return j.get_ref<const std::string&>();
}

inline const json& array(const json& j, std::size_t n) {
  if (!j.is_array() || j.size() != n) throw PayloadError("expected an array of " + std::to_string(n));
  return j;
}

inline json vec3(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

inline Vec3 read_vec3(const json& j) {
  const auto& a = array(j, 3);
  return {real(a[0]), real(a[1]), real(a[2])};
}

inline json quat(const Quat& q) { return json::array({q.w, q.x, q.y, q.z}); }

inline Quat read_quat(const json& j) {
  const auto& a = array(j, 4);
  return {real(a[0]), real(a[1]), real(a[2]), real(a[3])};
}

inline json pose(const Pose& p) {
  return {{"position", vec3(p.position)}, {"rotation", quat(p.rotation)}, {"scale", p.scale}};
}

inline Pose read_pose(const json& j) {
  Pose p{read_vec3(field(j, "position")), read_quat(field(j, "rotation")), real(field(j, "scale"))};
  if (!p.valid()) throw PayloadError("pose needs a unit quaternion and positive scale");
  return p;
}

inline json plane(const PlaneState& p) {
  return {{"enabled", p.enabled}, {"normal", vec3(p.normal)}, {"point", vec3(p.point)}};
}

inline PlaneState read_plane(const json& j) {
  PlaneState p{read_vec3(field(j, "point")), read_vec3(field(j, "normal")), boolean(field(j, "enabled"))};
  if (!p.valid()) throw PayloadError("plane normal must be unit length");
  return p;
}

inline json region(const Region& r) {
  json j{{"enabled", r.enabled},
         {"mode", std::string(to_string(r.mode))},
         {"shape", std::string(to_string(r.shape))}};
  if (r.shape == RegionShape::sphere) {
    j["center"] = vec3(r.pose.position);
    j["radius"] = r.radius;
  } else {
    j["pose"] = pose(r.pose);
    j["half_extents"] = vec3(r.half_extents);
  }
  return j;
}

inline Region read_region(const json& j) {
  Region r;
  try {
    r.shape = parse_region_shape(string(field(j, "shape")));
    r.mode = parse_region_mode(string(field(j, "mode")));
  } catch (const std::invalid_argument& e) {
    throw PayloadError(e.what());
  }
  r.enabled = boolean(field(j, "enabled"));
  if (r.shape == RegionShape::sphere) {
    r.pose = Pose{};
    r.pose.position = read_vec3(field(j, "center"));
    r.radius = real(field(j, "radius"));
  } else {
    r.pose = read_pose(field(j, "pose"));
    r.half_extents = read_vec3(field(j, "half_extents"));
  }
  if (!r.valid()) throw PayloadError("region extents must be positive");
  return r;
}

inline json window_level(const WindowLevel& wl) { return {{"level", wl.level}, {"width", wl.width}}; }

inline WindowLevel read_window_level(const json& j) {
  WindowLevel wl{real(field(j, "width")), real(field(j, "level"))};
  if (!wl.valid()) throw PayloadError("window width must be > 0");
  return wl;
}

inline json rgb(const Rgb& c) { return json::array({c[0], c[1], c[2]}); }

inline Rgb read_rgb(const json& j) {
  const auto& a = array(j, 3);
  Rgb c{};
  for (int i = 0; i < 3; ++i) {
    const auto v = integer(a[i]);
    if (v < 0 || v > 255) throw PayloadError("color channel outside [0,255]");
    c[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(v);
  }
  return c;
}

}  // namespace codec
}  // namespace covis::protocol
