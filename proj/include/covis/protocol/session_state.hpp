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
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "covis/protocol/codec.hpp"
#include "covis/volume/volume.hpp"

namespace covis::protocol {

enum class Role { participant, spectator };

inline std::string_view to_string(Role r) { return r == Role::participant ? "participant" : "spectator"; }

inline std::optional<Role> parse_role(std::string_view s) {
  if (s == "participant") return Role::participant;
  if (s == "spectator") return Role::spectator;
  return std::nullopt;
}

/// Replicated object identifier: one of the fixed singletons or "cutout:<n>".
struct EntityRef {
  enum class Kind { dataset_transform, plane, cutout, window_level, axis_slices, colormap };

  Kind kind{Kind::plane};
  int index{0};  // cutouts only

  bool operator==(const EntityRef&) const = default;

  bool lockable() const { return kind == Kind::dataset_transform || kind == Kind::plane || kind == Kind::cutout; }

  // Pose-valued entities are the lockable ones; their updates may be coalesced.
  bool pose_valued() const { return lockable(); }

  std::string str() const {
    switch (kind) {
      case Kind::dataset_transform: return "dataset_transform";
      case Kind::plane: return "plane";
      case Kind::cutout: return "cutout:" + std::to_string(index);
      case Kind::window_level: return "window_level";
      case Kind::axis_slices: return "axis_slices";
      case Kind::colormap: return "colormap";
    }
    return {};
  }

  static std::optional<EntityRef> parse(std::string_view s) {
    if (s == "dataset_transform") return EntityRef{Kind::dataset_transform};
    if (s == "plane") return EntityRef{Kind::plane};
    if (s == "window_level") return EntityRef{Kind::window_level};
    if (s == "axis_slices") return EntityRef{Kind::axis_slices};
    if (s == "colormap") return EntityRef{Kind::colormap};
    constexpr std::string_view prefix = "cutout:";
    if (s.substr(0, prefix.size()) == prefix) {
      const auto digits = s.substr(prefix.size());
      if (digits.empty() || digits.size() > 9) return std::nullopt;
      if (digits.size() > 1 && digits[0] == '0') return std::nullopt;
      int n = 0;
      const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), n);
      if (ec != std::errc{} || end != digits.data() + digits.size() || n < 0) return std::nullopt;
      return EntityRef{Kind::cutout, n};
    }
    return std::nullopt;
  }
};

struct BoardPoint {
  double u{0.0};
  double v{0.0};

  bool operator==(const BoardPoint&) const = default;
};

/// Polyline annotation. Points may only be appended while incomplete.
template <typename Point>
struct BasicStroke {
  std::string id;
  std::string author;
  Rgb color{};
  double width_mm{1.0};
  std::vector<Point> points;
  bool complete{false};

  bool operator==(const BasicStroke&) const = default;
};

using Stroke = BasicStroke<Vec3>;
using BoardStroke = BasicStroke<BoardPoint>;

struct Presence {
  std::string user_id;
  std::string display_name;
  Role role{Role::participant};
  Pose head_pose{};
  bool speaking{false};
  Rgb color{};

  bool operator==(const Presence&) const = default;
};

struct DatasetInfo {
  std::string dataset_id;
  Dims dims{1, 1, 1};
  Vec3 spacing_mm{1.0, 1.0, 1.0};

  bool operator==(const DatasetInfo&) const = default;
};

/// The authoritative replicated document of one room.
struct SessionState {
  std::optional<DatasetInfo> dataset;
  Pose dataset_transform{};
  PlaneState plane{};
  std::vector<Region> cutouts;
  WindowLevel window_level{};
  std::array<int, 3> axis_slices{0, 0, 0};
  std::string colormap_name{"grayscale"};
  std::map<std::string, Stroke> strokes;
  std::map<std::string, BoardStroke> board_strokes;
  std::map<std::string, Presence> presence;
  std::map<std::string, std::string> locks;       // entity id -> user id
  std::map<std::string, std::uint64_t> seqs;      // entity id -> last applied seq

  bool operator==(const SessionState&) const = default;

  bool has_entity(const EntityRef& e) const {
    return e.kind != EntityRef::Kind::cutout || (e.index >= 0 && static_cast<std::size_t>(e.index) < cutouts.size());
  }

  const Presence* find_presence(const std::string& user) const {
    const auto it = presence.find(user);
    return it == presence.end() ? nullptr : &it->second;
  }

  const std::string* lock_holder(const std::string& entity) const {
    const auto it = locks.find(entity);
    return it == locks.end() ? nullptr : &it->second;
  }
};

/// Fixed 8-colour palette for per-user default stroke colours, in join order.
inline const std::array<Rgb, 8>& user_palette() {
  static const std::array<Rgb, 8> palette{{{230, 25, 75},
                                           {60, 180, 75},
                                           {0, 130, 200},
                                           {245, 130, 48},
                                           {145, 30, 180},
                                           {70, 240, 240},
                                           {240, 50, 230},
                                           {210, 245, 60}}};
  return palette;
}

// ---- JSON form -------------------------------------------------------------

namespace detail {

template <typename Point>
json point_json(const Point& p) {
  if constexpr (std::is_same_v<Point, Vec3>) return codec::vec3(p);
  else return json::array({p.u, p.v});
}

template <typename Point>
Point read_point(const json& j) {
  if constexpr (std::is_same_v<Point, Vec3>) {
    return codec::read_vec3(j);
  } else {
    const auto& a = codec::array(j, 2);
    BoardPoint p{codec::real(a[0]), codec::real(a[1])};
    if (p.u < 0.0 || p.u > 1.0 || p.v < 0.0 || p.v > 1.0) throw PayloadError("board point outside [0,1]^2");
    return p;
  }
}

}  // namespace detail

template <typename Point>
json points_json(const std::vector<Point>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back(detail::point_json(p));
  return a;
}

template <typename Point>
std::vector<Point> read_points(const json& j) {
  if (!j.is_array()) throw PayloadError("points must be an array");
  std::vector<Point> out;
  out.reserve(j.size());
  for (const auto& p : j) out.push_back(detail::read_point<Point>(p));
  return out;
}

template <typename Point>
json stroke_json(const BasicStroke<Point>& s) {
  return {{"author", s.author},     {"color", codec::rgb(s.color)}, {"complete", s.complete},
          {"id", s.id},             {"points", points_json(s.points)}, {"width_mm", s.width_mm}};
}

template <typename Point>
BasicStroke<Point> read_stroke(const json& j) {
  BasicStroke<Point> s;
  s.id = codec::string(codec::field(j, "id"));
  s.author = codec::string(codec::field(j, "author"));
  s.color = codec::read_rgb(codec::field(j, "color"));
  s.width_mm = codec::real(codec::field(j, "width_mm"));
  s.points = read_points<Point>(codec::field(j, "points"));
  s.complete = codec::boolean(codec::field(j, "complete"));
  if (!(s.width_mm > 0.0)) throw PayloadError("stroke width must be > 0");
  return s;
}

inline json presence_json(const Presence& p) {
  return {{"color", codec::rgb(p.color)},
          {"display_name", p.display_name},
          {"head_pose", codec::pose(p.head_pose)},
          {"role", std::string(to_string(p.role))},
          {"speaking", p.speaking},
          {"user_id", p.user_id}};
}

inline Presence read_presence(const json& j) {
  Presence p;
  p.user_id = codec::string(codec::field(j, "user_id"));
  p.display_name = codec::string(codec::field(j, "display_name"));
  const auto role = parse_role(codec::string(codec::field(j, "role")));
  if (!role) throw PayloadError("unknown role");
  p.role = *role;
  p.head_pose = codec::read_pose(codec::field(j, "head_pose"));
  p.speaking = codec::boolean(codec::field(j, "speaking"));
  p.color = codec::read_rgb(codec::field(j, "color"));
  if (p.user_id.empty()) throw PayloadError("empty user id");
  return p;
}

inline json dataset_json(const DatasetInfo& d) {
  return {{"dataset_id", d.dataset_id},
          {"dims", json::array({d.dims[0], d.dims[1], d.dims[2]})},
          {"spacing_mm", codec::vec3(d.spacing_mm)}};
}

inline DatasetInfo read_dataset(const json& j) {
  DatasetInfo d;
  d.dataset_id = codec::string(codec::field(j, "dataset_id"));
  const auto& dims = codec::array(codec::field(j, "dims"), 3);
  for (int a = 0; a < 3; ++a) {
    const auto n = codec::integer(dims[a]);
    if (n < 1 || n > (1 << 20)) throw PayloadError("dataset dims must be >= 1");
    d.dims[a] = static_cast<int>(n);
  }
  d.spacing_mm = codec::read_vec3(codec::field(j, "spacing_mm"));
  if (!(d.spacing_mm.x > 0 && d.spacing_mm.y > 0 && d.spacing_mm.z > 0))
    throw PayloadError("dataset spacing must be > 0");
  if (d.dataset_id.empty()) throw PayloadError("empty dataset id");
  return d;
}

inline json axis_slices_json(const std::array<int, 3>& s) { return json::array({s[0], s[1], s[2]}); }

inline std::array<int, 3> read_axis_slices(const json& j) {
  const auto& a = codec::array(j, 3);
  std::array<int, 3> s{};
  for (int i = 0; i < 3; ++i) {
    const auto v = codec::integer(a[i]);
    if (v < 0 || v > (1 << 20)) throw PayloadError("slice index out of range");
    s[static_cast<std::size_t>(i)] = static_cast<int>(v);
  }
  return s;
}

inline bool slices_fit(const std::array<int, 3>& s, const std::optional<DatasetInfo>& d) {
  if (!d) return true;
  for (int a = 0; a < 3; ++a)
    if (s[static_cast<std::size_t>(a)] >= d->dims[a]) return false;
  return true;
}

/// Canonical JSON of the whole document. Transient connection data is not part of
/// SessionState, so it cannot leak into snapshots.
inline json state_to_json(const SessionState& s) {
  json strokes = json::object();
  for (const auto& [id, st] : s.strokes) strokes[id] = stroke_json(st);
  json board = json::object();
  for (const auto& [id, st] : s.board_strokes) board[id] = stroke_json(st);
  json presence = json::object();
  for (const auto& [id, p] : s.presence) presence[id] = presence_json(p);
  json cutouts = json::array();
  for (const auto& r : s.cutouts) cutouts.push_back(codec::region(r));
  json locks = json::object();
  for (const auto& [e, u] : s.locks) locks[e] = u;
  json seqs = json::object();
  for (const auto& [e, n] : s.seqs) seqs[e] = n;
  return {{"axis_slices", axis_slices_json(s.axis_slices)},
          {"board_strokes", std::move(board)},
          {"colormap", s.colormap_name},
          {"cutouts", std::move(cutouts)},
          {"dataset", s.dataset ? dataset_json(*s.dataset) : json(nullptr)},
          {"dataset_transform", codec::pose(s.dataset_transform)},
          {"locks", std::move(locks)},
          {"plane", codec::plane(s.plane)},
          {"presence", std::move(presence)},
          {"seqs", std::move(seqs)},
          {"strokes", std::move(strokes)},
          {"window_level", codec::window_level(s.window_level)}};
}

/// Parses and validates a full document; throws PayloadError on any violation of
/// the SessionState invariants.
inline SessionState state_from_json(const json& j) {
  using namespace codec;
  SessionState s;
  const auto& ds = field(j, "dataset");
  if (!ds.is_null()) s.dataset = read_dataset(ds);
  s.dataset_transform = read_pose(field(j, "dataset_transform"));
  s.plane = read_plane(field(j, "plane"));
  const auto& cut = field(j, "cutouts");
  if (!cut.is_array()) throw PayloadError("cutouts must be an array");
  for (const auto& r : cut) s.cutouts.push_back(read_region(r));
  s.window_level = read_window_level(field(j, "window_level"));
  s.axis_slices = read_axis_slices(field(j, "axis_slices"));
  if (!slices_fit(s.axis_slices, s.dataset)) throw PayloadError("axis slices outside dataset dims");
  s.colormap_name = string(field(j, "colormap"));
  if (!is_colormap_name(s.colormap_name)) throw PayloadError("unknown colormap");

  auto objects = [](const json& o, const char* what) -> const json& {
    if (!o.is_object()) throw PayloadError(std::string(what) + " must be an object");
    return o;
  };
  for (const auto& [id, v] : objects(field(j, "strokes"), "strokes").items()) {
    auto st = read_stroke<Vec3>(v);
    if (st.id != id) throw PayloadError("stroke key/id mismatch");
    s.strokes.emplace(id, std::move(st));
  }
  for (const auto& [id, v] : objects(field(j, "board_strokes"), "board_strokes").items()) {
    auto st = read_stroke<BoardPoint>(v);
    if (st.id != id) throw PayloadError("board stroke key/id mismatch");
    s.board_strokes.emplace(id, std::move(st));
  }
  for (const auto& [id, v] : objects(field(j, "presence"), "presence").items()) {
    auto p = read_presence(v);
    if (p.user_id != id) throw PayloadError("presence key/user mismatch");
    s.presence.emplace(id, std::move(p));
  }
  for (const auto& [e, u] : objects(field(j, "locks"), "locks").items()) {
    const auto ref = EntityRef::parse(e);
    if (!ref || !ref->lockable() || !s.has_entity(*ref)) throw PayloadError("lock on a non-lockable entity");
    const Presence* p = s.find_presence(string(u));
    if (!p || p->role != Role::participant) throw PayloadError("lock holder is not a present participant");
    s.locks.emplace(e, string(u));
  }
  for (const auto& [e, n] : objects(field(j, "seqs"), "seqs").items()) {
    if (!EntityRef::parse(e)) throw PayloadError("seq for unknown entity");
    s.seqs.emplace(e, unsigned_integer(n));
  }
  return s;
}

}  // namespace covis::protocol
