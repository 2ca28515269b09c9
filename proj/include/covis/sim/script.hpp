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

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "covis/protocol/protocol.hpp"

namespace covis::sim {

using protocol::json;
using TimeMs = std::int64_t;

class ScriptError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ActionKind {
  join,
  grab,
  move,
  release,
  stroke,
  window_level,
  slice,
  colormap,
  add_cutout,
  presence,
  event,
  load_dataset,
  clear_strokes,
  disconnect,
  leave,
};

inline const std::map<std::string, ActionKind>& action_names() {
  static const std::map<std::string, ActionKind> names{
      {"join", ActionKind::join},           {"grab", ActionKind::grab},
      {"move", ActionKind::move},           {"release", ActionKind::release},
      {"stroke", ActionKind::stroke},       {"window_level", ActionKind::window_level},
      {"slice", ActionKind::slice},         {"colormap", ActionKind::colormap},
      {"add_cutout", ActionKind::add_cutout}, {"presence", ActionKind::presence},
      {"event", ActionKind::event},         {"load_dataset", ActionKind::load_dataset},
      {"clear_strokes", ActionKind::clear_strokes}, {"disconnect", ActionKind::disconnect},
      {"leave", ActionKind::leave}};
  return names;
}

struct Waypoint {
  Vec3 position{};
  Quat rotation{};
};

struct Action {
  TimeMs at_ms{0};
  ActionKind kind{ActionKind::join};
  bool expect_rejected{false};

  std::string entity;                 // grab, move, release
  TimeMs until_ms{0};                 // move
  double rate_hz{20.0};               // move, stroke
  std::vector<Waypoint> waypoints;    // move

  bool board{false};                  // stroke
  std::vector<Vec3> points;           // stroke (board strokes use x,y)
  double width_mm{1.0};
  std::optional<Rgb> color;
  int batch{4};

  WindowLevel window_level{};
  std::array<int, 3> slices{};
  std::string name;                   // colormap, event, load_dataset id
  Region region{};
  json args = json::object();
  std::string targets{"all"};
  bool speaking{false};
  Pose head_pose{};
  TimeMs duration_ms{1000};           // disconnect
};

struct BotScript {
  std::string name;
  protocol::Role role{protocol::Role::participant};
  std::vector<Action> actions;
};

namespace script_detail {

using namespace protocol::codec;

inline Action parse_action(const json& j) {
  Action a;
  a.at_ms = integer(field(j, "at_ms"));
  if (a.at_ms < 0) throw ScriptError("at_ms must be >= 0");
  const auto& kind = string(field(j, "do"));
  const auto it = action_names().find(kind);
  if (it == action_names().end()) throw ScriptError("unknown action '" + kind + "'");
  a.kind = it->second;
  if (j.contains("expect")) {
    const auto& e = string(j.at("expect"));
    if (e != "rejected" && e != "accepted") throw ScriptError("expect must be 'rejected' or 'accepted'");
    a.expect_rejected = e == "rejected";
  }
  switch (a.kind) {
    case ActionKind::grab:
    case ActionKind::release: a.entity = string(field(j, "entity")); break;
    case ActionKind::move: {
      a.entity = string(field(j, "entity"));
      a.until_ms = integer(field(j, "until_ms"));
      a.rate_hz = real(field(j, "rate_hz"));
      for (const auto& w : field(j, "waypoints"))
        a.waypoints.push_back({read_vec3(field(w, "position")),
                               w.contains("rotation") ? normalized(read_quat(w.at("rotation"))) : Quat{}});
      if (a.waypoints.empty()) throw ScriptError("move needs at least one waypoint");
      if (a.until_ms <= a.at_ms) throw ScriptError("move until_ms must be after at_ms");
      if (!(a.rate_hz > 0.0 && a.rate_hz <= 1000.0)) throw ScriptError("move rate_hz must be in (0, 1000]");
      break;
    }
    case ActionKind::stroke: {
      a.board = j.contains("board") && boolean(j.at("board"));
      const auto& pts = field(j, "points");
      if (!pts.is_array() || pts.empty()) throw ScriptError("stroke needs points");
      for (const auto& p : pts) {
        if (a.board) {
          const auto& uv = array(p, 2);
          a.points.push_back({real(uv[0]), real(uv[1]), 0.0});
        } else {
          a.points.push_back(read_vec3(p));
        }
      }
      if (j.contains("width_mm")) a.width_mm = real(j.at("width_mm"));
      if (j.contains("color")) a.color = read_rgb(j.at("color"));
      if (j.contains("rate_hz")) a.rate_hz = real(j.at("rate_hz"));
      if (j.contains("batch")) a.batch = static_cast<int>(integer(j.at("batch")));
      if (a.batch < 1 || a.batch > static_cast<int>(protocol::kMaxPointsPerMessage))
        throw ScriptError("stroke batch must be in [1, 32]");
      if (!(a.rate_hz > 0.0 && a.rate_hz <= 1000.0)) throw ScriptError("stroke rate_hz must be in (0, 1000]");
      break;
    }
    case ActionKind::window_level:
      a.window_level = {real(field(j, "width")), real(field(j, "level"))};
      break;
    case ActionKind::slice: a.slices = protocol::read_axis_slices(field(j, "indices")); break;
    case ActionKind::colormap: a.name = string(field(j, "name")); break;
    case ActionKind::add_cutout: a.region = read_region(field(j, "region")); break;
    case ActionKind::presence:
      a.speaking = boolean(field(j, "speaking"));
      if (j.contains("head_pose")) a.head_pose = read_pose(j.at("head_pose"));
      break;
    case ActionKind::event:
      a.name = string(field(j, "name"));
      if (j.contains("args")) a.args = j.at("args");
      if (j.contains("targets")) a.targets = string(j.at("targets"));
      if (!protocol::parse_event_target(a.targets)) throw ScriptError("unknown event targets '" + a.targets + "'");
      if (a.name.empty()) throw ScriptError("event name must be non-empty");
      break;
    case ActionKind::load_dataset: a.name = string(field(j, "dataset_id")); break;
    case ActionKind::disconnect:
      a.duration_ms = integer(field(j, "duration_ms"));
      if (a.duration_ms < 0) throw ScriptError("disconnect duration must be >= 0");
      break;
    default: break;
  }
  return a;
}

inline bool mutating(ActionKind k) {
  switch (k) {
    case ActionKind::join:
    case ActionKind::presence:
    case ActionKind::disconnect:
    case ActionKind::leave: return false;
    default: return true;
  }
}

}  // namespace script_detail

/// Rejects scripts that break a protocol precondition without annotating the
/// offending action with "expect": "rejected".
inline void validate_script(const BotScript& s) {
  using protocol::EntityRef;
  if (s.actions.empty()) throw ScriptError(s.name + ": script is empty");
  if (s.actions.front().kind != ActionKind::join) throw ScriptError(s.name + ": first action must be join");
  std::map<std::string, bool> held;
  bool joined = false;
  TimeMs last = 0;
  for (std::size_t n = 0; n < s.actions.size(); ++n) {
    const Action& a = s.actions[n];
    const std::string where = s.name + ": action " + std::to_string(n) + ": ";
    if (a.at_ms < last) throw ScriptError(where + "actions must be ordered by at_ms");
    last = a.at_ms;
    if (a.kind == ActionKind::join) {
      joined = true;
      continue;
    }
    if (!joined) throw ScriptError(where + "action before join");
    if (a.expect_rejected) continue;
    if (s.role == protocol::Role::spectator && script_detail::mutating(a.kind))
      throw ScriptError(where + "spectators cannot mutate state");
    switch (a.kind) {
      case ActionKind::grab:
      case ActionKind::move:
      case ActionKind::release: {
        const auto ref = EntityRef::parse(a.entity);
        if (!ref || !ref->lockable()) throw ScriptError(where + "'" + a.entity + "' is not a lockable entity");
        if (a.kind == ActionKind::grab) {
          if (held[a.entity]) throw ScriptError(where + "grab of an entity already held");
          held[a.entity] = true;
        } else if (!held[a.entity]) {
          throw ScriptError(where + "'" + a.entity + "' is not held");
        } else if (a.kind == ActionKind::release) {
          held[a.entity] = false;
        }
        break;
      }
      case ActionKind::colormap:
        if (!is_colormap_name(a.name)) throw ScriptError(where + "unknown colormap '" + a.name + "'");
        break;
      case ActionKind::window_level:
        if (!a.window_level.valid()) throw ScriptError(where + "window width must be > 0");
        break;
      case ActionKind::stroke:
        for (const Vec3& p : a.points)
          if (a.board && (p.x < 0 || p.x > 1 || p.y < 0 || p.y > 1))
            throw ScriptError(where + "board points must lie in [0,1]^2");
        if (!(a.width_mm > 0.0)) throw ScriptError(where + "stroke width must be > 0");
        break;
      case ActionKind::disconnect:
      case ActionKind::leave:
        // Locks do not survive the connection.
        held.clear();
        if (a.kind == ActionKind::leave) joined = false;
        break;
      default: break;
    }
  }
}

inline BotScript parse_script(const json& j) {
  try {
    BotScript s;
    s.name = script_detail::string(script_detail::field(j, "name"));
    if (j.contains("role")) {
      const auto r = protocol::parse_role(script_detail::string(j.at("role")));
      if (!r) throw ScriptError("unknown role");
      s.role = *r;
    }
    const auto& actions = script_detail::field(j, "actions");
    if (!actions.is_array()) throw ScriptError("actions must be an array");
    for (const auto& a : actions) s.actions.push_back(script_detail::parse_action(a));
    validate_script(s);
    return s;
  } catch (const ScriptError&) {
    throw;
  } catch (const std::exception& e) {
    throw ScriptError(std::string("bad script: ") + e.what());
  }
}

}  // namespace covis::sim
