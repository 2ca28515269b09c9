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
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

#include "covis/protocol/codec.hpp"
#include "covis/protocol/session_state.hpp"

namespace covis::protocol {

enum class MessageType {
  join,
  leave,
  welcome,
  error,
  reject,
  snapshot,
  state_update,
  grab_acquire,
  grab_release,
  cutout_add,
  dataset_load,
  stroke_begin,
  stroke_points,
  stroke_end,
  stroke_delete,
  stroke_delete_all,
  presence,
  presence_join,
  presence_leave,
  event,
};

inline constexpr std::array<std::pair<MessageType, std::string_view>, 20> kMessageTypeNames{{
    {MessageType::join, "join"},
    {MessageType::leave, "leave"},
    {MessageType::welcome, "welcome"},
    {MessageType::error, "error"},
    {MessageType::reject, "reject"},
    {MessageType::snapshot, "snapshot"},
    {MessageType::state_update, "state_update"},
    {MessageType::grab_acquire, "grab_acquire"},
    {MessageType::grab_release, "grab_release"},
    {MessageType::cutout_add, "cutout_add"},
    {MessageType::dataset_load, "dataset_load"},
    {MessageType::stroke_begin, "stroke_begin"},
    {MessageType::stroke_points, "stroke_points"},
    {MessageType::stroke_end, "stroke_end"},
    {MessageType::stroke_delete, "stroke_delete"},
    {MessageType::stroke_delete_all, "stroke_delete_all"},
    {MessageType::presence, "presence"},
    {MessageType::presence_join, "presence_join"},
    {MessageType::presence_leave, "presence_leave"},
    {MessageType::event, "event"},
}};

inline std::string_view to_string(MessageType t) {
  for (const auto& [type, name] : kMessageTypeNames)
    if (type == t) return name;
  return "?";
}

inline std::optional<MessageType> parse_message_type(std::string_view s) {
  for (const auto& [type, name] : kMessageTypeNames)
    if (name == s) return type;
  return std::nullopt;
}

/// Messages that change SessionState when applied through apply_delta.
inline bool is_state_delta(MessageType t) {
  switch (t) {
    case MessageType::state_update:
    case MessageType::grab_acquire:
    case MessageType::grab_release:
    case MessageType::cutout_add:
    case MessageType::dataset_load:
    case MessageType::stroke_begin:
    case MessageType::stroke_points:
    case MessageType::stroke_end:
    case MessageType::stroke_delete:
    case MessageType::stroke_delete_all:
    case MessageType::presence:
    case MessageType::presence_join:
    case MessageType::presence_leave:
      return true;
    default:
      return false;
  }
}

/// Wire frame. `sender` is stamped by the server and empty on client-originated
/// frames; `seq` is stamped on every accepted state delta.
struct Envelope {
  MessageType type{MessageType::event};
  std::string sender;
  std::optional<std::uint64_t> seq;
  json body = json::object();

  bool operator==(const Envelope&) const = default;
};

class DecodeError : public std::runtime_error {
 public:
  enum class Kind { malformed_json, unknown_type, missing_field, invalid_field };

  DecodeError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline std::string_view to_string(DecodeError::Kind k) {
  switch (k) {
    case DecodeError::Kind::malformed_json: return "malformed_json";
    case DecodeError::Kind::unknown_type: return "unknown_type";
    case DecodeError::Kind::missing_field: return "missing_field";
    case DecodeError::Kind::invalid_field: return "invalid_field";
  }
  return "?";
}

inline json envelope_json(const Envelope& e) {
  json j{{"type", std::string(to_string(e.type))}, {"body", e.body}};
  if (!e.sender.empty()) j["sender"] = e.sender;
  if (e.seq) j["seq"] = *e.seq;
  return j;
}

/// Compact JSON with lexicographically sorted keys; equal envelopes encode to
/// identical bytes.
inline std::string encode(const Envelope& e) { return envelope_json(e).dump(); }

inline Envelope decode(std::string_view bytes) {
  json j = json::parse(bytes, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw DecodeError(DecodeError::Kind::malformed_json, "frame is not valid JSON");
  if (!j.is_object()) throw DecodeError(DecodeError::Kind::malformed_json, "frame is not a JSON object");

  const auto type_it = j.find("type");
  if (type_it == j.end()) throw DecodeError(DecodeError::Kind::missing_field, "missing field 'type'");
  if (!type_it->is_string()) throw DecodeError(DecodeError::Kind::invalid_field, "'type' must be a string");
  const auto type = parse_message_type(type_it->get_ref<const std::string&>());
  if (!type)
    throw DecodeError(DecodeError::Kind::unknown_type, "unknown message type '" + type_it->get<std::string>() + "'");

  Envelope e;
  e.type = *type;
  const auto body_it = j.find("body");
  if (body_it == j.end()) throw DecodeError(DecodeError::Kind::missing_field, "missing field 'body'");
  if (!body_it->is_object()) throw DecodeError(DecodeError::Kind::invalid_field, "'body' must be an object");
  e.body = std::move(*body_it);

  if (const auto s = j.find("sender"); s != j.end()) {
    if (!s->is_string()) throw DecodeError(DecodeError::Kind::invalid_field, "'sender' must be a string");
    e.sender = s->get<std::string>();
  }
  if (const auto q = j.find("seq"); q != j.end()) {
    if (!q->is_number_unsigned() && !(q->is_number_integer() && q->get<std::int64_t>() >= 0))
      throw DecodeError(DecodeError::Kind::invalid_field, "'seq' must be a non-negative integer");
    e.seq = q->get<std::uint64_t>();
  }
  for (const auto& [key, value] : j.items())
    if (key != "type" && key != "body" && key != "sender" && key != "seq")
      throw DecodeError(DecodeError::Kind::invalid_field, "unexpected envelope field '" + key + "'");
  return e;
}

enum class EventTarget { all, others, server };

inline std::string_view to_string(EventTarget t) {
  switch (t) {
    case EventTarget::all: return "all";
    case EventTarget::others: return "others";
    case EventTarget::server: return "server";
  }
  return "?";
}

inline std::optional<EventTarget> parse_event_target(std::string_view s) {
  if (s == "all") return EventTarget::all;
  if (s == "others") return EventTarget::others;
  if (s == "server") return EventTarget::server;
  return std::nullopt;
}

inline constexpr std::size_t kMaxPointsPerMessage = 32;

// ---- builders ----------------------------------------------------------------

namespace msg {

inline Envelope make(MessageType t, json body = json::object()) {
  Envelope e;
  e.type = t;
  e.body = std::move(body);
  return e;
}

inline Envelope join(std::string_view name, Role role) {
  return make(MessageType::join, {{"name", name}, {"role", to_string(role)}});
}

inline Envelope leave() { return make(MessageType::leave); }

inline Envelope grab_acquire(const EntityRef& e) { return make(MessageType::grab_acquire, {{"entity", e.str()}}); }
inline Envelope grab_release(const EntityRef& e) { return make(MessageType::grab_release, {{"entity", e.str()}}); }

inline Envelope state_update(const EntityRef& e, json value) {
  return make(MessageType::state_update, {{"entity", e.str()}, {"value", std::move(value)}});
}

inline Envelope set_pose(const Pose& p) { return state_update({EntityRef::Kind::dataset_transform}, codec::pose(p)); }
inline Envelope set_plane(const PlaneState& p) { return state_update({EntityRef::Kind::plane}, codec::plane(p)); }
inline Envelope set_cutout(int index, const Region& r) {
  return state_update({EntityRef::Kind::cutout, index}, codec::region(r));
}
inline Envelope set_window_level(const WindowLevel& wl) {
  return state_update({EntityRef::Kind::window_level}, codec::window_level(wl));
}
inline Envelope set_axis_slices(const std::array<int, 3>& s) {
  return state_update({EntityRef::Kind::axis_slices}, axis_slices_json(s));
}
inline Envelope set_colormap(std::string_view name) { return state_update({EntityRef::Kind::colormap}, name); }

inline Envelope cutout_add(const Region& r) { return make(MessageType::cutout_add, {{"region", codec::region(r)}}); }

inline Envelope dataset_load(const DatasetInfo& d) { return make(MessageType::dataset_load, dataset_json(d)); }

template <typename Point>
Envelope stroke_begin(std::string_view id, const std::vector<Point>& points, double width_mm,
                      std::optional<Rgb> color = std::nullopt) {
  json body{{"id", id}, {"points", points_json(points)}, {"width_mm", width_mm}};
  if (color) body["color"] = codec::rgb(*color);
  return make(MessageType::stroke_begin, std::move(body));
}

template <typename Point>
Envelope stroke_points(std::string_view id, const std::vector<Point>& points) {
  return make(MessageType::stroke_points, {{"id", id}, {"points", points_json(points)}});
}

inline Envelope stroke_end(std::string_view id) { return make(MessageType::stroke_end, {{"id", id}}); }
inline Envelope stroke_delete(std::string_view id) { return make(MessageType::stroke_delete, {{"id", id}}); }
inline Envelope stroke_delete_all() { return make(MessageType::stroke_delete_all); }

inline Envelope presence(const Pose& head_pose, bool speaking) {
  return make(MessageType::presence, {{"head_pose", codec::pose(head_pose)}, {"speaking", speaking}});
}

inline Envelope event(std::string_view name, json args, EventTarget targets) {
  if (name.empty()) throw std::invalid_argument("event name must be non-empty");
  return make(MessageType::event, {{"args", std::move(args)}, {"name", name}, {"targets", to_string(targets)}});
}

inline Envelope event(std::string_view name, json args, std::string_view targets) {
  const auto t = parse_event_target(targets);
  if (!t) throw std::invalid_argument("unknown event targets '" + std::string(targets) + "'");
  return event(name, std::move(args), *t);
}

}  // namespace msg
}  // namespace covis::protocol
