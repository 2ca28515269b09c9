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
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "covis/protocol/protocol.hpp"
#include "covis/sim/script.hpp"

namespace covis::sim {

using protocol::Envelope;
using protocol::MessageType;
using protocol::SessionState;

struct BotStats {
  std::uint64_t frames_sent{0};
  std::uint64_t frames_received{0};
  std::uint64_t deltas_applied{0};
  std::uint64_t replica_rejections{0};
  std::uint64_t moves_sent{0};
  std::uint64_t moves_skipped{0};        // lock not held, or superseded by a later move step
  std::uint64_t stroke_parts_skipped{0};  // the stroke was lost with a previous connection
  std::uint64_t releases_skipped{0};
  std::uint64_t expected_rejections{0};   // actions sent with expect: rejected
  std::uint64_t pings_answered{0};
  std::uint64_t events_received{0};
  std::uint64_t errors{0};
  std::uint64_t undecodable{0};
  std::uint64_t grants{0};
  std::map<std::string, std::uint64_t> rejections;  // reason -> count

  std::uint64_t total_rejections() const {
    std::uint64_t n = 0;
    for (const auto& [reason, count] : rejections) n += count;
    return n;
  }
};

/// What the transport should do after a poll.
struct BotOutput {
  std::vector<std::string> frames;
  bool want_connect{false};
  std::optional<TimeMs> disconnect_for;
  bool leave{false};
};

/// Drives one scripted client against any transport. The bot keeps a replica of
/// the session built from its welcome snapshot plus every delta it receives.
class Bot {
 public:
  explicit Bot(BotScript script) : script_(std::move(script)) { expand(); }

  const BotScript& script() const { return script_; }
  const std::string& user_id() const { return user_id_; }
  const SessionState& replica() const { return replica_; }
  std::uint64_t replica_hash() const { return protocol::state_hash(replica_); }
  const BotStats& stats() const { return stats_; }
  bool connected() const { return connected_; }
  bool welcomed() const { return welcomed_; }
  bool left() const { return left_; }
  int epoch() const { return epoch_; }
  /// Seqs of the deltas received, one list per welcomed connection.
  const std::vector<std::vector<std::uint64_t>>& delta_logs() const { return logs_; }
  const std::string& last_error() const { return last_error_; }

  /// A transport is up; returns the join frame.
  std::string connect() {
    connected_ = true;
    welcomed_ = false;
    left_ = false;
    ++stats_.frames_sent;
    return protocol::encode(protocol::msg::join(script_.name, script_.role));
  }

  /// The transport went away. Locks and in-progress strokes die with it.
  void disconnected() {
    connected_ = false;
    welcomed_ = false;
    pending_grabs_.clear();
  }

  /// Handles one inbound frame and returns any immediate replies.
  std::vector<std::string> on_frame(std::string_view frame) {
    ++stats_.frames_received;
    std::vector<std::string> replies;
    Envelope e;
    try {
      e = protocol::decode(frame);
    } catch (const protocol::DecodeError&) {
      ++stats_.undecodable;
      return replies;
    }
    switch (e.type) {
      case MessageType::welcome: on_welcome(e); break;
      case MessageType::snapshot:
        try {
          replica_ = protocol::apply_snapshot(e);
        } catch (const std::exception&) {
          ++stats_.replica_rejections;
        }
        break;
      case MessageType::reject: on_reject(e); break;
      case MessageType::error:
        ++stats_.errors;
        last_error_ = e.body.value("code", std::string{}) + ": " + e.body.value("message", std::string{});
        break;
      case MessageType::event:
        if (e.sender == "server" && e.body.value("name", std::string{}) == "ping") {
          ++stats_.pings_answered;
          ++stats_.frames_sent;
          replies.push_back(protocol::encode(
              protocol::msg::event("pong", e.body.value("args", json::object()), protocol::EventTarget::server)));
        } else {
          ++stats_.events_received;
        }
        break;
      default:
        if (protocol::is_state_delta(e.type)) on_delta(e);
        break;
    }
    return replies;
  }

  /// Runs every step due at or before `now`.
  BotOutput poll(TimeMs now) {
    BotOutput out;
    if (welcomed_) retry_deferred(out);
    while (cursor_ < steps_.size() && steps_[cursor_].at <= now) {
      const Step& st = steps_[cursor_];
      const Action& a = script_.actions[st.action];
      if (a.kind == ActionKind::join) {
        if (connected_) {
          ++cursor_;
          continue;
        }
        out.want_connect = true;
        ++cursor_;
        return out;
      }
      // Everything else waits until the server has welcomed this connection.
      if (!welcomed_) break;
      ++cursor_;
      run_step(st, a, now, out);
      if (out.disconnect_for || out.leave) break;
    }
    return out;
  }

  /// Earliest time poll() has work, if any.
  std::optional<TimeMs> next_due() const {
    if (cursor_ >= steps_.size()) return std::nullopt;
    return steps_[cursor_].at;
  }

  /// False while the next step is blocked on the transport (awaiting welcome or a reconnect).
  bool can_progress() const {
    if (cursor_ >= steps_.size()) return false;
    const bool join = script_.actions[steps_[cursor_].action].kind == ActionKind::join;
    return join ? !connected_ || welcomed_ : welcomed_;
  }

  bool script_done() const { return cursor_ >= steps_.size() && deferred_.empty(); }

 private:
  enum class Part { once, move, stroke_begin, stroke_points, stroke_end };

  struct Step {
    TimeMs at{0};
    std::size_t action{0};
    Part part{Part::once};
    std::size_t index{0};  // move tick or point batch
  };

  struct StrokeRun {
    std::string id;
    int epoch{-1};
  };

  void expand() {
    for (std::size_t n = 0; n < script_.actions.size(); ++n) {
      const Action& a = script_.actions[n];
      if (a.kind == ActionKind::move) {
        const double period = 1000.0 / a.rate_hz;
        for (std::size_t k = 0;; ++k) {
          const auto t = a.at_ms + static_cast<TimeMs>(std::llround(static_cast<double>(k) * period));
          if (t > a.until_ms) break;
          steps_.push_back({t, n, Part::move, k});
        }
      } else if (a.kind == ActionKind::stroke) {
        const double period = 1000.0 / a.rate_hz;
        const std::size_t batches = (a.points.size() + a.batch - 1) / a.batch;
        auto at = [&](std::size_t k) {
          return a.at_ms + static_cast<TimeMs>(std::llround(static_cast<double>(k) * period));
        };
        steps_.push_back({a.at_ms, n, Part::stroke_begin, 0});
        for (std::size_t k = 1; k < batches; ++k) steps_.push_back({at(k), n, Part::stroke_points, k});
        steps_.push_back({at(batches), n, Part::stroke_end, batches});
      } else {
        steps_.push_back({a.at_ms, n, Part::once, 0});
      }
    }
    std::stable_sort(steps_.begin(), steps_.end(), [](const Step& x, const Step& y) { return x.at < y.at; });
  }

  void send(BotOutput& out, const Envelope& e) {
    ++stats_.frames_sent;
    out.frames.push_back(protocol::encode(e));
  }

  bool holds(const std::string& entity) const {
    const std::string* holder = replica_.lock_holder(entity);
    return holder && *holder == user_id_;
  }

  static Pose interpolate(const Action& a, TimeMs t) {
    Pose p;
    const auto& w = a.waypoints;
    if (w.size() == 1) {
      p.position = w[0].position;
      p.rotation = w[0].rotation;
      return p;
    }
    const double s = std::clamp(static_cast<double>(t - a.at_ms) / static_cast<double>(a.until_ms - a.at_ms), 0.0, 1.0) *
                     static_cast<double>(w.size() - 1);
    const std::size_t i = std::min(static_cast<std::size_t>(s), w.size() - 2);
    const double f = s - static_cast<double>(i);
    p.position = w[i].position + (w[i + 1].position - w[i].position) * f;
    p.rotation = nlerp(w[i].rotation, w[i + 1].rotation, f);
    return p;
  }

  std::optional<Envelope> move_message(const Action& a, TimeMs t) const {
    const auto ref = protocol::EntityRef::parse(a.entity);
    if (!ref) return std::nullopt;
    const Pose pose = interpolate(a, t);
    switch (ref->kind) {
      case protocol::EntityRef::Kind::dataset_transform: return protocol::msg::set_pose(pose);
      case protocol::EntityRef::Kind::plane:
        return protocol::msg::set_plane({pose.position, normalized(rotate(pose.rotation, {0, 0, 1})), true});
      case protocol::EntityRef::Kind::cutout: {
        if (!replica_.has_entity(*ref)) return std::nullopt;
        Region r = replica_.cutouts[static_cast<std::size_t>(ref->index)];
        r.pose.position = pose.position;
        if (r.shape == RegionShape::box) r.pose.rotation = pose.rotation;
        return protocol::msg::set_cutout(ref->index, r);
      }
      default: return std::nullopt;
    }
  }

  // Moves only go out while the replica shows this bot holding the lock. When
  // several ticks of the same move are overdue only the latest one is sent.
  void run_move(const Step& st, const Action& a, TimeMs now, BotOutput& out) {
    if (cursor_ < steps_.size()) {
      const Step& next = steps_[cursor_];
      if (next.action == st.action && next.part == Part::move && next.at <= now) {
        ++stats_.moves_skipped;
        return;
      }
    }
    if (!holds(a.entity)) {
      ++stats_.moves_skipped;
      return;
    }
    const auto m = move_message(a, st.at);
    if (!m) {
      ++stats_.moves_skipped;
      return;
    }
    ++stats_.moves_sent;
    send(out, *m);
  }

  template <typename Point>
  std::vector<Point> batch_points(const Action& a, std::size_t k) const {
    std::vector<Point> pts;
    const std::size_t lo = k * static_cast<std::size_t>(a.batch);
    const std::size_t hi = std::min(a.points.size(), lo + static_cast<std::size_t>(a.batch));
    for (std::size_t i = lo; i < hi; ++i) {
      if constexpr (std::is_same_v<Point, protocol::BoardPoint>)
        pts.push_back({a.points[i].x, a.points[i].y});
      else
        pts.push_back(a.points[i]);
    }
    return pts;
  }

  void run_stroke(const Step& st, const Action& a, BotOutput& out) {
    StrokeRun& run = strokes_[st.action];
    if (st.part == Part::stroke_begin) {
      run.id = std::string(a.board ? "board:" : "stroke:") + user_id_ + ":" + std::to_string(stroke_counter_++);
      run.epoch = epoch_;
      if (a.board)
        send(out, protocol::msg::stroke_begin(run.id, batch_points<protocol::BoardPoint>(a, 0), a.width_mm, a.color));
      else
        send(out, protocol::msg::stroke_begin(run.id, batch_points<Vec3>(a, 0), a.width_mm, a.color));
      return;
    }
    if (run.epoch != epoch_) {
      ++stats_.stroke_parts_skipped;
      return;
    }
    if (st.part == Part::stroke_end) {
      send(out, protocol::msg::stroke_end(run.id));
    } else if (a.board) {
      send(out, protocol::msg::stroke_points(run.id, batch_points<protocol::BoardPoint>(a, st.index)));
    } else {
      send(out, protocol::msg::stroke_points(run.id, batch_points<Vec3>(a, st.index)));
    }
  }

  void run_step(const Step& st, const Action& a, TimeMs now, BotOutput& out) {
    if (a.expect_rejected) ++stats_.expected_rejections;
    switch (a.kind) {
      case ActionKind::move: run_move(st, a, now, out); return;
      case ActionKind::stroke: run_stroke(st, a, out); return;
      case ActionKind::grab: {
        const auto ref = protocol::EntityRef::parse(a.entity);
        if (!ref) {
          send(out, protocol::msg::make(MessageType::grab_acquire, {{"entity", a.entity}}));
          return;
        }
        pending_grabs_.insert(a.entity);
        send(out, protocol::msg::grab_acquire(*ref));
        return;
      }
      case ActionKind::release:
        if (pending_grabs_.contains(a.entity)) {
          deferred_.push_back(st);
          return;
        }
        release(a, out);
        return;
      case ActionKind::window_level: send(out, protocol::msg::set_window_level(a.window_level)); return;
      case ActionKind::slice: send(out, protocol::msg::set_axis_slices(a.slices)); return;
      case ActionKind::colormap: send(out, protocol::msg::set_colormap(a.name)); return;
      case ActionKind::add_cutout: send(out, protocol::msg::cutout_add(a.region)); return;
      case ActionKind::presence: send(out, protocol::msg::presence(a.head_pose, a.speaking)); return;
      case ActionKind::event: send(out, protocol::msg::event(a.name, a.args, a.targets)); return;
      case ActionKind::load_dataset:
        send(out, protocol::msg::event("load_dataset_request", {{"dataset_id", a.name}}, protocol::EventTarget::server));
        return;
      case ActionKind::clear_strokes:
        send(out, protocol::msg::event("clear_strokes", json::object(), protocol::EventTarget::all));
        return;
      case ActionKind::disconnect: out.disconnect_for = a.duration_ms; return;
      case ActionKind::leave:
        send(out, protocol::msg::leave());
        out.leave = true;
        left_ = true;
        return;
      case ActionKind::join: return;
    }
  }

  void release(const Action& a, BotOutput& out) {
    const auto ref = protocol::EntityRef::parse(a.entity);
    if (!ref || (!holds(a.entity) && !a.expect_rejected)) {
      ++stats_.releases_skipped;
      return;
    }
    send(out, protocol::msg::grab_release(*ref));
  }

  void retry_deferred(BotOutput& out) {
    std::vector<Step> still;
    for (const Step& st : deferred_) {
      const Action& a = script_.actions[st.action];
      if (pending_grabs_.contains(a.entity)) still.push_back(st);
      else release(a, out);
    }
    deferred_ = std::move(still);
  }

  void on_welcome(const Envelope& e) {
    try {
      user_id_ = protocol::codec::string(protocol::codec::field(e.body, "user_id"));
      replica_ = protocol::state_from_json(protocol::codec::field(e.body, "snapshot"));
    } catch (const std::exception& ex) {
      ++stats_.errors;
      last_error_ = std::string("bad welcome: ") + ex.what();
      return;
    }
    welcomed_ = true;
    ++epoch_;
    logs_.emplace_back();
  }

  void on_delta(const Envelope& e) {
    if (!welcomed_) return;
    if (e.seq) logs_.back().push_back(*e.seq);
    const auto r = protocol::apply_delta_in_place(replica_, e);
    if (!r.accepted) {
      ++stats_.replica_rejections;
      return;
    }
    ++stats_.deltas_applied;
    if (e.sender != user_id_) return;
    if (e.type == MessageType::grab_acquire) {
      ++stats_.grants;
      pending_grabs_.erase(e.body.value("entity", std::string{}));
    }
  }

  void on_reject(const Envelope& e) {
    ++stats_.rejections[e.body.value("reason", std::string{"?"})];
    if (e.body.value("ref_type", std::string{}) == "grab_acquire")
      pending_grabs_.erase(e.body.value("entity", std::string{}));
  }

  BotScript script_;
  std::vector<Step> steps_;
  std::size_t cursor_{0};
  std::vector<Step> deferred_;
  std::map<std::size_t, StrokeRun> strokes_;
  std::uint64_t stroke_counter_{1};
  std::set<std::string> pending_grabs_;

  std::string user_id_;
  SessionState replica_;
  bool connected_{false};
  bool welcomed_{false};
  bool left_{false};
  int epoch_{0};
  std::vector<std::vector<std::uint64_t>> logs_;
  BotStats stats_;
  std::string last_error_;
};

}  // namespace covis::sim
