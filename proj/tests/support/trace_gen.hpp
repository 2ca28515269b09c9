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

// Seeded generator of server-ordered message traces. A shadow replica steers the
// generator towards messages that are mostly accepted, while a share of
// deliberately invalid ones keeps the rejection paths exercised.

#include <random>
#include <string>
#include <vector>

#include "covis/protocol/protocol.hpp"

namespace covis::testing {

namespace proto = covis::protocol;

class TraceGenerator {
 public:
  explicit TraceGenerator(std::uint64_t seed) : rng_(seed) {}

  std::vector<proto::Envelope> generate(std::size_t n) {
    std::vector<proto::Envelope> out;
    out.reserve(n);
    while (out.size() < n) {
      proto::Envelope e = next();
      // The server stamps the next seq on every delta and only advances it on accept.
      if (!e.seq) e.seq = next_seq_;
      if (proto::apply_delta_in_place(shadow_, e).accepted) ++next_seq_;
      out.push_back(std::move(e));
    }
    return out;
  }

  const proto::SessionState& shadow() const { return shadow_; }

 private:
  static constexpr std::array<const char*, 5> kUsers{"ana", "ben", "cy", "dee", "eve"};

  int pick(int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }

  std::string any_user() { return kUsers[static_cast<std::size_t>(pick(static_cast<int>(kUsers.size())))]; }

  std::string present_user() {
    if (shadow_.presence.empty() || chance(0.05)) return any_user();
    auto it = shadow_.presence.begin();
    std::advance(it, pick(static_cast<int>(shadow_.presence.size())));
    return it->first;
  }

  Vec3 vec(double lo, double hi) { return {real(lo, hi), real(lo, hi), real(lo, hi)}; }

  Quat rot() { return normalized(Quat{real(0.1, 1), real(-1, 1), real(-1, 1), real(-1, 1)}); }

  Pose pose() { return {vec(-50, 50), rot(), real(0.5, 2.0)}; }

  Region region() {
    const auto mode = chance(0.5) ? RegionMode::inclusive : RegionMode::exclusive;
    if (chance(0.5)) return Region::sphere(vec(0, 64), real(1, 20), mode);
    return Region::box(pose(), {real(1, 10), real(1, 10), real(1, 10)}, mode);
  }

  proto::EntityRef lockable() {
    switch (pick(3)) {
      case 0: return {proto::EntityRef::Kind::dataset_transform};
      case 1: return {proto::EntityRef::Kind::plane};
      default: {
        const int n = static_cast<int>(shadow_.cutouts.size());
        return {proto::EntityRef::Kind::cutout, n == 0 ? 0 : pick(n + 1)};
      }
    }
  }

  proto::Envelope from(std::string sender, proto::Envelope e) {
    e.sender = std::move(sender);
    return e;
  }

  // A user that holds `entity`, when there is one and the dice agree.
  std::string holder_or_any(const std::string& entity) {
    if (const auto* h = shadow_.lock_holder(entity); h && chance(0.85)) return *h;
    return present_user();
  }

  template <typename Strokes>
  std::string open_stroke(const Strokes& strokes) {
    for (const auto& [id, st] : strokes)
      if (!st.complete && chance(0.7)) return id;
    if (strokes.empty()) return "stroke:nobody:1";
    auto it = strokes.begin();
    std::advance(it, pick(static_cast<int>(strokes.size())));
    return it->first;
  }

  std::string author_of(const std::string& id) {
    if (const auto it = shadow_.strokes.find(id); it != shadow_.strokes.end() && chance(0.9)) return it->second.author;
    if (const auto it = shadow_.board_strokes.find(id); it != shadow_.board_strokes.end() && chance(0.9))
      return it->second.author;
    return present_user();
  }

  std::vector<Vec3> points3(int n) {
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i) pts.push_back(vec(0, 64));
    return pts;
  }

  std::vector<proto::BoardPoint> points2(int n) {
    std::vector<proto::BoardPoint> pts;
    for (int i = 0; i < n; ++i) pts.push_back({real(0, 1), real(0, 1)});
    return pts;
  }

  proto::Envelope next() {
    namespace msg = proto::msg;
    using K = proto::EntityRef::Kind;
    if (shadow_.presence.size() < 2) return join();
    const int roll = pick(100);
    if (roll < 5) return join();
    if (roll < 8) {
      const std::string u = present_user();
      return from(u, msg::make(proto::MessageType::presence_leave, {{"user_id", u}}));
    }
    if (roll < 18) {
      const auto e = lockable();
      return from(chance(0.8) ? present_user() : any_user(), msg::grab_acquire(e));
    }
    if (roll < 25) {
      const auto e = lockable();
      return from(holder_or_any(e.str()), msg::grab_release(e));
    }
    if (roll < 45) {
      const auto e = lockable();
      proto::Envelope m;
      if (e.kind == K::dataset_transform) m = msg::set_pose(pose());
      else if (e.kind == K::plane) m = msg::set_plane({vec(0, 64), normalized(vec(-1, 1) + Vec3{0, 0, 1e-3}), chance(0.5)});
      else m = msg::set_cutout(e.index, region());
      m = from(holder_or_any(e.str()), std::move(m));
      if (chance(0.05)) {
        // Replay an old seq to hit the stale rule.
        const auto it = shadow_.seqs.find(e.str());
        if (it != shadow_.seqs.end()) m.seq = it->second;
      }
      return m;
    }
    if (roll < 52) return from(present_user(), msg::set_window_level({real(0.05, 1.0), real(0, 1)}));
    if (roll < 56) {
      const proto::DatasetInfo d = shadow_.dataset.value_or(proto::DatasetInfo{});
      return from(present_user(), msg::set_axis_slices({pick(d.dims[0] + 1), pick(d.dims[1] + 1), pick(d.dims[2] + 1)}));
    }
    if (roll < 59) {
      static constexpr std::array<const char*, 4> names{"grayscale", "viridis", "coolwarm", "jet"};
      return from(present_user(), msg::set_colormap(names[static_cast<std::size_t>(pick(4))]));
    }
    if (roll < 63) return from(present_user(), msg::cutout_add(region()));
    if (roll < 65) {
      const int n = 16 + pick(3) * 16;
      return from(present_user(), msg::dataset_load({"lattice-" + std::to_string(n), {n, n, n}, {1.0, 1.0, 0.5}}));
    }
    if (roll < 72) {
      const std::string u = present_user();
      const bool board = chance(0.3);
      const std::string id = std::string(board ? "board:" : "stroke:") + u + ":" + std::to_string(++stroke_counter_);
      std::optional<Rgb> color;
      if (chance(0.3)) color = Rgb{static_cast<std::uint8_t>(pick(256)), 7, 9};
      const int n = pick(4);
      return from(u, board ? msg::stroke_begin(id, points2(n), real(0.5, 3), color)
                           : msg::stroke_begin(id, points3(n), real(0.5, 3), color));
    }
    if (roll < 82) {
      const bool board = chance(0.3);
      const std::string id = board ? open_stroke(shadow_.board_strokes) : open_stroke(shadow_.strokes);
      const int n = 1 + pick(6);
      return from(author_of(id), id.starts_with("board:") ? msg::stroke_points(id, points2(n))
                                                           : msg::stroke_points(id, points3(n)));
    }
    if (roll < 87) {
      const std::string id = chance(0.5) ? open_stroke(shadow_.strokes) : open_stroke(shadow_.board_strokes);
      return from(author_of(id), msg::stroke_end(id));
    }
    if (roll < 89) {
      const std::string id = chance(0.5) ? open_stroke(shadow_.strokes) : open_stroke(shadow_.board_strokes);
      return from(author_of(id), msg::stroke_delete(id));
    }
    if (roll < 90) return from(present_user(), msg::stroke_delete_all());
    return from(present_user(), msg::presence(pose(), chance(0.5)));
  }

  proto::Envelope join() {
    const std::string u = any_user();
    proto::Presence p;
    p.user_id = u;
    p.display_name = u;
    p.role = chance(0.2) ? proto::Role::spectator : proto::Role::participant;
    p.color = proto::user_palette()[joins_++ % 8];
    return from(u, proto::msg::make(proto::MessageType::presence_join, proto::presence_json(p)));
  }

  std::mt19937_64 rng_;
  proto::SessionState shadow_;
  std::uint64_t next_seq_{1};
  std::uint64_t stroke_counter_{0};
  std::size_t joins_{0};
};

inline std::vector<protocol::Envelope> random_trace(std::uint64_t seed, std::size_t n) {
  return TraceGenerator(seed).generate(n);
}

}  // namespace covis::testing
