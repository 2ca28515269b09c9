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

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "covis/server/room.hpp"
#include "covis/volume/io.hpp"

namespace covis::server {

/// Dataset ids are single path components of [A-Za-z0-9_.-], never "." or "..".
inline bool valid_dataset_id(std::string_view id) {
  if (id.empty() || id.size() > 128 || id == "." || id == "..") return false;
  return std::all_of(id.begin(), id.end(), [](char ch) {
    return (ch >= 'a' && ch <= 'z') || (ch >= 'A' && ch <= 'Z') || (ch >= '0' && ch <= '9') || ch == '_' ||
           ch == '-' || ch == '.';
  });
}

inline bool valid_room_id(std::string_view id) { return valid_dataset_id(id); }

/// Datasets live at <dir>/<dataset_id>/header.json, as written by gen-lattice.
inline DatasetResolver directory_resolver(std::filesystem::path dir) {
  return [dir = std::move(dir)](const std::string& id) -> std::optional<protocol::DatasetInfo> {
    if (!valid_dataset_id(id)) return std::nullopt;
    try {
      const auto header_path = dir / id / "header.json";
      if (!std::filesystem::exists(header_path)) return std::nullopt;
      const auto text = detail::read_all(header_path);
      const VolumeHeader h = parse_volume_header(std::string(text.begin(), text.end()));
      return protocol::DatasetInfo{id, h.dims, h.spacing};
    } catch (const std::exception&) {
      return std::nullopt;
    }
  };
}

/// Rooms by id. Rooms are created on first join and dropped once they have been
/// empty for the configured TTL.
class RoomRegistry {
 public:
  explicit RoomRegistry(RoomConfig config, DatasetResolver resolver = {})
      : config_(config), resolver_(std::move(resolver)) {}

  Room& get_or_create(const std::string& id) {
    auto it = rooms_.find(id);
    if (it == rooms_.end()) it = rooms_.emplace(id, std::make_unique<Room>(id, config_, resolver_)).first;
    return *it->second;
  }

  Room* find(const std::string& id) {
    const auto it = rooms_.find(id);
    return it == rooms_.end() ? nullptr : it->second.get();
  }

  json list_rooms() const {
    json out = json::array();
    for (const auto& [id, room] : rooms_)
      out.push_back({{"room_id", id},
                     {"clients", room->client_count()},
                     {"hash", protocol::hash_hex(room->hash())},
                     {"next_seq", room->next_seq()}});
    return out;
  }

  std::optional<std::uint64_t> room_hash(const std::string& id) const {
    const auto it = rooms_.find(id);
    if (it == rooms_.end()) return std::nullopt;
    return it->second->hash();
  }

  template <typename Fn>
  void for_each(Fn&& fn) {
    for (auto& [id, room] : rooms_) fn(*room);
  }

  void collect_garbage(TimeMs now) {
    std::erase_if(rooms_, [&](const auto& kv) {
      const auto since = kv.second->empty_since();
      return since && now - *since >= config_.empty_room_ttl_ms;
    });
  }

  std::size_t size() const { return rooms_.size(); }

 private:
  RoomConfig config_;
  DatasetResolver resolver_;
  std::map<std::string, std::unique_ptr<Room>> rooms_;
};

}  // namespace covis::server
