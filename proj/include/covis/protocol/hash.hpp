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

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

#include "covis/protocol/session_state.hpp"

namespace covis::protocol {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

struct Fnv1a64 {
  std::uint64_t value{kFnvOffset};

  void update(std::string_view bytes) {
    for (unsigned char c : bytes) {
      value ^= c;
      value *= kFnvPrime;
    }
  }
};

inline std::uint64_t fnv1a64(std::string_view bytes) {
  Fnv1a64 h;
  h.update(bytes);
  return h.value;
}

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_string(std::string& out, std::string_view s) {
  out.push_back('s');
  put_u64(out, s.size());
  out.append(s);
}

}  // namespace detail

/// Tagged binary form of a JSON value:
///   null 'n' | bool 'b' 0/1 | integer 'i' int64 LE | real 'f' IEEE-754 binary64 LE |
///   string 's' u64-len bytes | array 'a' u64-count items | object 'o' u64-count
///   (string key, value)* with keys in lexicographic byte order.
inline void canonical_bytes(const json& j, std::string& out) {
  switch (j.type()) {
    case json::value_t::null: out.push_back('n'); break;
    case json::value_t::boolean:
      out.push_back('b');
      out.push_back(j.get<bool>() ? 1 : 0);
      break;
    case json::value_t::number_integer:
      out.push_back('i');
      detail::put_u64(out, static_cast<std::uint64_t>(j.get<std::int64_t>()));
      break;
    case json::value_t::number_unsigned:
      out.push_back('i');
      detail::put_u64(out, j.get<std::uint64_t>());
      break;
    case json::value_t::number_float:
      out.push_back('f');
      detail::put_u64(out, std::bit_cast<std::uint64_t>(j.get<double>()));
      break;
    case json::value_t::string: detail::put_string(out, j.get_ref<const std::string&>()); break;
    case json::value_t::array:
      out.push_back('a');
      detail::put_u64(out, j.size());
      for (const auto& v : j) canonical_bytes(v, out);
      break;
    case json::value_t::object:
      // nlohmann::json objects are std::map-ordered, i.e. sorted by key bytes.
      out.push_back('o');
      detail::put_u64(out, j.size());
      for (const auto& [k, v] : j.items()) {
        detail::put_string(out, k);
        canonical_bytes(v, out);
      }
      break;
    default: out.push_back('?'); break;
  }
}

inline std::string canonical_bytes(const json& j) {
  std::string out;
  canonical_bytes(j, out);
  return out;
}

inline std::uint64_t state_hash(const SessionState& s) { return fnv1a64(canonical_bytes(state_to_json(s))); }

inline std::string hash_hex(std::uint64_t h) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, h >>= 4) out[static_cast<std::size_t>(i)] = digits[h & 0xf];
  return out;
}

}  // namespace covis::protocol
