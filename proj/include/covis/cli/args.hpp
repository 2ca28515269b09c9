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
#include <cmath>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "covis/volume/lattice.hpp"

namespace covis::cli {

/// A flag value that does not parse. The message names the offending token.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline int parse_int(std::string_view tok) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (tok.empty() || ec != std::errc{} || ptr != tok.data() + tok.size())
    throw UsageError("bad integer '" + std::string(tok) + "'");
  return v;
}

inline double parse_real(std::string_view tok) {
  const std::string s(tok);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (s.empty() || used != s.size() || !std::isfinite(v)) throw UsageError("bad number '" + s + "'");
  return v;
}

template <std::size_t N>
std::array<int, N> parse_ints(std::string_view s) {
  const auto parts = split(s, ',');
  if (parts.size() != N) throw UsageError("expected " + std::to_string(N) + " comma-separated integers in '" + std::string(s) + "'");
  std::array<int, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = parse_int(parts[i]);
  return out;
}

template <std::size_t N>
std::array<double, N> parse_reals(std::string_view s) {
  const auto parts = split(s, ',');
  if (parts.size() != N) throw UsageError("expected " + std::to_string(N) + " comma-separated numbers in '" + std::string(s) + "'");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = parse_real(parts[i]);
  return out;
}

/// "kind@cx,cy,cz:strut:magnitude", e.g. "missing_strut@0,0,0:3:1.0".
inline DefectSpec parse_defect(std::string_view s) {
  const auto at = s.find('@');
  if (at == std::string_view::npos) throw UsageError("defect '" + std::string(s) + "' needs kind@cell:strut:magnitude");
  DefectSpec d;
  try {
    d.kind = parse_defect_kind(s.substr(0, at));
  } catch (const std::invalid_argument&) {
    throw UsageError("unknown defect kind '" + std::string(s.substr(0, at)) + "'");
  }
  const auto parts = split(s.substr(at + 1), ':');
  if (parts.size() != 3) throw UsageError("defect '" + std::string(s) + "' needs kind@cell:strut:magnitude");
  d.cell = parse_ints<3>(parts[0]);
  d.strut = parse_int(parts[1]);
  d.magnitude = parse_real(parts[2]);
  if (d.strut < 0 || d.strut >= kOctetStrutsPerCell)
    throw UsageError("defect strut '" + std::string(parts[1]) + "' outside [0, " + std::to_string(kOctetStrutsPerCell) + ")");
  if (!(d.magnitude > 0.0 && d.magnitude <= 1.0))
    throw UsageError("defect magnitude '" + std::string(parts[2]) + "' outside (0, 1]");
  return d;
}

}  // namespace covis::cli
