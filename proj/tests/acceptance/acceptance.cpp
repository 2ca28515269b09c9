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

// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "covis/protocol/protocol.hpp"
#include "covis/sim/harness.hpp"
#include "covis/volume/cutout.hpp"
#include "covis/volume/intensity.hpp"
#include "covis/volume/io.hpp"
#include "covis/volume/lattice.hpp"
#include "covis/volume/sampling.hpp"
#include "support/oracles.hpp"
#include "support/support.hpp"
#include "support/trace_gen.hpp"

namespace {

using namespace covis;
using nlohmann::json;
namespace ct = covis::testing;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool ok{true};
  std::ostringstream detail;

  // Records a failed condition; only the first message is kept.
  void require(bool cond, const std::string& what) {
    if (cond || !ok) {
      ok = ok && cond;
      return;
    }
    ok = false;
    failure = what;
  }
  std::string failure;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

void trilinear(Outcome& o) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> dim(4, 8);
  double worst = 0.0;
  for (int vol = 0; vol < 50; ++vol) {
    const Volume v = ct::random_volume(rng, {dim(rng), dim(rng), dim(rng)});
    for (int n = 0; n < 100; ++n) {
      double p[3];
      for (int a = 0; a < 3; ++a) p[a] = std::uniform_real_distribution<double>(0.0, v.dims[a] - 1)(rng);
      worst = std::max(worst, std::abs(sample_trilinear(v, {p[0], p[1], p[2]}) - ct::trilinear_oracle(v, p[0], p[1], p[2])));
    }
  }
  const double secs = seconds_since(t0);
  o.require(worst <= 1e-6, "max error above 1e-6");
  o.require(secs < 5.0, "took 5 s or more");
  o.detail << "5000 samples, max_err=" << worst << ", " << secs << " s";
}

void slice_equivalence(Outcome& o) {
  std::mt19937_64 rng(102);
  const Vec3 spacing{0.5, 1.25, 2.0};
  const Volume v = ct::random_volume(rng, {5, 6, 7}, spacing, {-3.0, 10.0, 0.75});
  struct Case {
    SliceAxis axis;
    Vec3 normal;
  };
  double worst = 0.0;
  std::size_t exact = 0;
  for (const Case& c : {Case{SliceAxis::axial, {0, 0, 1}}, Case{SliceAxis::coronal, {0, -1, 0}},
                        Case{SliceAxis::sagittal, {1, 0, 0}}}) {
    const int a = static_cast<int>(c.axis);
    const int ca = c.axis == SliceAxis::sagittal ? 1 : 0;
    const int ra = c.axis == SliceAxis::axial ? 1 : 2;
    for (int index = 0; index < v.dims[a]; ++index) {
      const Image2D img = extract_axis_slice(v, c.axis, index);
      for (int row = 0; row < img.height; ++row)
        for (int col = 0; col < img.width; ++col) {
          int ijk[3];
          ijk[a] = index;
          ijk[ca] = col;
          ijk[ra] = row;
          const float want = v.data[ijk[0] + 5 * (ijk[1] + 6 * ijk[2])];
          o.require(img.value(row, col) == want, "axis slice differs from direct indexing");
          ++exact;
        }
      Vec3 center = v.world(2.0, 2.5, 3.0);
      const Vec3 at = v.world(index, index, index);
      (a == 0 ? center.x : a == 1 ? center.y : center.z) = at[a];
      const std::array<double, 2> extent{(v.dims[ca] - 1) * spacing[ca], (v.dims[ra] - 1) * spacing[ra]};
      const Image2D obl = extract_oblique_slice(v, center, c.normal, extent, {v.dims[ca], v.dims[ra]});
      o.require(obl.width == img.width && obl.height == img.height, "oblique slice has the wrong size");
      if (obl.scalars.size() != img.scalars.size()) continue;
      for (std::size_t n = 0; n < img.scalars.size(); ++n)
        worst = std::max(worst, std::abs(double(obl.scalars[n]) - double(img.scalars[n])));
    }
  }
  o.require(worst <= 1e-6, "oblique slice error above 1e-6");
  o.detail << exact << " pixels exact, oblique max_err=" << worst;
}

void cutout_partition(Outcome& o) {
  std::mt19937_64 rng(103);
  std::uniform_real_distribution<double> c(-10, 10);
  std::uniform_real_distribution<double> e(0.5, 6);
  std::normal_distribution<double> g;
  const PlaneState off{};
  int inside = 0;
  int boxes = 0;
  for (int n = 0; n < 1000; ++n) {
    Region r;
    if (std::bernoulli_distribution(0.5)(rng)) {
      r = Region::sphere({c(rng), c(rng), c(rng)}, e(rng), RegionMode::inclusive);
    } else {
      const Quat q = normalized(Quat{g(rng), g(rng), g(rng), g(rng)});
      r = Region::box({{c(rng), c(rng), c(rng)}, q, std::uniform_real_distribution<double>(0.5, 2)(rng)},
                      {e(rng), e(rng), e(rng)}, RegionMode::inclusive);
    }
    const Vec3 p = r.pose.position + Vec3{c(rng), c(rng), c(rng)} * 0.75;
    const bool vis_in = visible(p, off, std::span<const Region>(&r, 1));
    r.mode = RegionMode::exclusive;
    const bool vis_ex = visible(p, off, std::span<const Region>(&r, 1));
    o.require(vis_in != vis_ex, "inclusive and exclusive agree at some point");
    inside += vis_in;
    if (r.shape == RegionShape::box) {
      const double slack = ct::box_slack_oracle(r, p);
      if (std::abs(slack) < 1e-9) continue;
      ++boxes;
      o.require(region_contains(r, p) == (slack > 0), "rotated box disagrees with the quaternion oracle");
    }
  }
  o.require(inside > 0 && inside < 1000, "degenerate sample: every point on one side");
  o.detail << "1000 pairs, " << inside << " inside, " << boxes << " rotated boxes checked";
}

void window_level(Outcome& o) {
  std::mt19937_64 rng(104);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const WindowLevel identity{1.0, 0.5};
  for (int n = 0; n < 10000; ++n) {
    const double x = unit(rng);
    o.require(window_level_value(x, identity) == x, "not the identity at (1, 0.5)");
  }
  std::uniform_real_distribution<double> wide(-0.5, 1.5);
  std::uniform_real_distribution<double> width(0.01, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> xs(500);
    for (double& x : xs) x = wide(rng);
    std::sort(xs.begin(), xs.end());
    const WindowLevel wl{width(rng), wide(rng)};
    double prev = -1.0;
    for (double x : xs) {
      const double y = window_level_value(x, wl);
      o.require(y >= prev, "not monotone");
      prev = y;
    }
  }
  const double hand = window_level_value(0.3, {0.2, 0.35});
  o.require(std::abs(hand - 0.25) <= 1e-12, "hand value is not 0.25");
  o.detail.precision(17);
  o.detail << "hand value " << hand;
}

void protocol_determinism(Outcome& o) {
  using namespace covis::protocol;
  const auto t0 = Clock::now();
  int passes = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    SessionState a;
    SessionState b;
    for (const Envelope& e : ct::random_trace(seed, 200)) {
      apply_delta_in_place(a, e);
      b = apply_delta(b, e).first;
    }
    passes += state_hash(a) == state_hash(b);
  }
  const double secs = seconds_since(t0);
  o.require(passes == 100, "replicas diverged");
  o.require(secs < 10.0, "took 10 s or more");
  o.detail << passes << "/100 seeds, " << secs << " s";
}

void snapshot_fidelity(Outcome& o) {
  using namespace covis::protocol;
  std::size_t states = 0;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    SessionState s;
    for (const Envelope& e : ct::random_trace(seed, 200)) {
      apply_delta_in_place(s, e);
      const SessionState back = apply_snapshot(decode(encode(make_snapshot(s))));
      o.require(state_hash(back) == state_hash(s), "snapshot changed the hash");
      ++states;
    }
  }
  o.detail << states << " states";
}

void harness_convergence(Outcome& o) {
  const auto t0 = Clock::now();
  const auto s = sim::parse_scenario(json::parse(ct::read_file(ct::source_dir() / "docs/examples/convergence_8bots.json")));
  o.require(s.clients.size() == 8, "scenario does not have 8 clients");
  const sim::SimReport r = sim::run_sim(s);
  const double secs = seconds_since(t0);
  const double ratio = r.pose_bandwidth_ratio();
  o.require(r.quiescent, "not quiescent");
  o.require(r.convergence.ok(), "clients not hash-equal");
  o.require(r.disconnects == 2 && r.reconnects == 2, "expected 2 disconnect/reconnect cycles");
  o.require(r.max_queue_depth <= 64, "queue depth above 64");
  o.require(ratio < 0.30, "coalesced pose bytes not below 30% of baseline");
  o.require(secs < 30.0, "took 30 s or more");
  o.detail << "converged=" << r.convergence.ok() << " max_queue=" << r.max_queue_depth << " pose_ratio=" << ratio
           << " disconnects=" << r.disconnects << " reconnects=" << r.reconnects << ", " << secs << " s";
}

void lattice_generator(Outcome& o) {
  LatticeParams p;
  p.cells = {2, 2, 2};
  p.cell_size_vox = 32;
  p.strut_radius_vox = 2.5;
  const Volume v = generate_octet_lattice(p);
  const json meta = json::parse(ct::read_file(ct::fixture("lattice_2x2x2.json")));
  o.require(fill_fraction(v) == meta.at("fill_fraction").get<double>(), "fill fraction differs from fixture");
  o.require(encode_pnm(extract_axis_slice(v, SliceAxis::axial, 32)) ==
                ct::read_file(ct::fixture("lattice_2x2x2_axial32.pgm")),
            "mid-slice PGM differs from golden");
  const auto base = count_filled(v);
  struct Case {
    DefectKind kind;
    double magnitude;
    int direction;
  };
  int checked = 0;
  for (const Case& c : {Case{DefectKind::missing_strut, 1.0, -1}, Case{DefectKind::broken_strut, 0.3, -1},
                        Case{DefectKind::thin_strut, 0.5, -1}, Case{DefectKind::pore, 0.8, -1},
                        Case{DefectKind::dross, 0.8, +1}}) {
    for (int strut = 0; strut < kOctetStrutsPerCell; ++strut) {
      LatticeParams d = p;
      d.defects.push_back({c.kind, {1, 0, 1}, strut, c.magnitude});
      const auto n = count_filled(generate_octet_lattice(d));
      o.require(c.direction < 0 ? n < base : n > base,
                std::string(to_string(c.kind)) + " moved the fill count the wrong way");
      ++checked;
    }
  }
  o.detail << "fill_fraction=" << fill_fraction(v) << ", " << checked << " defect cases";
}

struct Cli {
  ct::TempDir dir;
  ct::CommandResult run(const std::string& args) {
    return ct::run_command(ct::shell_quote(COVIS_BINARY) + " " + args + " 2>>" +
                           ct::shell_quote((dir / "stderr.txt").string()));
  }
  std::string path(const std::string& name) { return ct::shell_quote((dir / name).string()); }
};

void cli_round_trips(Outcome& o) {
  Cli c;
  const auto gen = c.run("gen-lattice --cells 2,2,2 --cell-size 32 --strut-radius 2.5 --out " + c.path("lat"));
  o.require(gen.exit_code == 0, "gen-lattice failed");
  LatticeParams p;
  p.cells = {2, 2, 2};
  p.cell_size_vox = 32;
  p.strut_radius_vox = 2.5;
  const Volume ref = generate_octet_lattice(p);
  const Volume back = load_volume(c.dir / "lat/header.json");
  o.require(back.dims == ref.dims && back.data == ref.data, "loaded volume differs from the generated one");

  struct Case {
    const char* axis;
    const char* plane;
  };
  int identical = 0;
  for (const Case& k : {Case{"axial", "31.5,31.5,20,0,0,1"}, Case{"coronal", "31.5,20,31.5,0,-1,0"},
                        Case{"sagittal", "20,31.5,31.5,1,0,0"}}) {
    const std::string a = std::string(k.axis) + "_axis.pgm";
    const std::string b = std::string(k.axis) + "_plane.pgm";
    const int ra = c.run("slice --dataset " + c.path("lat") + " --axis " + k.axis + " --index 20 --out " + c.path(a)).exit_code;
    const int rb = c.run("slice --dataset " + c.path("lat") + " --plane " + k.plane +
                         " --extent 63,63 --res 64,64 --out " + c.path(b))
                       .exit_code;
    o.require(ra == 0 && rb == 0, "slice failed");
    const bool same = ra == 0 && rb == 0 && ct::read_file(c.dir / a) == ct::read_file(c.dir / b);
    o.require(same, std::string(k.axis) + ": plane and axis slices differ");
    identical += same;
  }

  const auto sim = c.run("sim --scenario " + ct::shell_quote(ct::fixture("sim_small.json").string()));
  o.require(sim.exit_code == 0, "sim failed");
  o.require(sim.out == ct::read_file(ct::fixture("sim_small_report.json")), "sim report differs from golden");
  o.detail << "lossless load, " << identical << "/3 slices byte-identical, sim report "
           << (sim.out == ct::read_file(ct::fixture("sim_small_report.json")) ? "matches" : "differs");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"trilinear-oracle", trilinear},
      {"slice-equivalence", slice_equivalence},
      {"cutout-partition", cutout_partition},
      {"window-level", window_level},
      {"protocol-determinism", protocol_determinism},
      {"snapshot-fidelity", snapshot_fidelity},
      {"harness-convergence", harness_convergence},
      {"lattice-generator", lattice_generator},
      {"cli-round-trips", cli_round_trips},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      check(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += !o.ok;
    std::cout << (o.ok ? "PASS " : "FAIL ") << name << ": " << o.detail.str();
    if (!o.ok) std::cout << " [" << o.failure << "]";
    std::cout << std::endl;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criterion(s) failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
