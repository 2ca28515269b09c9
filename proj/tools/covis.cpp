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

// covis command-line entry point: serve, gen-lattice, slice, bot, sim.
//
// Exit codes: 0 success, 1 runtime failure, 2 usage error.
// Machine-readable output goes to stdout as JSON; human text goes to stderr.

#include <CLI11.hpp>
#include <boost/asio/signal_set.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "covis/cli/args.hpp"
#include "covis/protocol/hash.hpp"
#include "covis/server/ws_server.hpp"
#include "covis/sim/harness.hpp"
#include "covis/sim/live.hpp"
#include "covis/volume/io.hpp"
#include "covis/volume/lattice.hpp"
#include "covis/volume/pipeline.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using covis::cli::UsageError;

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw UsageError("cannot read " + p.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(p.string() + ": " + e.what());
  }
}

std::string config_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_array()) {
    std::string out;
    for (const auto& item : v) {
      if (!out.empty()) out += ",";
      out += config_value(item);
    }
    return out;
  }
  return v.dump();
}

// Flags pick up COVIS_<FLAG> from the environment, then values from --config.
// Precedence: command line, environment, config file, built-in default.
void apply_env_and_config(CLI::App& sub, const std::optional<json>& config) {
  for (CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (opt->get_lnames().empty() || name == "help" || name == "config") continue;
    std::string env = "COVIS_";
    for (char c : name) env += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    opt->envname(env);
    if (config && config->contains(name) && opt->get_items_expected_max() == 1)
      opt->run_callback_for_default()->default_val(config_value(config->at(name)));
  }
}

std::optional<json> load_config(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config") {
      json j = read_json_file(argv[i + 1]);
      if (!j.is_object()) throw UsageError("--config must hold a JSON object");
      return j;
    }
    if (a.starts_with("--config=")) {
      json j = read_json_file(a.substr(9));
      if (!j.is_object()) throw UsageError("--config must hold a JSON object");
      return j;
    }
  }
  return std::nullopt;
}

void print_json(const json& j) { std::cout << j.dump(2) << "\n" << std::flush; }

// ---- serve -------------------------------------------------------------------

struct ServeArgs {
  std::string bind{"127.0.0.1:8080"};
  int tick_ms{50};
  int max_clients{16};
  std::string datasets_dir;
  long heartbeat_ms{5000};
  std::size_t max_queue{1024};
};

int run_serve(const ServeArgs& a) {
  covis::server::ServerConfig cfg;
  const auto colon = a.bind.rfind(':');
  if (colon == std::string::npos) throw UsageError("--bind must be host:port, got '" + a.bind + "'");
  cfg.bind_host = a.bind.substr(0, colon);
  const int port = covis::cli::parse_int(std::string_view(a.bind).substr(colon + 1));
  if (port < 0 || port > 65535) throw UsageError("bad port in --bind '" + a.bind + "'");
  boost::system::error_code addr_ec;
  boost::asio::ip::make_address(cfg.bind_host, addr_ec);
  if (addr_ec) throw UsageError("bad address in --bind '" + a.bind + "'");
  cfg.port = static_cast<unsigned short>(port);
  cfg.room.tick_ms = a.tick_ms;
  cfg.room.max_clients = a.max_clients;
  cfg.room.heartbeat_ms = a.heartbeat_ms;
  cfg.max_outbound_queue = a.max_queue;
  if (!a.datasets_dir.empty()) {
    if (!fs::is_directory(a.datasets_dir)) throw UsageError("--datasets-dir '" + a.datasets_dir + "' is not a directory");
    cfg.datasets_dir = a.datasets_dir;
  }

  covis::server::Server server(cfg, [](const std::string& line) { std::cerr << "covis: " << line << std::endl; });
  boost::asio::ip::tcp::endpoint ep;
  try {
    ep = server.start();
  } catch (const boost::system::system_error& e) {
    throw RuntimeFailure("cannot bind " + a.bind + ": " + e.code().message());
  }
  boost::asio::signal_set signals(server.context(), SIGINT, SIGTERM);
  signals.async_wait([&](const boost::system::error_code& ec, int) {
    if (!ec) server.stop();
  });
  const std::string host = ep.address().to_string();
  print_json({{"address", host}, {"port", ep.port()}, {"url", "ws://" + host + ":" + std::to_string(ep.port())}});
  std::cerr << "covis: listening on " << host << ":" << ep.port() << std::endl;
  server.run();
  std::cerr << "covis: shut down" << std::endl;
  return kOk;
}

// ---- gen-lattice -------------------------------------------------------------

struct LatticeArgs {
  std::string cells;
  int cell_size{32};
  double strut_radius{2.5};
  std::vector<std::string> defects;
  std::string out;
  bool json{false};
};

int run_gen_lattice(LatticeArgs a, const std::optional<json>& config) {
  if (a.defects.empty() && config && config->contains("defect"))
    for (const auto& d : config->at("defect")) a.defects.push_back(d.get<std::string>());
  covis::LatticeParams p;
  p.cells = covis::cli::parse_ints<3>(a.cells);
  p.cell_size_vox = a.cell_size;
  p.strut_radius_vox = a.strut_radius;
  for (const auto& d : a.defects) p.defects.push_back(covis::cli::parse_defect(d));
  covis::Volume v;
  try {
    v = covis::generate_octet_lattice(p);
  } catch (const std::logic_error& e) {
    throw UsageError(e.what());
  }
  try {
    covis::save_volume_u8(v, a.out);
  } catch (const std::exception& e) {
    throw RuntimeFailure(e.what());
  }
  const auto filled = covis::count_filled(v);
  const double fraction = covis::fill_fraction(v);
  if (a.json) {
    print_json({{"out", a.out},
                {"dims", {v.dims[0], v.dims[1], v.dims[2]}},
                {"filled", filled},
                {"fill_fraction", fraction},
                {"digest", covis::protocol::hash_hex(covis::volume_digest(v))}});
  }
  std::cerr << "wrote " << a.out << " (" << v.dims[0] << "x" << v.dims[1] << "x" << v.dims[2]
            << "), fill fraction " << fraction << "\n";
  return kOk;
}

// ---- slice -------------------------------------------------------------------

struct SliceArgs {
  std::string dataset;
  std::string axis;
  int index{-1};
  std::string plane;
  std::string extent;
  std::string res;
  double window{1.0};
  double level{0.5};
  std::string colormap;
  std::string out;
};

fs::path header_path(const std::string& dataset) {
  const fs::path p(dataset);
  return fs::is_directory(p) ? p / "header.json" : p;
}

int run_slice(const SliceArgs& a) {
  const bool by_axis = !a.axis.empty();
  const bool by_plane = !a.plane.empty();
  if (by_axis == by_plane) throw UsageError("give exactly one of --axis or --plane");
  if (!(a.window > 0.0)) throw UsageError("--window must be > 0");
  const fs::path out(a.out);
  const std::string ext = out.extension().string();
  if (ext != ".pgm" && ext != ".ppm") throw UsageError("--out must end in .pgm or .ppm");
  const bool color = ext == ".ppm";
  if (!color && !a.colormap.empty() && a.colormap != "grayscale")
    throw UsageError("colormap '" + a.colormap + "' needs a .ppm output");
  const std::string cmap = a.colormap.empty() ? "grayscale" : a.colormap;
  if (!covis::is_colormap_name(cmap)) throw UsageError("unknown colormap '" + cmap + "'");

  covis::SliceSpec spec;
  if (by_axis) {
    if (a.index < 0) throw UsageError("--axis needs --index >= 0");
    try {
      spec = covis::AxisSliceSpec{covis::parse_slice_axis(a.axis), a.index};
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  } else {
    if (a.extent.empty() || a.res.empty()) throw UsageError("--plane needs --extent and --res");
    const auto pn = covis::cli::parse_reals<6>(a.plane);
    covis::Vec3 n{pn[3], pn[4], pn[5]};
    if (!(covis::norm(n) > 0.0)) throw UsageError("plane normal must be non-zero");
    n = covis::normalized(n);
    const auto ext2 = covis::cli::parse_reals<2>(a.extent);
    const auto res2 = covis::cli::parse_ints<2>(a.res);
    if (ext2[0] < 0 || ext2[1] < 0) throw UsageError("--extent must be >= 0");
    if (res2[0] < 2 || res2[1] < 2 || res2[0] > 8192 || res2[1] > 8192) throw UsageError("--res must be in [2, 8192]");
    spec = covis::ObliqueSliceSpec{{pn[0], pn[1], pn[2]}, n, ext2, res2};
  }

  covis::Volume v;
  try {
    v = covis::load_volume(header_path(a.dataset));
  } catch (const std::exception& e) {
    throw RuntimeFailure(e.what());
  }
  covis::Image2D img;
  try {
    const covis::Image2D scalars = covis::sample_slice(v, spec).image;
    const covis::Image2D windowed = covis::apply_window_level(scalars, {a.window, a.level});
    img = color ? covis::apply_colormap(windowed, covis::colormap_by_name(cmap)) : windowed;
  } catch (const std::out_of_range& e) {
    throw UsageError(e.what());
  }
  try {
    covis::export_image(img, out, color ? covis::ImageFormat::ppm : covis::ImageFormat::pgm);
  } catch (const std::exception& e) {
    throw RuntimeFailure(e.what());
  }
  std::cerr << "wrote " << a.out << " (" << img.width << "x" << img.height << ")\n";
  return kOk;
}

// ---- bot ---------------------------------------------------------------------

struct BotArgs {
  std::string connect;
  std::string room;
  std::string script;
  long timeout_ms{120000};
  long linger_ms{500};
};

int run_bot(const BotArgs& a) {
  const auto url = covis::sim::parse_ws_url(a.connect);
  if (!url) throw UsageError("--connect must look like ws://host:port, got '" + a.connect + "'");
  if (!covis::server::valid_room_id(a.room)) throw UsageError("bad room id '" + a.room + "'");
  covis::sim::BotScript script;
  try {
    script = covis::sim::parse_script(read_json_file(a.script));
  } catch (const covis::sim::ScriptError& e) {
    throw UsageError(e.what());
  }
  const auto r = covis::sim::run_live_bot(*url, a.room, std::move(script), {a.linger_ms, a.timeout_ms});
  json rejections = json::object();
  for (const auto& [reason, n] : r.stats.rejections) rejections[reason] = n;
  print_json({{"ok", r.ok},
              {"error", r.error},
              {"user_id", r.user_id},
              {"hash", covis::protocol::hash_hex(r.hash)},
              {"connections", r.connections},
              {"frames_sent", r.stats.frames_sent},
              {"frames_received", r.stats.frames_received},
              {"grants", r.stats.grants},
              {"rejections", rejections}});
  if (!r.ok) {
    std::cerr << "covis bot: " << (r.error.empty() ? "failed" : r.error) << "\n";
    return kRuntime;
  }
  return kOk;
}

// ---- sim ---------------------------------------------------------------------

struct SimArgs {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::string report;
};

int run_simulation(const SimArgs& a) {
  covis::sim::Scenario s;
  try {
    const fs::path path(a.scenario);
    s = covis::sim::parse_scenario(read_json_file(path), path.parent_path());
  } catch (const covis::sim::ScriptError& e) {
    throw UsageError(e.what());
  }
  if (a.seed) s.seed = *a.seed;
  const auto report = covis::sim::run_sim(s);
  const std::string text = covis::sim::report_to_json(report).dump(2) + "\n";
  if (!a.report.empty()) {
    std::ofstream out(a.report, std::ios::binary);
    out << text;
    if (!out) throw RuntimeFailure("cannot write " + a.report);
  }
  std::cout << text << std::flush;
  const bool ok = report.convergence.ok() && report.quiescent;
  std::cerr << "sim " << s.name << " seed " << s.seed << ": " << (ok ? "converged" : "NOT converged")
            << ", pose bandwidth ratio " << report.pose_bandwidth_ratio() << ", max queue " << report.max_queue_depth
            << ", report hash " << covis::protocol::hash_hex(covis::protocol::fnv1a64(text)) << "\n";
  return ok ? kOk : kRuntime;
}

int run(int argc, char** argv) {
  CLI::App app{"covis: collaborative volume inspection server and tools"};
  app.require_subcommand(1);
  std::string config_path;

  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config_path, "JSON file of flag defaults"); };

  ServeArgs serve;
  auto* s_serve = app.add_subcommand("serve", "run the session server");
  s_serve->add_option("--bind", serve.bind, "host:port to listen on (port 0 picks one)");
  s_serve->add_option("--tick-ms", serve.tick_ms, "broadcast tick period")->check(CLI::Range(1, 60000));
  s_serve->add_option("--max-clients", serve.max_clients, "clients per room")->check(CLI::Range(1, 4096));
  s_serve->add_option("--datasets-dir", serve.datasets_dir, "directory of <dataset_id>/header.json");
  s_serve->add_option("--heartbeat-ms", serve.heartbeat_ms, "idle time before a ping")->check(CLI::Range(1L, 3600000L));
  s_serve->add_option("--max-queue", serve.max_queue, "per-client outbound backlog limit")
      ->check(CLI::Range(std::size_t{1}, std::size_t{1} << 20));
  add_config(s_serve);

  LatticeArgs lat;
  auto* s_lat = app.add_subcommand("gen-lattice", "write a synthetic octet-lattice volume");
  s_lat->add_option("--cells", lat.cells, "cells per axis, X,Y,Z")->required();
  s_lat->add_option("--cell-size", lat.cell_size, "cell edge in voxels");
  s_lat->add_option("--strut-radius", lat.strut_radius, "strut radius in voxels");
  s_lat->add_option("--defect", lat.defects, "kind@cx,cy,cz:strut:magnitude (repeatable)");
  s_lat->add_option("--out", lat.out, "output directory")->required();
  s_lat->add_flag("--json", lat.json, "print a JSON summary on stdout");
  add_config(s_lat);

  SliceArgs sl;
  auto* s_slice = app.add_subcommand("slice", "export an axis or oblique slice as PGM/PPM");
  s_slice->add_option("--dataset", sl.dataset, "dataset directory or header.json")->required();
  s_slice->add_option("--axis", sl.axis, "axial, coronal or sagittal");
  s_slice->add_option("--index", sl.index, "slice index along the axis");
  s_slice->add_option("--plane", sl.plane, "px,py,pz,nx,ny,nz in dataset millimetres");
  s_slice->add_option("--extent", sl.extent, "W,H in millimetres");
  s_slice->add_option("--res", sl.res, "W,H in pixels");
  s_slice->add_option("--window", sl.window, "window width (> 0)");
  s_slice->add_option("--level", sl.level, "window centre");
  s_slice->add_option("--colormap", sl.colormap, "grayscale, viridis or coolwarm");
  s_slice->add_option("--out", sl.out, "output .pgm or .ppm")->required();
  add_config(s_slice);

  BotArgs bot;
  auto* s_bot = app.add_subcommand("bot", "run a scripted client against a live server");
  s_bot->add_option("--connect", bot.connect, "server URL, ws://host:port")->required();
  s_bot->add_option("--room", bot.room, "room id")->required();
  s_bot->add_option("--script", bot.script, "bot script JSON")->required();
  s_bot->add_option("--timeout-ms", bot.timeout_ms, "give up after this long")->check(CLI::Range(1L, 86400000L));
  s_bot->add_option("--linger-ms", bot.linger_ms, "stay connected after the last step")->check(CLI::Range(0L, 600000L));
  add_config(s_bot);

  SimArgs sim;
  std::uint64_t seed = 0;
  auto* s_sim = app.add_subcommand("sim", "run a deterministic network simulation");
  s_sim->add_option("--scenario", sim.scenario, "scenario JSON")->required();
  auto* seed_opt = s_sim->add_option("--seed", seed, "override the scenario seed");
  s_sim->add_option("--report", sim.report, "also write the report here");
  add_config(s_sim);

  const auto config = load_config(argc, argv);
  try {
    for (CLI::App* sub : {s_serve, s_lat, s_slice, s_bot, s_sim}) apply_env_and_config(*sub, config);
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "covis: " << e.what() << "\n";
    return kUsage;
  }

  if (s_serve->parsed()) return run_serve(serve);
  if (s_lat->parsed()) return run_gen_lattice(lat, config);
  if (s_slice->parsed()) return run_slice(sl);
  if (s_bot->parsed()) return run_bot(bot);
  if (seed_opt->count() > 0 || (config && config->contains("seed")) || std::getenv("COVIS_SEED")) sim.seed = seed;
  return run_simulation(sim);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "covis: " << e.what() << "\n";
    return kUsage;
  } catch (const RuntimeFailure& e) {
    std::cerr << "covis: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    std::cerr << "covis: " << e.what() << "\n";
    return kRuntime;
  }
}
