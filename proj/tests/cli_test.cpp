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

#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <nlohmann/json.hpp>

#include "covis/protocol/hash.hpp"
#include "covis/volume/io.hpp"
#include "covis/volume/lattice.hpp"
#include "support/support.hpp"

namespace {

using nlohmann::json;
namespace ct = covis::testing;

const std::string kCovis = COVIS_BINARY;

// Runs covis with stderr captured into the temp dir.
struct Cli {
  ct::TempDir dir;

  ct::CommandResult run(const std::string& args, const std::string& env = "") {
    return ct::run_command(env + " " + ct::shell_quote(kCovis) + " " + args + " 2>" +
                           ct::shell_quote((dir / "stderr.txt").string()));
  }
  std::string err() { return ct::read_file(dir / "stderr.txt"); }
  std::string path(const std::string& name) { return (dir / name).string(); }
};

TEST(Cli, GenLatticeRoundTripsThroughItsDigest) {
  Cli c;
  const auto r = c.run("gen-lattice --cells 2,2,2 --cell-size 32 --strut-radius 2.5 --json --out " + c.path("lat"));
  ASSERT_EQ(r.exit_code, 0) << c.err();
  const json summary = json::parse(r.out);
  const json meta = json::parse(ct::read_file(ct::fixture("lattice_2x2x2.json")));
  EXPECT_EQ(summary.at("filled"), meta.at("filled"));
  EXPECT_EQ(summary.at("dims"), json({64, 64, 64}));
  const covis::Volume v = covis::load_volume(c.dir / "lat/header.json");
  EXPECT_EQ(covis::protocol::hash_hex(covis::volume_digest(v)), summary.at("digest"));
}

TEST(Cli, GenLatticeDefectsChangeTheVolume) {
  Cli c;
  const auto base = c.run("gen-lattice --cells 1,1,1 --json --out " + c.path("a"));
  const auto defect =
      c.run("gen-lattice --cells 1,1,1 --json --defect missing_strut@0,0,0:3:1 --defect pore@0,0,0:30:0.7 --out " + c.path("b"));
  ASSERT_EQ(base.exit_code, 0);
  ASSERT_EQ(defect.exit_code, 0) << c.err();
  EXPECT_LT(json::parse(defect.out).at("filled").get<long>(), json::parse(base.out).at("filled").get<long>());
}

TEST(Cli, MalformedArgumentsExitWithUsageCode) {
  Cli c;
  const std::vector<std::string> bad{
      "gen-lattice --cells 2,2 --out " + c.path("x"),
      "gen-lattice --cells 1,1,1 --defect pore@0,0:3:0.5 --out " + c.path("x"),
      "gen-lattice --cells 1,1,1 --defect crack@0,0,0:3:0.5 --out " + c.path("x"),
      "gen-lattice --cells 1,1,1 --defect pore@4,0,0:3:0.5 --out " + c.path("x"),
      "gen-lattice --cells 1,1,1 --defect pore@0,0,0:36:0.5 --out " + c.path("x"),
      "gen-lattice --cells 1,1,1 --strut-radius 40 --out " + c.path("x"),
      "gen-lattice --cells 1,1,1",
      "serve --tick-ms 0",
      "serve --bind nowhere",
      "serve --bind 127.0.0.1:99999",
      "serve --datasets-dir /nonexistent/dir",
      "sim --scenario /nonexistent/scenario.json",
      "bot --connect http://x --room r --script /dev/null",
      "frobnicate",
      "",
  };
  for (const auto& args : bad) {
    const auto r = c.run(args);
    EXPECT_EQ(r.exit_code, 2) << args << "\n" << c.err();
    EXPECT_FALSE(c.err().empty()) << args;
  }
}

TEST(Cli, BadScenarioIsAUsageError) {
  Cli c;
  ct::write_file(c.dir / "s.json", R"({"name":"x","duration_ms":1000,"clients":[{"script":{"name":"a","actions":[]}}]})");
  EXPECT_EQ(c.run("sim --scenario " + c.path("s.json")).exit_code, 2);
  ct::write_file(c.dir / "s.json", "{not json");
  EXPECT_EQ(c.run("sim --scenario " + c.path("s.json")).exit_code, 2);
}

class Slicing : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto r = c.run("gen-lattice --cells 2,2,2 --cell-size 32 --strut-radius 2.5 --out " + c.path("lat"));
    ASSERT_EQ(r.exit_code, 0) << c.err();
  }
  Cli c;
};

TEST_F(Slicing, AxisSliceMatchesGolden) {
  const auto r = c.run("slice --dataset " + c.path("lat") + " --axis axial --index 32 --out " + c.path("a.pgm"));
  ASSERT_EQ(r.exit_code, 0) << c.err();
  EXPECT_EQ(ct::read_file(c.dir / "a.pgm"), ct::read_file(ct::fixture("lattice_2x2x2_axial32.pgm")));
}

TEST_F(Slicing, AxisAlignedPlaneIsByteIdenticalToAxisSlice) {
  struct Case {
    const char* axis;
    const char* plane;
  };
  for (const Case& k : {Case{"axial", "31.5,31.5,20,0,0,1"}, Case{"coronal", "31.5,20,31.5,0,-1,0"},
                        Case{"sagittal", "20,31.5,31.5,1,0,0"}}) {
    SCOPED_TRACE(k.axis);
    ASSERT_EQ(c.run("slice --dataset " + c.path("lat/header.json") + " --axis " + k.axis + " --index 20 --out " +
                    c.path("axis.pgm"))
                  .exit_code,
              0)
        << c.err();
    ASSERT_EQ(c.run("slice --dataset " + c.path("lat") + " --plane " + k.plane + " --extent 63,63 --res 64,64 --out " +
                    c.path("plane.pgm"))
                  .exit_code,
              0)
        << c.err();
    EXPECT_EQ(ct::read_file(c.dir / "axis.pgm"), ct::read_file(c.dir / "plane.pgm"));
  }
}

TEST_F(Slicing, WindowAndColormapOptions) {
  ASSERT_EQ(c.run("slice --dataset " + c.path("lat") +
                  " --axis coronal --index 5 --window 0.5 --level 0.5 --colormap viridis --out " + c.path("c.ppm"))
                .exit_code,
            0)
      << c.err();
  const auto img = covis::read_pnm(c.dir / "c.ppm");
  EXPECT_EQ(img.channels, 3);
  EXPECT_EQ(img.width, 64);

  const std::string ds = " --dataset " + c.path("lat");
  for (const std::string& args :
       {"slice" + ds + " --axis axial --index 1 --window 0 --out " + c.path("w.pgm"),
        "slice" + ds + " --axis axial --index 1 --window -1 --out " + c.path("w.pgm"),
        "slice" + ds + " --axis axial --index 64 --out " + c.path("w.pgm"),
        "slice" + ds + " --axis oblique --index 1 --out " + c.path("w.pgm"),
        "slice" + ds + " --axis axial --index 1 --plane 0,0,0,0,0,1 --out " + c.path("w.pgm"),
        "slice" + ds + " --plane 0,0,0,0,0,0 --extent 1,1 --res 4,4 --out " + c.path("w.pgm"),
        "slice" + ds + " --plane 0,0,0,0,0,1 --out " + c.path("w.pgm"),
        "slice" + ds + " --axis axial --index 1 --colormap viridis --out " + c.path("w.pgm"),
        "slice" + ds + " --axis axial --index 1 --colormap jet --out " + c.path("w.ppm"),
        "slice" + ds + " --axis axial --index 1 --out " + c.path("w.png")})
    EXPECT_EQ(c.run(args).exit_code, 2) << args;
  EXPECT_EQ(c.run("slice --dataset " + c.path("missing") + " --axis axial --index 1 --out " + c.path("w.pgm")).exit_code,
            1);
}

TEST(Cli, ConfigEnvAndFlagPrecedence) {
  Cli c;
  ct::write_file(c.dir / "cfg.json", R"({"cell-size": 16, "strut-radius": 1.5})");
  auto dims = [&](const std::string& extra, const std::string& env = "") {
    const auto r = c.run("gen-lattice --cells 2,1,1 --json --config " + c.path("cfg.json") + " --out " +
                             c.path("o") + " " + extra,
                         env);
    EXPECT_EQ(r.exit_code, 0) << c.err();
    return json::parse(r.out).at("dims").at(0).get<int>();
  };
  EXPECT_EQ(dims(""), 32);
  EXPECT_EQ(dims("", "COVIS_CELL_SIZE=20"), 40);
  EXPECT_EQ(dims("--cell-size 24", "COVIS_CELL_SIZE=20"), 48);
  ct::write_file(c.dir / "bad.json", "[1]");
  EXPECT_EQ(c.run("gen-lattice --cells 1,1,1 --config " + c.path("bad.json") + " --out " + c.path("o")).exit_code, 2);
}

TEST(Cli, SimReportMatchesGolden) {
  Cli c;
  const auto r = c.run("sim --scenario " + ct::shell_quote(ct::fixture("sim_small.json").string()) + " --report " +
                       c.path("report.json"));
  ASSERT_EQ(r.exit_code, 0) << c.err();
  const auto golden = ct::fixture("sim_small_report.json");
  if (ct::updating_goldens()) ct::write_file(golden, r.out);
  EXPECT_EQ(r.out, ct::read_file(golden));
  EXPECT_EQ(ct::read_file(c.dir / "report.json"), r.out);
  const json report = json::parse(r.out);
  EXPECT_TRUE(report.at("converged").get<bool>());
  EXPECT_EQ(report.at("seed"), 42);

  const auto other = c.run("sim --seed 43 --scenario " + ct::shell_quote(ct::fixture("sim_small.json").string()));
  ASSERT_EQ(other.exit_code, 0) << c.err();
  EXPECT_EQ(json::parse(other.out).at("seed"), 43);
  EXPECT_NE(other.out, r.out);
}

std::string http_get(unsigned short port, const std::string& target) {
  namespace beast = boost::beast;
  namespace http = beast::http;
  boost::asio::io_context ioc;
  beast::tcp_stream stream(ioc);
  stream.expires_after(std::chrono::seconds(10));
  stream.connect(boost::asio::ip::tcp::endpoint(boost::asio::ip::make_address("127.0.0.1"), port));
  http::request<http::empty_body> req{http::verb::get, target, 11};
  req.set(http::field::host, "127.0.0.1");
  http::write(stream, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(stream, buf, res);
  return res.body();
}

TEST(Cli, ServeAndBotEndToEnd) {
  Cli c;
  ASSERT_EQ(c.run("gen-lattice --cells 2,2,2 --out " + c.path("data/lattice")).exit_code, 0) << c.err();
  ct::Process server({kCovis, "serve", "--bind", "127.0.0.1:0", "--tick-ms", "20", "--datasets-dir", c.path("data")},
                     c.dir / "serve.log");
  // The banner is a small pretty-printed JSON object.
  std::string banner;
  for (int n = 0; n < 10 && (banner.empty() || banner.back() != '}'); ++n) banner += server.read_line();
  ASSERT_FALSE(banner.empty()) << ct::read_file(c.dir / "serve.log");
  const auto port = json::parse(banner).at("port").get<unsigned short>();

  const json header = json::parse(http_get(port, "/datasets/lattice/header.json"));
  EXPECT_EQ(header.at("dims"), json({64, 64, 64}));
  EXPECT_EQ(http_get(port, "/datasets/lattice/raw").size(), 64u * 64u * 64u);

  const auto bot = c.run("bot --connect ws://127.0.0.1:" + std::to_string(port) + " --room lab --linger-ms 300 --script " +
                         ct::shell_quote((ct::source_dir() / "docs/examples/bot_script.json").string()));
  ASSERT_EQ(bot.exit_code, 0) << c.err();
  const json result = json::parse(bot.out);
  EXPECT_TRUE(result.at("ok").get<bool>());
  EXPECT_EQ(result.at("user_id"), "inspector");
  EXPECT_EQ(result.at("grants"), 1);

  const json rooms = json::parse(http_get(port, "/admin/rooms"));
  ASSERT_EQ(rooms.size(), 1u);
  EXPECT_EQ(rooms[0].at("room_id"), "lab");
  EXPECT_EQ(rooms[0].at("clients"), 0);

  EXPECT_EQ(server.terminate(), 0);
  const std::string log = ct::read_file(c.dir / "serve.log");
  const auto join = log.find("join room=lab user=inspector");
  const auto leave = log.find("leave room=lab user=inspector");
  EXPECT_NE(join, std::string::npos) << log;
  EXPECT_NE(leave, std::string::npos) << log;
  EXPECT_LT(join, leave);
}

TEST(Cli, HelpExitsCleanly) {
  Cli c;
  const auto r = c.run("--help");
  EXPECT_EQ(r.exit_code, 0);
  EXPECT_NE(r.out.find("gen-lattice"), std::string::npos);
}

}  // namespace
