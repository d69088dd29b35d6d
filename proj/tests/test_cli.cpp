#include "cli_util.hpp"

#include <doctest.h>
#include <json.hpp>

using testing::mvflow;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kSmallConfig = R"({
  "preset": "semantickitti",
  "rv": {"height": 16, "width": 512, "fov_up_deg": 3.0, "fov_down_deg": -25.0},
  "bev": {"radial_bins": 96, "angular_bins": 72, "z_bins": 8}
})";

fs::path small_workspace(const std::string& name) {
  const auto dir = testing::scratch_dir(name);
  std::ofstream(dir / "small.json") << kSmallConfig;
  return dir;
}

json read_json(const fs::path& p) { return json::parse(testing::slurp(p)); }

}  // namespace

TEST_CASE("usage errors exit with 2") {
  const auto dir = small_workspace("usage");
  CHECK(mvflow(dir, {}).code == 2);
  CHECK(mvflow(dir, {"frobnicate"}).code == 2);
  CHECK(mvflow(dir, {"synth", "--preset", "waymo"}).code == 2);
  CHECK(mvflow(dir, {"synth", "--jobs", "0"}).code == 2);
  const auto missing = mvflow(dir, {"project", "nope.bin"});
  CHECK(missing.code == 2);
  CHECK(missing.output.find("nope.bin") != std::string::npos);
  std::ofstream(dir / "bad.json") << "{ not json";
  CHECK(mvflow(dir, {"synth", "--config", "bad.json"}).code == 2);
  CHECK(mvflow(dir, {"project", "x.bin", "--view", "top"}).code == 2);
  CHECK(mvflow(dir, {"eval", "--pred", "a.label"}).code == 2);
  CHECK(mvflow(dir, {"synth", "--config", "small.json", "--out", "s"}).code == 0);
  CHECK(mvflow(dir, {"flow", "s/scan_0000.bin", "--config", "small.json", "--scales", "0,1"}).code == 2);
  CHECK(mvflow(dir, {"fuse", "s/scan_0000.bin"}).code == 2);
  fs::remove_all(dir);
}

TEST_CASE("processing failures exit with 1") {
  const auto dir = small_workspace("failure");
  std::ofstream(dir / "broken.bin", std::ios::binary) << std::string(17, '\0');
  const auto r = mvflow(dir, {"project", "broken.bin"});
  CHECK(r.code == 1);
  CHECK(r.output.find("broken.bin") != std::string::npos);

  REQUIRE(mvflow(dir, {"synth", "--config", "small.json", "--count", "2", "--out", "s"}).code == 0);
  std::ofstream(dir / "short.label", std::ios::binary) << std::string(8, '\0');
  const auto e = mvflow(dir, {"eval", "--pred", "short.label", "--gt", "s/scan_0000.label"});
  CHECK(e.code == 1);
  CHECK(e.output.find("short.label") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("synth, project, flow, eval, bench and fuse end to end") {
  const auto dir = small_workspace("pipeline");
  REQUIRE(mvflow(dir, {"synth", "--config", "small.json", "--count", "2", "--seed", "5", "--out", "s"}).code == 0);
  CHECK(fs::file_size(dir / "s/scan_0001.bin") == 16u * 512u * 16u);
  CHECK(fs::file_size(dir / "s/scan_0001.label") == 16u * 512u * 4u);

  const auto rv = mvflow(dir, {"project", "s/scan_0000.bin", "s/scan_0001.bin", "--config", "small.json", "--out", "p",
                               "--plot"});
  REQUIRE(rv.code == 0);
  CHECK(rv.output.find("rate 1.000000") != std::string::npos);
  CHECK(fs::exists(dir / "p/scan_0000.rv.gfvw"));
  CHECK(fs::exists(dir / "p/project_rv.json"));
  REQUIRE(mvflow(dir, {"project", "s/scan_0000.bin", "--view", "bev", "--config", "small.json", "--out", "p"}).code == 0);
  CHECK(fs::exists(dir / "p/scan_0000.bev.gfvw"));

  REQUIRE(mvflow(dir, {"flow", "s/scan_0000.bin", "--config", "small.json", "--scales", "1,0.5", "--channels", "8",
                       "--out", "f"})
              .code == 0);
  const auto flow = read_json(dir / "f/flow.json");
  CHECK(flow.contains("levels"));
  CHECK(fs::exists(dir / "f/fused_rv_s0.gfvw"));
  CHECK(fs::exists(dir / "f/b2r_s1.gfvw"));

  REQUIRE(mvflow(dir, {"flow", "s/scan_0000.bin", "--config", "small.json", "--channels", "8", "--zero-attention",
                       "--out", "z"})
              .code == 0);
  CHECK(testing::slurp(dir / "z/fused_rv_s0.gfvw") == testing::slurp(dir / "z/input_rv_s0.gfvw"));

  const auto ev = mvflow(dir, {"eval", "--pred", "s/scan_0000.label", "--gt", "s/scan_0000.label", "--config",
                               "small.json", "--out", "e", "--plot"});
  REQUIRE(ev.code == 0);
  const auto e = read_json(dir / "e/eval.json");
  CHECK(e["miou"].get<double>() == 1.0);
  CHECK(e["accuracy"].get<double>() == 1.0);
  CHECK(e["fwiou"].get<double>() == 1.0);
  CHECK(fs::exists(dir / "e/confusion.pgm"));

  REQUIRE(mvflow(dir, {"bench", "--config", "small.json", "--repeat", "2", "--channels", "8", "--head", "knn", "--out",
                       "b"})
              .code == 0);
  const auto b = read_json(dir / "b/bench.json");
  CHECK(b["stages"].contains("flow_s8"));
  CHECK(b["pipeline"]["samples"].get<int>() == 2);

  REQUIRE(mvflow(dir, {"fuse", "s/scan_0000.bin", "--labels", "s/scan_0000.label", "--config", "small.json", "--out",
                       "u"})
              .code == 0);
  const auto u = read_json(dir / "u/fuse.json");
  CHECK(u["loss"].contains("total"));
  CHECK(fs::file_size(dir / "u/fused.label") == 16u * 512u * 4u);
  REQUIRE(mvflow(dir, {"fuse", "s/scan_0000.bin", "--labels", "s/scan_0000.label", "--config", "small.json", "--head",
                       "knn", "--k", "3", "--out", "k"})
              .code == 0);
  fs::remove_all(dir);
}

TEST_CASE("reruns are byte identical across worker counts") {
  // same relative paths in both runs, since reports record their inputs
  const auto dir = testing::scratch_dir("determinism");
  for (const std::string jobs : {"1", "3"}) {
    const auto wd = dir / ("jobs" + jobs);
    fs::create_directories(wd);
    std::ofstream(wd / "small.json") << kSmallConfig;
    const std::string out = "out";
    const std::vector<std::vector<std::string>> steps = {
        {"synth", "--count", "2", "--seed", "9", "--dropout", "0.1"},
        {"project", out + "/scan_0000.bin", out + "/scan_0001.bin", "--variant", "original"},
        {"flow", out + "/scan_0000.bin", "--scales", "1,0.5,0.25", "--channels", "8", "--seed", "4"},
        {"fuse", out + "/scan_0000.bin", "--labels", out + "/scan_0000.label", "--seed", "2"},
        {"eval", "--pred", out + "/fused.label", "--gt", out + "/scan_0000.label"},
        {"bench", "--repeat", "1", "--channels", "8"},
    };
    for (auto args : steps) {
      args.insert(args.end(), {"--config", "small.json", "--out", out, "--jobs", jobs});
      const auto r = mvflow(wd, args);
      INFO(args.front() << ": " << r.output);
      REQUIRE(r.code == 0);
    }
  }
  auto a = testing::tree(dir / "jobs1/out"), b = testing::tree(dir / "jobs3/out");
  for (auto* t : {&a, &b}) {
    t->erase("timing.json");
    t->erase("bench.json");
  }
  CHECK(a.size() == b.size());
  for (const auto& [name, bytes] : a) {
    INFO(name);
    REQUIRE(b.count(name) == 1);
    CHECK(b.at(name) == bytes);
  }
  fs::remove_all(dir);
}
