#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include "oostraj/commands.hpp"
#include "oostraj/error.hpp"

using namespace oostraj;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag)
      : path(fs::temp_directory_path() / ("oostraj_" + tag + "_" + std::to_string(::getpid()))) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

config::RunConfig small(int train = 6, int test = 4) {
  auto c = config::defaults();
  c.splits = {train, 3, test};
  c.sim.t_obs = 8;
  c.sim.t_pred = 6;
  c.model.trunk = {16, 1, 2, 2};
  c.train.epochs = 2;
  c.train.batch_size = 4;
  c.benchmark.seeds = {0, 1};
  c.benchmark.epochs = 2;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an oostraj::Error");
  return Errc::Io;
}

std::vector<std::map<std::string, std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::vector<std::string> header;
  std::vector<std::map<std::string, std::string>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line.starts_with("#")) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    if (header.empty()) {
      header = cols;
      continue;
    }
    std::map<std::string, std::string> row;
    for (std::size_t i = 0; i < header.size() && i < cols.size(); ++i) row[header[i]] = cols[i];
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

TEST_CASE("exit codes") {
  CHECK(cmd::exit_code(Errc::InvalidConfig) == 2);
  CHECK(cmd::exit_code(Errc::Io) == 3);
  CHECK(cmd::exit_code(Errc::HashMismatch) == 4);
  CHECK(cmd::exit_code(Errc::NonFiniteLoss) == 5);
  CHECK(cmd::exit_code(Errc::InsufficientData) == 6);
  CHECK(cmd::exit_code(Errc::Schema) == 7);
  CHECK(cmd::exit_code(Errc::ShapeMismatch) == 1);
}

TEST_CASE("simulate, train, eval") {
  TempDir dir("cmd");
  std::ostringstream log;
  const auto cfg = small();
  cmd::simulate(cfg, dir.path / "data", log);
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl", "manifest.json", "config.json"})
    CHECK(fs::exists(dir.path / "data" / f));

  const auto ckpts = cmd::train(cfg, dir.path / "data", dir.path / "models", {{"ours", "smoother"}, false}, log);
  REQUIRE(ckpts.size() == 1);  // smoother has nothing to train
  CHECK(fs::exists(dir.path / "models/ours/last.ckpt"));
  CHECK(read_csv(dir.path / "models/ours/log.csv").size() == 2);

  SUBCASE("eval writes both formats and reruns identically") {
    const auto rep = cmd::eval(cfg, dir.path / "data", dir.path / "a", {{"ours", "smoother"}, {dir.path / "models"}, "test"}, log);
    REQUIRE(rep.rows.size() == 2);
    CHECK(rep.rows[0].scenes == 4);
    cmd::eval(cfg, dir.path / "data", dir.path / "b", {{"ours", "smoother"}, {dir.path / "models"}, "test"}, log);
    CHECK(slurp(dir.path / "a/eval.csv") == slurp(dir.path / "b/eval.csv"));
    CHECK(slurp(dir.path / "a/eval.md") == slurp(dir.path / "b/eval.md"));
  }
  SUBCASE("unknown method") {
    CHECK(code_of([&] { cmd::eval(cfg, dir.path / "data", dir.path / "x", {{"bogus"}, {}, "test"}, log); }) == Errc::InvalidConfig);
  }
  SUBCASE("explicitly requested method without a checkpoint") {
    CHECK(code_of([&] { cmd::eval(cfg, dir.path / "data", dir.path / "x", {{"no_cpe"}, {dir.path / "models"}, "test"}, log); }) ==
          Errc::Io);
  }
  SUBCASE("checkpoint from a different dataset") {
    auto other = cfg;
    other.seed = 99;
    cmd::simulate(other, dir.path / "other", log);
    CHECK(code_of([&] { cmd::eval(other, dir.path / "other", dir.path / "x", {{"ours"}, {dir.path / "models"}, "test"}, log); }) ==
          Errc::HashMismatch);
  }
  SUBCASE("missing dataset") {
    CHECK(code_of([&] { cmd::train(cfg, dir.path / "nowhere", dir.path / "m", {}, log); }) == Errc::Io);
  }
}

TEST_CASE("ablate") {
  TempDir dir("ablate");
  std::ostringstream log;
  const auto cfg = small(4, 3);
  cmd::simulate(cfg, dir.path / "data", log);
  const auto b = cmd::ablate(cfg, dir.path / "data", dir.path / "out", log);
  std::vector<std::string> names;
  for (const auto& r : b.report.rows) names.push_back(r.method);
  CHECK(names == std::vector<std::string>{"full", "w/o CPE", "w/o MDE", "w/o VPP", "w/o OPD"});
  CHECK(b.runs.size() == 10);
  CHECK(read_csv(dir.path / "out/ablation.csv").size() == 5);
  CHECK(slurp(dir.path / "out/ablation.md").find("seeds `0 1`") != std::string::npos);
}

TEST_CASE("median run") {
  std::vector<cmd::SeededRun> runs;
  for (double s : {5.0, 1.0, 3.0, 4.0}) {
    cmd::SeededRun r{"m", static_cast<std::uint64_t>(s), {}};
    r.row.sum = s;
    runs.push_back(r);
  }
  CHECK(cmd::median_run(runs, "m").row.sum == 3.0);  // lower median
  runs.pop_back();
  CHECK(cmd::median_run(runs, "m").row.sum == 3.0);
  CHECK_THROWS_AS(cmd::median_run(runs, "other"), Error);
}

TEST_CASE("calibrate") {
  TempDir dir("calib");
  std::ostringstream log;
  auto cfg = small(2, 3);
  cfg.sim.noise = {sim::NoiseKind::Gps, 0.0, 0.0};

  SUBCASE("static camera: one exact matrix per scene") {
    cfg.sim.camera_motion = sim::CameraMotion::Static;
    cmd::simulate(cfg, dir.path / "data", log);
    const auto rows = cmd::calibrate(dir.path / "data", dir.path / "out", log);
    CHECK(rows.size() == 8);
    for (const auto& r : rows) {
      CHECK(r.static_camera);
      CHECK(r.matrices == 1);
      CHECK(r.error_px < 1e-6);
    }
    CHECK(read_csv(dir.path / "out/calibration.csv").size() == 8);
  }
  SUBCASE("moving camera with enough agents: exact per timestamp") {
    cfg.sim.n_agents = 8;
    cmd::simulate(cfg, dir.path / "data", log);
    for (const auto& r : cmd::calibrate(dir.path / "data", dir.path / "out", log)) {
      CHECK_FALSE(r.static_camera);
      CHECK(r.max_window == 1);
      CHECK(r.matrices == 14);
      CHECK(r.error_px < 1e-6);
    }
  }
  SUBCASE("moving camera, few agents: pooled windows carry the motion error") {
    cmd::simulate(cfg, dir.path / "data", log);
    for (const auto& r : cmd::calibrate(dir.path / "data", dir.path / "out", log)) {
      CHECK(r.max_window > 1);
      CHECK(r.error_px > 0.0);
    }
  }
  SUBCASE("sensor noise shows up as positive error") {
    cfg.sim.noise.gps_sigma = 0.5;
    cmd::simulate(cfg, dir.path / "data", log);
    for (const auto& r : cmd::calibrate(dir.path / "data", dir.path / "out", log)) CHECK(r.error_px > 0.0);
  }
  SUBCASE("too few correspondences") {
    cfg.sim.n_agents = 2;
    cfg.sim.t_obs = 2;
    cfg.sim.t_pred = 1;
    cmd::simulate(cfg, dir.path / "data", log);
    CHECK(code_of([&] { cmd::calibrate(dir.path / "data", dir.path / "out", log); }) == Errc::InsufficientData);
  }
}

TEST_CASE("import") {
  TempDir dir("import");
  std::ostringstream log;
  const auto cfg = small(2, 3);
  cmd::simulate(cfg, dir.path / "data", log);

  const auto m = cmd::import_dataset(dir.path / "data", dir.path / "copy", log);
  CHECK(m.source == "import");
  for (const char* f : {"train.jsonl", "val.jsonl", "test.jsonl"})
    CHECK(slurp(dir.path / "data" / f) == slurp(dir.path / "copy" / f));

  SUBCASE("single file becomes the test split") {
    const auto single = cmd::import_dataset(dir.path / "data/test.jsonl", dir.path / "one", log);
    CHECK(single.split("test").count == 3);
  }
  SUBCASE("schema violations name the line and field") {
    std::string text = slurp(dir.path / "data/test.jsonl");
    const auto second = text.find('\n') + 1;
    const auto at = text.find("\"visible\"", second);
    REQUIRE(at != std::string::npos);
    text.replace(at, 9, "\"visibleX\"");
    fs::create_directories(dir.path / "bad");
    std::ofstream(dir.path / "bad/test.jsonl") << text;
    try {
      cmd::import_dataset(dir.path / "bad/test.jsonl", dir.path / "bad_out", log);
      FAIL("expected Schema");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::Schema);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
      CHECK(std::string(e.what()).find("visible") != std::string::npos);
    }
  }
}
