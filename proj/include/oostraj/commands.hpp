#pragma once

// The command layer behind the CLI and the Python module. Every command
// throws oostraj::Error; exit_code() maps the error to the process exit code.
//
// Output layout:
//   simulate  <out>/{train,val,test}.jsonl, manifest.json, config.json
//   train     <out>/<method>/{best.ckpt,last.ckpt,log.csv}
//   eval      <out>/eval.{csv,md}
//   ablate    <out>/ablation.{csv,md}, ablation_runs.csv
//   report    <out>/benchmark.{csv,md}, benchmark_runs.csv
//   calibrate <out>/calibration.csv
//   import    <out>/{train,val,test}.jsonl, manifest.json

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "oostraj/config.hpp"
#include "oostraj/error.hpp"
#include "oostraj/metrics.hpp"
#include "oostraj/scene_io.hpp"

namespace oostraj::cmd {

namespace fs = std::filesystem;

/// 2 config, 3 I/O, 4 hash, 5 numeric, 6 insufficient data, 7 schema, 1 other.
int exit_code(Errc code);

struct SimulateResult {
  io::Manifest manifest;
};
SimulateResult simulate(const config::RunConfig& cfg, const fs::path& out, std::ostream& log);

struct TrainOptions {
  std::vector<std::string> methods{"ours"};
  bool resume = false;  // continue from <out>/<method>/last.ckpt when present
};
/// Trains each learned method on the dataset's train split (validation on
/// val). Non-learned methods are skipped with a note. Returns the best
/// checkpoint path per trained method.
std::vector<fs::path> train(const config::RunConfig& cfg, const fs::path& dataset, const fs::path& out,
                            const TrainOptions& opt, std::ostream& log);

struct EvalOptions {
  std::vector<std::string> methods;      // empty: the config's method list
  std::vector<fs::path> checkpoints;     // files, or directories holding <method>/best.ckpt
  std::string split = "test";
};
metrics::Report eval(const config::RunConfig& cfg, const fs::path& dataset, const fs::path& out, const EvalOptions& opt,
                     std::ostream& log);

/// Trains `method` with the config's model and training settings but the
/// given seed and epoch budget, and scores the best-validation model on
/// `test`. Non-learned methods are evaluated directly.
metrics::EvalRow train_and_score(const config::RunConfig& cfg, const std::string& method, std::uint64_t seed, int epochs,
                                 const std::vector<sim::Scene>& train, const std::vector<sim::Scene>& val,
                                 const std::vector<sim::Scene>& test, const std::string& data_hash);

struct SeededRun {
  std::string method;
  std::uint64_t seed = 0;
  metrics::EvalRow row;
};

/// The run whose SUM is the median over seeds (lower median for an even count).
const SeededRun& median_run(const std::vector<SeededRun>& runs, const std::string& method);

struct BenchmarkResult {
  std::vector<SeededRun> runs;
  metrics::Report report;  // one row per method: its median run
};

/// Seeded comparison over cfg.benchmark.seeds with cfg.benchmark.epochs per
/// learned method.
BenchmarkResult benchmark(const config::RunConfig& cfg, const fs::path& dataset, const std::vector<std::string>& methods,
                          std::ostream& log);

/// Full model and its four ablations, same data, seeds and budget. Rows are
/// named full, w/o CPE, w/o MDE, w/o VPP, w/o OPD.
BenchmarkResult ablate(const config::RunConfig& cfg, const fs::path& dataset, const fs::path& out, std::ostream& log);

/// report: benchmark() over the config's method list, written to <out>.
BenchmarkResult report(const config::RunConfig& cfg, const fs::path& dataset, const fs::path& out,
                       const std::vector<std::string>& methods, std::ostream& log);

struct CalibrationRow {
  std::string split;
  std::uint64_t seed = 0;
  bool static_camera = false;
  int matrices = 0;         // 1 for a static camera, else calibrated timestamps
  int correspondences = 0;
  double error_px = 0.0;    // mean distance between estimated and true projections
  int max_window = 0;       // longest run of timestamps pooled into one matrix
};
/// Per-scene DLT from in-sight agents (sensor position, exact projection of
/// the true position). Static cameras pool every timestamp into one matrix.
/// Moving cameras get one matrix per window of consecutive timestamps, each
/// window as short as possible while holding >= 6 correspondences.
/// Throws InsufficientData when no scene qualifies.
std::vector<CalibrationRow> calibrate(const fs::path& dataset, const fs::path& out, std::ostream& log);

/// Imports a generic-schema JSONL file (as the test split) or a directory of
/// {train,val,test}.jsonl and writes a validated dataset with a fresh manifest.
io::Manifest import_dataset(const fs::path& source, const fs::path& out, std::ostream& log);

}  // namespace oostraj::cmd
