#pragma once

// Run configuration: one JSON document with every tunable, full defaults
// built in. User files are overlaid on the defaults; unknown keys are
// rejected so typos cannot silently fall back to a default.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "oostraj/baselines.hpp"
#include "oostraj/metrics.hpp"
#include "oostraj/pipeline.hpp"
#include "oostraj/simulator.hpp"
#include "oostraj/train.hpp"

namespace oostraj::config {

using nlohmann::json;

struct Splits {
  int train = 64, val = 16, test = 16;
};

struct Benchmark {
  std::vector<std::uint64_t> seeds{0, 1, 2};  // training seeds for the seeded comparisons
  int epochs = 200;                          // matched budget for every learned method
};

struct RunConfig {
  std::uint64_t seed = 0;  // dataset seed
  sim::SimConfig sim;
  Splits splits;
  pipeline::ModelConfig model;
  train::TrainConfig train;
  baselines::SmootherParams smoother;
  metrics::Distance distance = metrics::Distance::Euclidean;
  std::vector<std::string> methods;  // default method list for eval
  Benchmark benchmark;
  std::string output_dir = "runs/default";

  /// Throws InvalidConfig naming the field.
  void validate() const;

  json to_json() const;
  /// Hash of the canonical data contract: seed, simulator settings, splits.
  std::string data_hash() const;
  /// Hash of the whole canonical document.
  std::string hash() const;
};

RunConfig defaults();

/// Profiles shipped with the repo: "desk" (the defaults) and "long"
/// (T_obs = T_pred = 100).
RunConfig profile(const std::string& name);

/// Overlays `user` on `base`. Accepts `sim.noise.preset` as a shorthand whose
/// values explicit noise keys override. Throws InvalidConfig naming the field.
RunConfig from_json(const json& user, const RunConfig& base = defaults());

/// Reads a config file (Io if unreadable, InvalidConfig if malformed).
RunConfig load(const std::filesystem::path& path);

}  // namespace oostraj::config
