#pragma once

// Pixel-distance metrics and report tables.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "oostraj/geometry.hpp"
#include "oostraj/pipeline.hpp"
#include "oostraj/simulator.hpp"

namespace oostraj::metrics {

using geometry::PixelPoint;

enum class Distance { Euclidean, Squared };

std::string_view distance_name(Distance d);
Distance parse_distance(std::string_view s);

/// Mean over timestamps of the pixel distance between pred and gt (squared
/// distance in the Squared variant). Throws LengthMismatch / EmptyTrajectory.
double mse_t(std::span<const PixelPoint> pred, std::span<const PixelPoint> gt, Distance d = Distance::Euclidean);

using PredictFn = std::function<pipeline::Prediction(const sim::Scene&)>;

struct SceneScore {
  std::uint64_t seed = 0;
  double mse_d = 0.0, mse_p = 0.0;
};

struct EvalRow {
  std::string method;
  double mse_d = 0.0, mse_p = 0.0, sum = 0.0;
  int scenes = 0;
  std::size_t params = 0;
  std::vector<SceneScore> per_scene;  // sorted by seed
};

/// MSE-D / MSE-P averaged over scenes (processed in seed order), SUM = D + P.
/// Per-scene failures are rethrown with the scene seed in the message.
EvalRow evaluate(const std::string& method, const PredictFn& predict, const std::vector<sim::Scene>& scenes,
                 Distance d = Distance::Euclidean);

/// Held-out ground truth of the out-of-sight agent, split at t_obs.
pipeline::Prediction ground_truth(const sim::Scene& scene);

struct Report {
  std::string title;
  std::string split;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
  Distance distance = Distance::Euclidean;
  std::vector<EvalRow> rows;
};

/// method,split,scenes,params,SUM,MSE-D,MSE-P with a commented header.
std::string to_csv(const Report& r);
/// Table of rows; adds a kind x composition grid when baseline compositions
/// are present.
std::string to_markdown(const Report& r);
void write_report(const std::filesystem::path& stem, const Report& r);  // stem.csv + stem.md

}  // namespace oostraj::metrics
