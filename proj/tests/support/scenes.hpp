#pragma once

// Small simulator fixtures shared by the pipeline, baseline and eval tests.

#include <vector>

#include "oostraj/simulator.hpp"

namespace oostraj::testing {

inline sim::SimConfig small_sim(int t_obs = 8, int t_pred = 6, double gps_sigma = 0.0) {
  sim::SimConfig cfg;
  cfg.t_obs = t_obs;
  cfg.t_pred = t_pred;
  cfg.noise = {sim::NoiseKind::Gps, gps_sigma, 0.0};
  return cfg;
}

inline std::vector<sim::Scene> scenes(const sim::SimConfig& cfg, std::uint64_t first, int n) {
  std::vector<sim::Scene> out;
  for (int i = 0; i < n; ++i) out.push_back(sim::make_scene(cfg, first + static_cast<std::uint64_t>(i)));
  return out;
}

}  // namespace oostraj::testing
