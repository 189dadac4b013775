#pragma once

// Non-learned reference methods. Both work in the world frame and are
// projected with the scene's ground-truth cameras, so they are diagnostic
// upper bounds rather than deployable methods.

#include <span>
#include <vector>

#include <Eigen/Core>

#include "oostraj/pipeline.hpp"
#include "oostraj/simulator.hpp"

namespace oostraj::baselines {

using geometry::WorldPoint;

/// Extrapolates the mean velocity of the last `window` observed steps (fewer
/// if the track is shorter). Throws TooShort for fewer than 2 points.
std::vector<WorldPoint> const_velocity(std::span<const WorldPoint> observed, int t_pred, int window = 10);

struct SmootherParams {
  double dt = 0.1;
  double accel_sigma = 1.0;        // m/s^2, white-noise acceleration
  double measurement_sigma = 2.0;  // m
};

struct Smoothed {
  std::vector<WorldPoint> position;
  std::vector<Eigen::Vector3d> velocity;
};

/// Constant-velocity Kalman filter plus Rauch-Tung-Striebel backward pass,
/// run independently per axis. Throws TooShort for fewer than 2 points.
Smoothed smoother(std::span<const WorldPoint> noisy, const SmootherParams& params);

/// Raw observed sensor track for the denoised window, const_velocity for the
/// future. Throws InsufficientData when the scene carries no cameras.
pipeline::Prediction predict_const_velocity(const sim::Scene& scene, int window = 10);

/// Smoothed track for the denoised window, the final smoothed velocity
/// extrapolated for the future.
pipeline::Prediction predict_smoother(const sim::Scene& scene, const SmootherParams& params);

}  // namespace oostraj::baselines
