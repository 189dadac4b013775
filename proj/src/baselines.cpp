#include "oostraj/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "oostraj/error.hpp"

namespace oostraj::baselines {

std::vector<WorldPoint> const_velocity(std::span<const WorldPoint> observed, int t_pred, int window) {
  if (observed.size() < 2) throw Error(Errc::TooShort, "const_velocity needs at least 2 observed points");
  if (window < 1) throw Error(Errc::InvalidConfig, "const_velocity window must be >= 1");
  const std::size_t n = observed.size();
  const std::size_t w = std::min<std::size_t>(static_cast<std::size_t>(window), n - 1);
  const Eigen::Vector3d step = (observed[n - 1].vec() - observed[n - 1 - w].vec()) / static_cast<double>(w);
  std::vector<WorldPoint> out;
  Eigen::Vector3d p = observed[n - 1].vec();
  for (int t = 0; t < t_pred; ++t) {
    p += step;
    out.push_back({p.x(), p.y(), p.z()});
  }
  return out;
}

Smoothed smoother(std::span<const WorldPoint> noisy, const SmootherParams& params) {
  const std::size_t T = noisy.size();
  if (T < 2) throw Error(Errc::TooShort, "smoother needs at least 2 points");
  if (!(params.dt > 0.0) || params.accel_sigma < 0.0 || params.measurement_sigma < 0.0)
    throw Error(Errc::InvalidConfig, "smoother: dt must be positive and sigmas non-negative");

  using M2 = Eigen::Matrix2d;
  using V2 = Eigen::Vector2d;
  const double dt = params.dt;
  M2 F;
  F << 1.0, dt, 0.0, 1.0;
  const double q = params.accel_sigma * params.accel_sigma;
  M2 Q;
  Q << q * dt * dt * dt * dt / 4.0, q * dt * dt * dt / 2.0, q * dt * dt * dt / 2.0, q * dt * dt;
  const double R = params.measurement_sigma * params.measurement_sigma;
  const Eigen::RowVector2d H(1.0, 0.0);

  Smoothed out;
  out.position.resize(T);
  out.velocity.resize(T);
  std::vector<V2> xf(T), xp(T);
  std::vector<M2> Pf(T), Pp(T);
  for (int axis = 0; axis < 3; ++axis) {
    auto z = [&](std::size_t t) { return noisy[t].vec()(axis); };
    // Forward filter. The velocity prior is wide so the first few
    // measurements determine it.
    xp[0] = V2(z(0), 0.0);
    Pp[0] << R, 0.0, 0.0, 100.0;
    for (std::size_t t = 0; t < T; ++t) {
      if (t > 0) {
        xp[t] = F * xf[t - 1];
        Pp[t] = F * Pf[t - 1] * F.transpose() + Q;
      }
      const double S = (H * Pp[t] * H.transpose())(0, 0) + R;
      if (S > 0.0) {
        const V2 K = Pp[t] * H.transpose() / S;
        xf[t] = xp[t] + K * (z(t) - xp[t](0));
        Pf[t] = (M2::Identity() - K * H) * Pp[t];
      } else {
        xf[t] = xp[t];
        Pf[t] = Pp[t];
      }
    }
    // Backward pass.
    V2 xs = xf[T - 1];
    auto store = [&](std::size_t t, const V2& x) {
      Eigen::Vector3d p = out.position[t].vec();
      p(axis) = x(0);
      out.position[t] = {p.x(), p.y(), p.z()};
      out.velocity[t](axis) = x(1);
    };
    store(T - 1, xs);
    for (std::size_t t = T - 1; t-- > 0;) {
      const M2 C = Pf[t] * F.transpose() * Pp[t + 1].completeOrthogonalDecomposition().pseudoInverse();
      xs = xf[t] + C * (xs - xp[t + 1]);
      store(t, xs);
    }
  }
  return out;
}

namespace {

constexpr double kMinDepth = 1e-6;

std::vector<geometry::PixelPoint> project_window(const sim::Scene& scene, std::span<const WorldPoint> pts, std::size_t first) {
  if (scene.cameras.size() != static_cast<std::size_t>(scene.total_steps()))
    throw Error(Errc::InsufficientData, "scene " + std::to_string(scene.seed) + " carries no ground-truth cameras");
  // Same division rule as the learned projection: a noisy estimate that lands
  // behind the camera is scored, not rejected.
  std::vector<geometry::PixelPoint> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Eigen::Vector3d h = scene.cameras[first + i].m * Eigen::Vector4d(pts[i].x, pts[i].y, pts[i].z, 1.0);
    const double den = std::copysign(std::max(std::abs(h(2)), kMinDepth), h(2));
    out.push_back({h(0) / den, h(1) / den});
  }
  return out;
}

std::span<const WorldPoint> observed_sensor(const sim::Scene& scene) {
  return std::span<const WorldPoint>(scene.out_of_sight().sensor).first(static_cast<std::size_t>(scene.t_obs));
}

}  // namespace

pipeline::Prediction predict_const_velocity(const sim::Scene& scene, int window) {
  const auto obs = observed_sensor(scene);
  const auto future = const_velocity(obs, scene.t_pred, window);
  return {project_window(scene, obs, 0), project_window(scene, future, obs.size())};
}

pipeline::Prediction predict_smoother(const sim::Scene& scene, const SmootherParams& params) {
  const auto obs = observed_sensor(scene);
  const Smoothed s = smoother(obs, params);
  std::vector<WorldPoint> future;
  Eigen::Vector3d p = s.position.back().vec();
  for (int t = 0; t < scene.t_pred; ++t) {
    p += s.velocity.back() * params.dt;
    future.push_back({p.x(), p.y(), p.z()});
  }
  return {project_window(scene, s.position, 0), project_window(scene, future, obs.size())};
}

}  // namespace oostraj::baselines
