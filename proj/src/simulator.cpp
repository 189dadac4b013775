#include "oostraj/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "oostraj/error.hpp"

namespace oostraj::sim {

std::string_view noise_kind_name(NoiseKind k) {
  switch (k) {
    case NoiseKind::Gps: return "gps";
    case NoiseKind::Odometer: return "odometer";
    case NoiseKind::Combined: return "combined";
  }
  return "?";
}

NoiseKind parse_noise_kind(std::string_view s) {
  if (s == "gps") return NoiseKind::Gps;
  if (s == "odometer") return NoiseKind::Odometer;
  if (s == "combined") return NoiseKind::Combined;
  throw Error(Errc::InvalidConfig, "noise.kind: unknown kind '" + std::string(s) + "'");
}

void NoiseModel::validate() const {
  if (!(gps_sigma >= 0.0 && gps_sigma <= 10.0)) throw Error(Errc::InvalidConfig, "noise.gps_sigma must lie in [0, 10]");
  if (!(drift_step_sigma >= 0.0 && drift_step_sigma <= 1.0))
    throw Error(Errc::InvalidConfig, "noise.drift_step_sigma must lie in [0, 1]");
}

NoiseModel noise_preset(std::string_view name) {
  if (name == "clean") return {NoiseKind::Combined, 0.0, 0.0};
  if (name == "default") return {NoiseKind::Gps, 2.0, 0.0};
  if (name == "hard") return {NoiseKind::Combined, 2.0, 0.05};
  throw Error(Errc::InvalidConfig, "noise.preset: unknown preset '" + std::string(name) + "' (clean, default, hard)");
}

std::string_view camera_motion_name(CameraMotion m) {
  switch (m) {
    case CameraMotion::Static: return "static";
    case CameraMotion::Linear: return "linear";
    case CameraMotion::Arc: return "arc";
  }
  return "?";
}

CameraMotion parse_camera_motion(std::string_view s) {
  if (s == "static") return CameraMotion::Static;
  if (s == "linear") return CameraMotion::Linear;
  if (s == "arc") return CameraMotion::Arc;
  throw Error(Errc::InvalidConfig, "sim.camera_motion: unknown motion '" + std::string(s) + "' (static, linear, arc)");
}

geometry::CameraIntrinsics SimConfig::intrinsics() const {
  return {focal, focal, 0.5 * image_width, 0.5 * image_height, 0.0};
}

void SimConfig::validate() const {
  auto fail = [](const std::string& field, const std::string& why) { throw Error(Errc::InvalidConfig, field + ": " + why); };
  if (n_agents < 2) fail("n_agents", "must be >= 2");
  if (t_obs < 2) fail("t_obs", "must be >= 2");
  if (t_pred < 1) fail("t_pred", "must be >= 1");
  if (image_width < 2 || image_height < 2) fail("image_width/image_height", "must be >= 2");
  if (!(focal > 0.0)) fail("focal", "must be positive");
  if (!(arena.x_max > arena.x_min && arena.y_max > arena.y_min)) fail("arena", "empty bounds");
  if (!(track.dt > 0.0)) fail("track.dt", "must be positive");
  if (!(track.speed_min > 0.0 && track.speed_max >= track.speed_min && track.speed_max <= kMaxSpeed))
    fail("track.speed_min/speed_max", "need 0 < min <= max <= 3 m/s");
  if (!(track.smoothing >= 0.0 && track.smoothing < 1.0)) fail("track.smoothing", "must lie in [0, 1)");
  if (!(sensor_height_jitter >= 0.0)) fail("sensor_height_jitter", "must be >= 0");
  if (max_retries < 1) fail("max_retries", "must be >= 1");
  noise.validate();
}

const AgentRecord& Scene::out_of_sight() const {
  for (const auto& a : agents)
    if (a.out_of_sight) return a;
  throw Error(Errc::Schema, "scene " + std::to_string(seed) + " has no out-of-sight agent");
}

std::vector<const AgentRecord*> Scene::in_sight() const {
  std::vector<const AgentRecord*> out;
  for (const auto& a : agents)
    if (!a.out_of_sight) out.push_back(&a);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->id < b->id; });
  return out;
}

// ---------------------------------------------------------------- tracks

AgentTrack gen_track(std::uint64_t seed, int T, const Arena& arena, const TrackParams& params) {
  Rng rng(mix_seed(seed));
  return gen_track(rng, T, arena, params);
}

AgentTrack gen_track(Rng& rng, int T, const Arena& arena, const TrackParams& params) {
  if (T < 2) throw Error(Errc::TooShort, "track needs T >= 2");
  auto sample_point = [&] {
    return Eigen::Vector2d(rng.uniform(arena.x_min, arena.x_max), rng.uniform(arena.y_min, arena.y_max));
  };
  auto next_waypoint = [&](const Eigen::Vector2d& from) {
    Eigen::Vector2d w = sample_point();
    for (int i = 0; i < 50 && (w - from).norm() < params.min_waypoint_distance; ++i) w = sample_point();
    return w;
  };

  AgentTrack track;
  track.speed = rng.uniform(params.speed_min, params.speed_max);
  Eigen::Vector2d pos = sample_point();
  Eigen::Vector2d goal = next_waypoint(pos);
  Eigen::Vector2d vel = track.speed * (goal - pos).normalized();
  const double limit = kMaxSpeed * params.dt;

  track.positions.reserve(static_cast<std::size_t>(T));
  track.positions.push_back({pos.x(), pos.y(), params.height});
  for (int t = 1; t < T; ++t) {
    if ((goal - pos).norm() < 0.5) goal = next_waypoint(pos);
    const Eigen::Vector2d desired = track.speed * (goal - pos).normalized();
    vel = params.smoothing * vel + (1.0 - params.smoothing) * desired;
    Eigen::Vector2d step = vel * params.dt;
    if (step.norm() > limit) step *= limit / step.norm();
    pos += step;
    track.positions.push_back({pos.x(), pos.y(), params.height});
  }
  return track;
}

std::vector<WorldPoint> apply_sensor_noise(const AgentTrack& track, const NoiseModel& model, std::uint64_t seed) {
  Rng rng(mix_seed(seed));
  return apply_sensor_noise(track.positions, model, rng);
}

std::vector<WorldPoint> apply_sensor_noise(std::span<const WorldPoint> track, const NoiseModel& model, Rng& rng) {
  model.validate();
  const bool gps = model.kind != NoiseKind::Odometer && model.gps_sigma > 0.0;
  const bool drift = model.kind != NoiseKind::Gps && model.drift_step_sigma > 0.0;
  std::vector<WorldPoint> out(track.begin(), track.end());
  Eigen::Vector3d walk = Eigen::Vector3d::Zero();
  for (std::size_t t = 0; t < out.size(); ++t) {
    // The walk starts at the true position: step t carries t increments.
    if (drift && t > 0)
      walk += Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * model.drift_step_sigma;
    Eigen::Vector3d p = out[t].vec() + walk;
    if (gps) p += Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * model.gps_sigma;
    out[t] = {p.x(), p.y(), p.z()};
  }
  return out;
}

// ---------------------------------------------------------------- rendering

Rendered render_visual(std::span<const WorldPoint> track, const CameraMatrixSequence& ms, int width, int height) {
  if (ms.size() != track.size())
    throw Error(Errc::LengthMismatch,
                std::to_string(ms.size()) + " camera matrices for " + std::to_string(track.size()) + " points");
  Rendered out;
  out.pixels.reserve(track.size());
  out.visible.reserve(track.size());
  for (std::size_t t = 0; t < track.size(); ++t) {
    const Eigen::Vector3d h = ms[t].m * track[t].vec().homogeneous();
    if (!(h.z() > geometry::kEpsilonDepth)) {
      out.pixels.push_back({0.0, 0.0});
      out.visible.push_back(false);
      continue;
    }
    const double u = std::round(h.x() / h.z());
    const double v = std::round(h.y() / h.z());
    const bool inside = u >= 0.0 && u <= width - 1 && v >= 0.0 && v <= height - 1;
    out.pixels.push_back(inside ? PixelPoint{u, v} : PixelPoint{0.0, 0.0});
    out.visible.push_back(inside);
  }
  return out;
}

CameraMatrixSequence camera_sequence(const SimConfig& cfg, Rng& rng) {
  const auto& rig = cfg.rig;
  Eigen::Vector3d eye(cfg.arena.center_x(), rig.standoff, rig.height);
  const Eigen::Vector3d target(cfg.arena.center_x(), cfg.arena.center_y(), rig.target_height);
  eye += Eigen::Vector3d(rng.normal(), rng.normal(), rng.normal()) * rig.jitter_position;
  const double yaw = rng.normal() * rig.jitter_yaw_deg * std::numbers::pi / 180.0;
  const Eigen::Vector3d look = Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ()) * (target - eye);

  const int T = cfg.total_steps();
  const geometry::CameraIntrinsics k = cfg.intrinsics();
  const double radius = Eigen::Vector2d(look.x(), look.y()).norm();
  CameraMatrixSequence ms;
  ms.reserve(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const double s = (t - 0.5 * (T - 1)) * cfg.track.dt;  // centered time
    Eigen::Vector3d e = eye;
    Eigen::Vector3d at = eye + look;
    switch (cfg.camera_motion) {
      case CameraMotion::Static:
        break;
      case CameraMotion::Linear:
        e.x() += rig.speed * s;
        break;
      case CameraMotion::Arc: {
        const Eigen::AngleAxisd rot(rig.speed * s / radius, Eigen::Vector3d::UnitZ());
        e = at + rot * (eye - at);
        break;
      }
    }
    ms.push_back(geometry::compose_matrix(1.0, k, geometry::ExtrinsicPose::look_at(e, at)));
  }
  return ms;
}

// ---------------------------------------------------------------- scenes

namespace {

bool all_visible(const std::vector<bool>& mask, int begin, int end) {
  for (int t = begin; t < end; ++t)
    if (!mask[static_cast<std::size_t>(t)]) return false;
  return true;
}

}  // namespace

Scene make_scene(const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(mix_seed(seed));
  Scene scene;
  scene.seed = seed;
  scene.t_obs = cfg.t_obs;
  scene.t_pred = cfg.t_pred;
  scene.dt = cfg.track.dt;
  scene.image_width = cfg.image_width;
  scene.image_height = cfg.image_height;
  scene.intrinsics = cfg.intrinsics();
  scene.camera_motion = std::string(camera_motion_name(cfg.camera_motion));
  scene.cameras = camera_sequence(cfg, rng);

  const int T = cfg.total_steps();
  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    std::vector<AgentTrack> tracks;
    std::vector<Rendered> renders;
    bool ok = true;
    for (int i = 0; i < cfg.n_agents && ok; ++i) {
      ok = false;
      for (int r = 0; r < cfg.max_retries; ++r) {
        TrackParams params = cfg.track;
        params.height += rng.uniform(-cfg.sensor_height_jitter, cfg.sensor_height_jitter);
        AgentTrack track = gen_track(rng, T, cfg.arena, params);
        Rendered rendered = render_visual(track.positions, scene.cameras, cfg.image_width, cfg.image_height);
        if (all_visible(rendered.visible, 0, cfg.t_obs)) {
          track.agent_id = i;
          tracks.push_back(std::move(track));
          renders.push_back(std::move(rendered));
          ok = true;
          break;
        }
      }
    }
    if (!ok) continue;

    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < renders.size(); ++i)
      if (all_visible(renders[i].visible, 0, T)) candidates.push_back(i);
    if (candidates.empty()) continue;
    const std::size_t hidden = candidates[rng.below(candidates.size())];

    for (std::size_t i = 0; i < tracks.size(); ++i) {
      AgentRecord rec;
      rec.id = tracks[i].agent_id;
      rec.out_of_sight = i == hidden;
      rec.world = tracks[i].positions;
      rec.sensor = apply_sensor_noise(tracks[i].positions, cfg.noise, rng);
      rec.pixel = std::move(renders[i].pixels);
      rec.visible = std::move(renders[i].visible);
      scene.agents.push_back(std::move(rec));
    }
    return scene;
  }
  throw Error(Errc::SceneGenerationFailed,
              "seed " + std::to_string(seed) + ": no valid agent layout after " + std::to_string(cfg.max_retries) + " retries");
}

SplitSeeds split_seeds(std::uint64_t seed, int split_index, int count) {
  return {seed * 10'000'000ULL + static_cast<std::uint64_t>(split_index) * 1'000'000ULL, count};
}

Dataset make_dataset(const SimConfig& cfg, std::uint64_t seed, int n_train, int n_val, int n_test) {
  if (n_train < 1 || n_val < 1 || n_test < 1) throw Error(Errc::InvalidConfig, "splits: counts must be positive");
  if (std::max({n_train, n_val, n_test}) >= 1'000'000) throw Error(Errc::InvalidConfig, "splits: counts must be < 10^6");
  Dataset ds;
  ds.train_seeds = split_seeds(seed, 0, n_train);
  ds.val_seeds = split_seeds(seed, 1, n_val);
  ds.test_seeds = split_seeds(seed, 2, n_test);
  auto fill = [&](std::vector<Scene>& out, const SplitSeeds& s) {
    for (int i = 0; i < s.count; ++i) out.push_back(make_scene(cfg, s.begin + static_cast<std::uint64_t>(i)));
  };
  fill(ds.train, ds.train_seeds);
  fill(ds.val, ds.val_seeds);
  fill(ds.test, ds.test_seeds);
  return ds;
}

}  // namespace oostraj::sim
