#pragma once

// Seeded synthetic scenes: pedestrian tracks on a ground arena, a pinhole
// camera (static or moving), rasterized pixel tracks and noisy sensor tracks,
// with one agent withheld from the visual channel.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oostraj/geometry.hpp"
#include "oostraj/rng.hpp"

namespace oostraj::sim {

using geometry::CameraMatrixSequence;
using geometry::PixelPoint;
using geometry::WorldPoint;

inline constexpr double kMaxSpeed = 3.0;  // m/s, pedestrian bound

struct Arena {
  double x_min = -5.0, x_max = 5.0;
  double y_min = 10.0, y_max = 20.0;

  double center_x() const { return 0.5 * (x_min + x_max); }
  double center_y() const { return 0.5 * (y_min + y_max); }
};

struct TrackParams {
  double dt = 0.1;
  double speed_min = 0.8, speed_max = 1.6;  // m/s cruise speed, drawn per agent
  double min_waypoint_distance = 4.0;       // m
  double smoothing = 0.8;                   // velocity low-pass coefficient in [0, 1)
  double height = 1.0;                      // sensor height above ground, m
};

struct AgentTrack {
  int agent_id = 0;
  double speed = 0.0;  // cruise speed of the walking profile
  std::vector<WorldPoint> positions;
};

enum class NoiseKind { Gps, Odometer, Combined };

std::string_view noise_kind_name(NoiseKind k);
NoiseKind parse_noise_kind(std::string_view s);

struct NoiseModel {
  NoiseKind kind = NoiseKind::Gps;
  double gps_sigma = 2.0;         // m, i.i.d. per coordinate
  double drift_step_sigma = 0.0;  // m per step, random walk

  /// Throws InvalidConfig outside gps_sigma in [0, 10], drift in [0, 1].
  void validate() const;
};

/// Named presets: "clean" (no noise), "default" (GPS 2 m), "hard" (GPS 2 m + 0.05 m/step drift).
NoiseModel noise_preset(std::string_view name);

enum class CameraMotion { Static, Linear, Arc };

std::string_view camera_motion_name(CameraMotion m);
CameraMotion parse_camera_motion(std::string_view s);

struct CameraRig {
  double height = 4.0;            // m
  double standoff = 0.0;          // camera ground position y (arena lies ahead along +y)
  double target_height = 1.0;     // look-at height at the arena center
  double speed = 1.0;             // m/s for linear and arc motion
  double jitter_position = 0.0;   // m, per-scene sigma on the camera position
  double jitter_yaw_deg = 0.0;    // deg, per-scene sigma on the viewing direction
};

struct SimConfig {
  int n_agents = 5;
  int t_obs = 20;
  int t_pred = 20;
  int image_width = 640;
  int image_height = 480;
  double focal = 500.0;
  CameraMotion camera_motion = CameraMotion::Static;
  CameraRig rig;
  Arena arena;
  TrackParams track;
  double sensor_height_jitter = 0.3;  // per-agent height drawn in height +- jitter
  NoiseModel noise;
  int max_retries = 100;

  int total_steps() const { return t_obs + t_pred; }
  geometry::CameraIntrinsics intrinsics() const;
  void validate() const;
};

struct AgentRecord {
  int id = 0;
  bool out_of_sight = false;
  std::vector<WorldPoint> world;   // noise-free track (may be empty for imported data)
  std::vector<WorldPoint> sensor;  // noisy sensor track
  std::vector<PixelPoint> pixel;   // rasterized pixels; meaningful where visible
  std::vector<bool> visible;
};

struct Scene {
  std::uint64_t seed = 0;
  int t_obs = 0, t_pred = 0;
  double dt = 0.1;
  int image_width = 640, image_height = 480;
  geometry::CameraIntrinsics intrinsics;
  std::string camera_motion = "static";
  CameraMatrixSequence cameras;  // one per timestamp; empty when unknown
  std::vector<AgentRecord> agents;

  int total_steps() const { return t_obs + t_pred; }
  const AgentRecord& out_of_sight() const;
  std::vector<const AgentRecord*> in_sight() const;  // sorted by id
};

/// Smooth constant-speed waypoint walk; every step moves at most kMaxSpeed * dt.
AgentTrack gen_track(std::uint64_t seed, int T, const Arena& arena, const TrackParams& params = {});
AgentTrack gen_track(Rng& rng, int T, const Arena& arena, const TrackParams& params);

std::vector<WorldPoint> apply_sensor_noise(const AgentTrack& track, const NoiseModel& model, std::uint64_t seed);
std::vector<WorldPoint> apply_sensor_noise(std::span<const WorldPoint> track, const NoiseModel& model, Rng& rng);

struct Rendered {
  std::vector<PixelPoint> pixels;
  std::vector<bool> visible;
};

/// Projects, rounds to the nearest integer pixel and flags points in front of
/// the camera and inside [0, width-1] x [0, height-1]. Hidden points get (0, 0).
Rendered render_visual(std::span<const WorldPoint> track, const CameraMatrixSequence& ms, int width, int height);

CameraMatrixSequence camera_sequence(const SimConfig& cfg, Rng& rng);

/// Throws SceneGenerationFailed when the retry budget runs out.
Scene make_scene(const SimConfig& cfg, std::uint64_t seed);

struct SplitSeeds {
  std::uint64_t begin = 0;
  int count = 0;
};

struct Dataset {
  std::vector<Scene> train, val, test;
  SplitSeeds train_seeds, val_seeds, test_seeds;
};

/// Seed ranges are [base, base + n) with base = seed * 10^7 + split * 10^6.
SplitSeeds split_seeds(std::uint64_t seed, int split_index, int count);

Dataset make_dataset(const SimConfig& cfg, std::uint64_t seed, int n_train, int n_val, int n_test);

}  // namespace oostraj::sim
