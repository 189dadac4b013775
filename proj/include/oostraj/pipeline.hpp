#pragma once

// Learned trajectory models: the denoise-project-predict pipeline, its
// ablations, and the direct / two-stage sequence baselines. All of them map
// the same Inputs to the same Outputs so training and evaluation treat them
// identically.
//
// Everything inside a model runs in normalized coordinates: pixels are divided
// by the image size and world points are shifted by `world_center` and divided
// by `world_scale`. A camera matrix estimated by the CPE therefore maps
// normalized world points to normalized pixels.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oostraj/geometry.hpp"
#include "oostraj/nn.hpp"
#include "oostraj/simulator.hpp"

namespace oostraj::pipeline {

using ad::Tensor;

struct ModelConfig {
  nn::TrunkConfig trunk;  // width 64, 2 layers, 4 heads
  std::size_t slots = 8;  // CPE in-sight capacity
  std::array<double, 3> world_center{0.0, 15.0, 1.0};
  double world_scale = 5.0;
};

inline constexpr std::size_t kSlotFeatures = 6;  // u, v, x, y, z, present

struct Normalizer {
  double width = 1.0, height = 1.0;
  std::array<double, 3> center{};
  double scale = 1.0;

  static Normalizer make(const sim::Scene& scene, const ModelConfig& cfg);
  std::array<double, 2> pixel(const geometry::PixelPoint& p) const { return {p.u / width, p.v / height}; }
  geometry::PixelPoint unpixel(double u, double v) const { return {u * width, v * height}; }
  std::array<double, 3> world(const geometry::WorldPoint& p) const {
    return {(p.x - center[0]) / scale, (p.y - center[1]) / scale, (p.z - center[2]) / scale};
  }
  /// The camera matrix acting on normalized coordinates.
  geometry::CameraMatrix normalize_camera(const geometry::CameraMatrix& m) const;
};

/// Model inputs for one scene. Built from the out-of-sight agent's sensor
/// track and the in-sight agents' observed pairs only.
struct Inputs {
  Tensor sensor;  // [T_obs x 3] normalized out-of-sight sensor track
  Tensor slots;   // [T_obs x slots*6] in-sight pairs, zero padded
  std::size_t in_sight = 0;
};

struct Targets {
  Tensor observed;  // [T_obs x 2] normalized held-out visual track
  Tensor future;    // [T_pred x 2]
};

/// Throws NoInSightAgents when the scene has no in-sight agent.
Inputs make_inputs(const sim::Scene& scene, const ModelConfig& cfg);
Targets make_targets(const sim::Scene& scene, const ModelConfig& cfg);

/// Copies of the scene with each agent whose visual track covers the whole
/// window designated out of sight in turn (the designated agent first). Used
/// to resample training targets; never applied to evaluation scenes.
std::vector<sim::Scene> training_views(const sim::Scene& scene);

struct Outputs {
  Tensor denoised;  // [T_obs x 2]
  Tensor future;    // [T_pred x 2]
};

/// Per-timestep projection: emb [T x 12] (row-major 3x4), points [T x 3] ->
/// pixels [T x 2], dividing by the third homogeneous coordinate with |den|
/// clamped to at least `min_abs` (sign kept).
Tensor vpp_project(const Tensor& embedding, const Tensor& points, double min_abs = 1e-6);

Tensor denoise_loss(const Tensor& pred, const Tensor& gt);
Tensor pred_loss(const Tensor& pred, const Tensor& gt);

/// Affine starting point for estimated cameras: (x, y, z, 1) -> (x, y, 1).
std::array<double, 12> base_camera();

/// Mobile denoising encoder: noisy + correction(noisy), correction head
/// initialized to zero.
class Mde {
 public:
  Mde() = default;
  Mde(const nn::TrunkConfig& cfg, Rng& rng);
  Tensor operator()(const Tensor& sensor) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;
  nn::Linear& head() { return out_; }

 private:
  nn::SequenceTrunk trunk_;
  nn::Linear out_;
};

/// Camera parameters estimator: slot features per timestep -> 12 matrix
/// entries per timestep. Output bias starts at base_camera().
class Cpe {
 public:
  Cpe() = default;
  Cpe(std::size_t slots, const nn::TrunkConfig& cfg, Rng& rng);
  Tensor operator()(const Tensor& features) const;
  void collect(const std::string& prefix, nn::ParamList& out) const;

 private:
  nn::SequenceTrunk trunk_;
  nn::Linear out_;
};

/// One-shot future decoder of any trunk kind. Works on offsets from the last
/// observed position and adds it back, so a zero head holds the last position.
class Predictor {
 public:
  Predictor() = default;
  Predictor(nn::TrunkKind kind, std::size_t t_pred, const nn::TrunkConfig& cfg, Rng& rng);
  Tensor operator()(const Tensor& observed) const;  // [T_obs x 2] -> [T_pred x 2]
  void collect(const std::string& prefix, nn::ParamList& out) const;

 private:
  std::size_t t_pred_ = 0;
  nn::SequenceTrunk trunk_;
  nn::Linear out_;
};

enum class Composition { Pipeline, Direct, TwoStage };
enum class Ablation { None, NoCpe, NoMde, NoVpp, NoOpd };

std::string_view ablation_name(Ablation a);  // "full", "w/o CPE", ...

struct MethodSpec {
  std::string name;
  bool learned = true;
  Composition composition = Composition::Pipeline;
  nn::TrunkKind kind = nn::TrunkKind::Transformer;  // prediction-stage kind
  Ablation ablation = Ablation::None;
};

/// Accepted names: ours, no_cpe, no_mde, no_vpp, no_opd, const_velocity,
/// smoother and <kind>_{direct,two_stage,plus_vpd} for kind in
/// transformer, lstm, gru, rnn. transformer_plus_vpd is the same model as ours.
/// Throws InvalidConfig listing the valid names.
MethodSpec parse_method(std::string_view name);
std::vector<std::string> method_names();

class Model {
 public:
  Model(const MethodSpec& spec, const ModelConfig& cfg, int t_obs, int t_pred, std::uint64_t seed);

  /// Throws ShapeMismatch if the inputs do not match t_obs.
  Outputs forward(const Inputs& in) const;

  /// Parameters in a fixed order with stable names.
  nn::ParamList params() const;
  std::size_t parameter_count() const { return nn::count_parameters(params()); }

  const MethodSpec& spec() const { return spec_; }
  const ModelConfig& config() const { return cfg_; }
  int t_obs() const { return t_obs_; }
  int t_pred() const { return t_pred_; }

  Mde& mde() { return mde_; }
  Predictor& predictor() { return predictor_; }

 private:
  Tensor denoise(const Inputs& in) const;

  MethodSpec spec_;
  ModelConfig cfg_;
  int t_obs_, t_pred_;
  // Pipeline
  Mde mde_;
  Cpe cpe_;
  Tensor static_camera_;  // NoCpe: [1 x 12]
  nn::Linear linear_projection_;  // NoVpp
  // Direct / TwoStage
  nn::SequenceTrunk trunk_;
  nn::Linear denoise_head_;
  nn::Linear future_head_;
  Predictor predictor_;
};

struct Prediction {
  std::vector<geometry::PixelPoint> denoised;  // T_obs
  std::vector<geometry::PixelPoint> future;    // T_pred
};

/// Runs the model without recording a graph and converts to raw pixels.
Prediction infer(const Model& model, const sim::Scene& scene);

}  // namespace oostraj::pipeline
