#include "oostraj/pipeline.hpp"

#include <algorithm>

#include "oostraj/error.hpp"

namespace oostraj::pipeline {

using namespace ad;

Normalizer Normalizer::make(const sim::Scene& scene, const ModelConfig& cfg) {
  if (!(cfg.world_scale > 0.0)) throw Error(Errc::InvalidConfig, "model.world_scale must be positive");
  return {static_cast<double>(scene.image_width), static_cast<double>(scene.image_height), cfg.world_center,
          cfg.world_scale};
}

geometry::CameraMatrix Normalizer::normalize_camera(const geometry::CameraMatrix& m) const {
  Eigen::Matrix4d d = Eigen::Matrix4d::Identity();
  d.topLeftCorner<3, 3>() *= scale;
  d.topRightCorner<3, 1>() = Eigen::Vector3d(center[0], center[1], center[2]);
  const Eigen::Vector3d s(1.0 / width, 1.0 / height, 1.0);
  return {s.asDiagonal() * m.m * d};
}

Inputs make_inputs(const sim::Scene& scene, const ModelConfig& cfg) {
  const Normalizer norm = Normalizer::make(scene, cfg);
  const auto T = static_cast<std::size_t>(scene.t_obs);
  const auto& oos = scene.out_of_sight();
  if (oos.sensor.size() < T) throw Error(Errc::ShapeMismatch, "out-of-sight sensor track shorter than t_obs");

  Inputs in;
  std::vector<double> sensor;
  sensor.reserve(T * 3);
  for (std::size_t t = 0; t < T; ++t) {
    const auto w = norm.world(oos.sensor[t]);
    sensor.insert(sensor.end(), w.begin(), w.end());
  }
  in.sensor = Tensor::from({T, 3}, std::move(sensor));

  const auto agents = scene.in_sight();
  if (agents.empty()) throw Error(Errc::NoInSightAgents, "scene " + std::to_string(scene.seed) + " has no in-sight agent");
  in.in_sight = std::min(agents.size(), cfg.slots);
  const std::size_t width = cfg.slots * kSlotFeatures;
  std::vector<double> slots(T * width, 0.0);
  for (std::size_t k = 0; k < in.in_sight; ++k) {
    const auto* a = agents[k];
    for (std::size_t t = 0; t < T; ++t) {
      double* f = slots.data() + t * width + k * kSlotFeatures;
      const auto p = norm.pixel(a->pixel[t]);
      const auto w = norm.world(a->sensor[t]);
      f[0] = p[0];
      f[1] = p[1];
      f[2] = w[0];
      f[3] = w[1];
      f[4] = w[2];
      f[5] = 1.0;
    }
  }
  in.slots = Tensor::from({T, width}, std::move(slots));
  return in;
}

Targets make_targets(const sim::Scene& scene, const ModelConfig& cfg) {
  const Normalizer norm = Normalizer::make(scene, cfg);
  const auto& oos = scene.out_of_sight();
  const auto T_obs = static_cast<std::size_t>(scene.t_obs);
  const auto T = static_cast<std::size_t>(scene.total_steps());
  std::vector<double> obs, fut;
  for (std::size_t t = 0; t < T; ++t) {
    const auto p = norm.pixel(oos.pixel[t]);
    auto& dst = t < T_obs ? obs : fut;
    dst.insert(dst.end(), p.begin(), p.end());
  }
  return {Tensor::from({T_obs, 2}, std::move(obs)), Tensor::from({T - T_obs, 2}, std::move(fut))};
}

std::vector<sim::Scene> training_views(const sim::Scene& scene) {
  std::vector<sim::Scene> out{scene};
  const int designated = scene.out_of_sight().id;
  for (const auto& a : scene.agents) {
    if (a.id == designated || !std::all_of(a.visible.begin(), a.visible.end(), [](bool v) { return v; })) continue;
    sim::Scene view = scene;
    for (auto& b : view.agents) b.out_of_sight = b.id == a.id;
    out.push_back(std::move(view));
  }
  return out;
}

Tensor vpp_project(const Tensor& embedding, const Tensor& points, double min_abs) {
  if (embedding.rank() != 2 || embedding.cols() != 12)
    throw Error(Errc::ShapeMismatch, "camera embedding must be [T x 12], got " + shape_str(embedding.shape()));
  if (points.rank() != 2 || points.cols() != 3)
    throw Error(Errc::ShapeMismatch, "points must be [T x 3], got " + shape_str(points.shape()));
  if (embedding.rows() != points.rows())
    throw Error(Errc::LengthMismatch, std::to_string(embedding.rows()) + " camera matrices for " +
                                          std::to_string(points.rows()) + " points");
  const Tensor hom = concat_cols({points, Tensor::full({points.rows(), 1}, 1.0)});
  std::vector<Tensor> rows;
  for (std::size_t r = 0; r < 3; ++r) rows.push_back(row_sum(mul(hom, slice_cols(embedding, 4 * r, 4 * r + 4))));
  return perspective_divide(concat_cols(rows), min_abs);
}

Tensor denoise_loss(const Tensor& pred, const Tensor& gt) { return mse_loss(pred, gt); }
Tensor pred_loss(const Tensor& pred, const Tensor& gt) { return mse_loss(pred, gt); }

std::array<double, 12> base_camera() { return {1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 0, 1}; }

namespace {

void zero_fill(Tensor& t) { std::fill(t.data().begin(), t.data().end(), 0.0); }

Tensor last_row(const Tensor& x) { return slice_rows(x, x.rows() - 1, x.rows()); }

}  // namespace

// ---------------------------------------------------------------- modules

Mde::Mde(const nn::TrunkConfig& cfg, Rng& rng)
    : trunk_(nn::TrunkKind::Transformer, 3, cfg, rng), out_(cfg.width, 3, rng) {}

Tensor Mde::operator()(const Tensor& sensor) const { return out_(trunk_(sensor)); }

void Mde::collect(const std::string& prefix, nn::ParamList& out) const {
  trunk_.collect(prefix + ".trunk", out);
  out_.collect(prefix + ".out", out);
}

Cpe::Cpe(std::size_t slots, const nn::TrunkConfig& cfg, Rng& rng)
    : trunk_(nn::TrunkKind::Transformer, slots * kSlotFeatures, cfg, rng), out_(cfg.width, 12, rng) {
  zero_fill(out_.weight());
  const auto base = base_camera();
  std::copy(base.begin(), base.end(), out_.bias().data().begin());
}

Tensor Cpe::operator()(const Tensor& features) const { return out_(trunk_(features)); }

void Cpe::collect(const std::string& prefix, nn::ParamList& out) const {
  trunk_.collect(prefix + ".trunk", out);
  out_.collect(prefix + ".out", out);
}

Predictor::Predictor(nn::TrunkKind kind, std::size_t t_pred, const nn::TrunkConfig& cfg, Rng& rng)
    : t_pred_(t_pred), trunk_(kind, 2, cfg, rng), out_(cfg.width, 2 * t_pred, rng) {
  zero_fill(out_.weight());
}

Tensor Predictor::operator()(const Tensor& observed) const {
  if (observed.rank() != 2 || observed.cols() != 2)
    throw Error(Errc::ShapeMismatch, "predictor input must be [T x 2], got " + shape_str(observed.shape()));
  const Tensor last = last_row(observed);
  const Tensor offsets = sub(observed, repeat_rows(last, observed.rows()));
  const Tensor h = last_row(trunk_(offsets));
  return add(reshape(out_(h), {t_pred_, 2}), repeat_rows(last, t_pred_));
}

void Predictor::collect(const std::string& prefix, nn::ParamList& out) const {
  trunk_.collect(prefix + ".trunk", out);
  out_.collect(prefix + ".out", out);
}

// ---------------------------------------------------------------- methods

std::string_view ablation_name(Ablation a) {
  switch (a) {
    case Ablation::None: return "full";
    case Ablation::NoCpe: return "w/o CPE";
    case Ablation::NoMde: return "w/o MDE";
    case Ablation::NoVpp: return "w/o VPP";
    case Ablation::NoOpd: return "w/o OPD";
  }
  return "?";
}

namespace {

constexpr std::array<std::string_view, 4> kKinds{"transformer", "lstm", "gru", "rnn"};

}  // namespace

std::vector<std::string> method_names() {
  std::vector<std::string> out{"ours", "no_cpe", "no_mde", "no_vpp", "no_opd", "const_velocity", "smoother"};
  for (auto k : kKinds)
    for (auto c : {"_direct", "_two_stage", "_plus_vpd"}) out.push_back(std::string(k) + c);
  return out;
}

MethodSpec parse_method(std::string_view name) {
  MethodSpec s;
  s.name = std::string(name);
  if (name == "ours" || name == "transformer_plus_vpd") {
    s.name = "ours";
    return s;
  }
  if (name == "no_cpe") { s.ablation = Ablation::NoCpe; return s; }
  if (name == "no_mde") { s.ablation = Ablation::NoMde; return s; }
  if (name == "no_vpp") { s.ablation = Ablation::NoVpp; return s; }
  if (name == "no_opd") { s.ablation = Ablation::NoOpd; return s; }
  if (name == "const_velocity" || name == "smoother") {
    s.learned = false;
    return s;
  }
  for (auto k : kKinds) {
    const std::string prefix = std::string(k) + "_";
    if (!name.starts_with(prefix)) continue;
    const std::string_view comp = name.substr(prefix.size());
    s.kind = nn::parse_trunk_kind(k);
    if (comp == "direct") { s.composition = Composition::Direct; return s; }
    if (comp == "two_stage") { s.composition = Composition::TwoStage; return s; }
    if (comp == "plus_vpd") { s.composition = Composition::Pipeline; return s; }
  }
  std::string valid;
  for (const auto& n : method_names()) valid += (valid.empty() ? "" : ", ") + n;
  throw Error(Errc::InvalidConfig, "unknown method '" + std::string(name) + "'; valid methods: " + valid);
}

Model::Model(const MethodSpec& spec, const ModelConfig& cfg, int t_obs, int t_pred, std::uint64_t seed)
    : spec_(spec), cfg_(cfg), t_obs_(t_obs), t_pred_(t_pred) {
  if (!spec.learned) throw Error(Errc::InvalidConfig, "method '" + spec.name + "' has no learned model");
  if (t_obs < 2 || t_pred < 1) throw Error(Errc::InvalidConfig, "model needs t_obs >= 2 and t_pred >= 1");
  Rng rng(mix_seed(seed));
  const auto tp = static_cast<std::size_t>(t_pred);
  const auto& tc = cfg.trunk;
  switch (spec.composition) {
    case Composition::Pipeline:
      if (spec.ablation != Ablation::NoMde) mde_ = Mde(tc, rng);
      if (spec.ablation == Ablation::NoVpp) {
        linear_projection_ = nn::Linear(3, 2, rng);
      } else if (spec.ablation == Ablation::NoCpe) {
        const auto base = base_camera();
        static_camera_ = Tensor::from({1, 12}, std::vector<double>(base.begin(), base.end()), true);
      } else {
        cpe_ = Cpe(cfg.slots, tc, rng);
      }
      if (spec.ablation != Ablation::NoOpd) predictor_ = Predictor(spec.kind, tp, tc, rng);
      break;
    case Composition::Direct:
      trunk_ = nn::SequenceTrunk(spec.kind, 3, tc, rng);
      denoise_head_ = nn::Linear(tc.width, 2, rng);
      future_head_ = nn::Linear(tc.width, 2 * tp, rng);
      zero_fill(future_head_.weight());
      break;
    case Composition::TwoStage:
      trunk_ = nn::SequenceTrunk(spec.kind, 3, tc, rng);
      denoise_head_ = nn::Linear(tc.width, 2, rng);
      predictor_ = Predictor(spec.kind, tp, tc, rng);
      break;
  }
}

Tensor Model::denoise(const Inputs& in) const {
  const Tensor world = spec_.ablation == Ablation::NoMde ? in.sensor : mde_(in.sensor);
  if (spec_.ablation == Ablation::NoVpp) return linear_projection_(world);
  const Tensor emb = spec_.ablation == Ablation::NoCpe ? repeat_rows(static_camera_, world.rows()) : cpe_(in.slots);
  return vpp_project(emb, world);
}

Outputs Model::forward(const Inputs& in) const {
  const auto T = static_cast<std::size_t>(t_obs_);
  if (in.sensor.rank() != 2 || in.sensor.rows() != T || in.sensor.cols() != 3)
    throw Error(Errc::ShapeMismatch, "sensor input " + shape_str(in.sensor.shape()) + " != [" + std::to_string(T) + " x 3]");
  if (spec_.composition == Composition::Pipeline && spec_.ablation != Ablation::NoCpe &&
      spec_.ablation != Ablation::NoVpp &&
      (in.slots.rank() != 2 || in.slots.rows() != T || in.slots.cols() != cfg_.slots * kSlotFeatures))
    throw Error(Errc::ShapeMismatch, "slot input " + shape_str(in.slots.shape()) + " does not match the model");

  const auto tp = static_cast<std::size_t>(t_pred_);
  Outputs out;
  switch (spec_.composition) {
    case Composition::Pipeline:
      out.denoised = denoise(in);
      out.future = spec_.ablation == Ablation::NoOpd ? repeat_rows(last_row(out.denoised), tp) : predictor_(out.denoised);
      break;
    case Composition::Direct: {
      const Tensor h = trunk_(in.sensor);
      out.denoised = denoise_head_(h);
      out.future = add(reshape(future_head_(last_row(h)), {tp, 2}), repeat_rows(last_row(out.denoised), tp));
      break;
    }
    case Composition::TwoStage:
      out.denoised = denoise_head_(trunk_(in.sensor));
      // Stage 2 learns from the prediction loss only.
      out.future = predictor_(out.denoised.detach());
      break;
  }
  return out;
}

nn::ParamList Model::params() const {
  nn::ParamList out;
  switch (spec_.composition) {
    case Composition::Pipeline:
      if (spec_.ablation != Ablation::NoMde) mde_.collect("mde", out);
      if (spec_.ablation == Ablation::NoVpp) linear_projection_.collect("linear_projection", out);
      else if (spec_.ablation == Ablation::NoCpe) out.push_back({"static_camera", static_camera_});
      else cpe_.collect("cpe", out);
      if (spec_.ablation != Ablation::NoOpd) predictor_.collect("opd", out);
      break;
    case Composition::Direct:
      trunk_.collect("trunk", out);
      denoise_head_.collect("denoise_head", out);
      future_head_.collect("future_head", out);
      break;
    case Composition::TwoStage:
      trunk_.collect("stage1.trunk", out);
      denoise_head_.collect("stage1.head", out);
      predictor_.collect("stage2", out);
      break;
  }
  return out;
}

Prediction infer(const Model& model, const sim::Scene& scene) {
  NoGradGuard no_grad;
  if (scene.t_obs != model.t_obs() || scene.t_pred != model.t_pred())
    throw Error(Errc::ShapeMismatch, "scene window " + std::to_string(scene.t_obs) + "/" + std::to_string(scene.t_pred) +
                                         " does not match the model's " + std::to_string(model.t_obs()) + "/" +
                                         std::to_string(model.t_pred()));
  const Normalizer norm = Normalizer::make(scene, model.config());
  const Outputs out = model.forward(make_inputs(scene, model.config()));
  Prediction p;
  for (std::size_t t = 0; t < out.denoised.rows(); ++t) p.denoised.push_back(norm.unpixel(out.denoised.at(t, 0), out.denoised.at(t, 1)));
  for (std::size_t t = 0; t < out.future.rows(); ++t) p.future.push_back(norm.unpixel(out.future.at(t, 0), out.future.at(t, 1)));
  return p;
}

}  // namespace oostraj::pipeline
