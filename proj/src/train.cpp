#include "oostraj/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "oostraj/error.hpp"

namespace oostraj::train {

using nlohmann::json;

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(Errc::InvalidConfig, "train.epochs must be >= 1");
  if (batch_size < 1) throw Error(Errc::InvalidConfig, "train.batch_size must be >= 1");
  if (!(lambda >= 0.0)) throw Error(Errc::InvalidConfig, "train.lambda must be >= 0");
  if (!(adam.lr > 0.0)) throw Error(Errc::InvalidConfig, "train.lr must be positive");
  if (!(adam.grad_clip >= 0.0)) throw Error(Errc::InvalidConfig, "train.grad_clip must be >= 0");
}

json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs},           {"batch_size", c.batch_size}, {"lambda", c.lambda},
          {"lr", c.adam.lr},              {"beta1", c.adam.beta1},      {"beta2", c.adam.beta2},
          {"eps", c.adam.eps},            {"grad_clip", c.adam.grad_clip}, {"seed", c.seed},
          {"resample_out_of_sight", c.resample_out_of_sight}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.lambda = j.at("lambda").get<double>();
  c.adam.lr = j.at("lr").get<double>();
  c.adam.beta1 = j.at("beta1").get<double>();
  c.adam.beta2 = j.at("beta2").get<double>();
  c.adam.eps = j.at("eps").get<double>();
  c.adam.grad_clip = j.at("grad_clip").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.resample_out_of_sight = j.at("resample_out_of_sight").get<bool>();
  return c;
}

json to_json(const pipeline::ModelConfig& c) {
  return {{"width", c.trunk.width}, {"layers", c.trunk.layers},         {"heads", c.trunk.heads},
          {"ffn_mult", c.trunk.ffn_mult}, {"slots", c.slots},           {"world_center", c.world_center},
          {"world_scale", c.world_scale}};
}

pipeline::ModelConfig model_config_from_json(const json& j) {
  pipeline::ModelConfig c;
  c.trunk.width = j.at("width").get<std::size_t>();
  c.trunk.layers = j.at("layers").get<std::size_t>();
  c.trunk.heads = j.at("heads").get<std::size_t>();
  c.trunk.ffn_mult = j.at("ffn_mult").get<std::size_t>();
  c.slots = j.at("slots").get<std::size_t>();
  c.world_center = j.at("world_center").get<std::array<double, 3>>();
  c.world_scale = j.at("world_scale").get<double>();
  return c;
}

std::string log_header() { return "epoch,loss_denoise,loss_pred,val_mse_d,val_mse_p,val_sum"; }

std::string log_row(const EpochLog& e) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g", e.epoch, e.loss_denoise, e.loss_pred, e.val_mse_d,
                e.val_mse_p, e.val_sum);
  return buf;
}

namespace {

json log_to_json(const std::vector<EpochLog>& log) {
  json a = json::array();
  for (const auto& e : log) a.push_back({e.epoch, e.loss_denoise, e.loss_pred, e.val_mse_d, e.val_mse_p, e.val_sum});
  return a;
}

std::vector<EpochLog> log_from_json(const json& a) {
  std::vector<EpochLog> out;
  for (const auto& r : a)
    out.push_back({r[0].get<int>(), r[1].get<double>(), r[2].get<double>(), r[3].get<double>(), r[4].get<double>(),
                   r[5].get<double>()});
  return out;
}

constexpr std::uint64_t kShuffleStream = 0x5eed5eedULL;

const sim::Scene& first_scene(const std::vector<sim::Scene>& train, const TrainConfig& cfg) {
  cfg.validate();
  if (train.empty()) throw Error(Errc::InsufficientData, "training split is empty");
  return train.front();
}

}  // namespace

SceneLoss scene_loss(const pipeline::Model& model, const pipeline::Inputs& in, const pipeline::Targets& tgt, double lambda) {
  const pipeline::Outputs out = model.forward(in);
  SceneLoss l;
  l.denoise = pipeline::denoise_loss(out.denoised, tgt.observed);
  l.pred = pipeline::pred_loss(out.future, tgt.future);
  l.total = ad::add(l.denoise, ad::scale(l.pred, lambda));
  return l;
}

Trainer::Trainer(const pipeline::MethodSpec& spec, const pipeline::ModelConfig& model_cfg, const TrainConfig& cfg,
                 const std::vector<sim::Scene>& train, const std::vector<sim::Scene>& val, std::string data_hash)
    : spec_(spec),
      model_cfg_(model_cfg),
      cfg_(cfg),
      val_(val),
      data_hash_(std::move(data_hash)),
      model_(spec, model_cfg, first_scene(train, cfg).t_obs, first_scene(train, cfg).t_pred, cfg.seed),
      adam_(model_.params(), cfg.adam),
      rng_(mix_seed(cfg.seed ^ kShuffleStream)) {
  if (val_.empty()) throw Error(Errc::InsufficientData, "validation split is empty");
  for (const auto& s : train) {
    if (s.t_obs != model_.t_obs() || s.t_pred != model_.t_pred())
      throw Error(Errc::ShapeMismatch, "scene " + std::to_string(s.seed) + " window differs from the first training scene");
    std::vector<Prepared> views;
    for (const auto& v : cfg_.resample_out_of_sight ? pipeline::training_views(s) : std::vector<sim::Scene>{s})
      views.push_back({pipeline::make_inputs(v, model_cfg_), pipeline::make_targets(v, model_cfg_)});
    train_.push_back(std::move(views));
  }
}

EpochLog Trainer::run_epoch() {
  const int epoch = epoch_ + 1;
  std::vector<std::size_t> order(train_.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_.below(i)]);

  EpochLog e;
  e.epoch = epoch;
  const auto B = static_cast<std::size_t>(cfg_.batch_size);
  for (std::size_t start = 0, batch = 0; start < order.size(); start += B, ++batch) {
    const std::size_t end = std::min(order.size(), start + B);
    const double weight = 1.0 / static_cast<double>(end - start);
    for (std::size_t i = start; i < end; ++i) {
      const auto& views = train_[order[i]];
      const auto& p = views[views.size() > 1 ? rng_.below(views.size()) : 0];
      const SceneLoss l = scene_loss(model_, p.in, p.tgt, cfg_.lambda);
      const double total = l.total.item();
      if (!std::isfinite(total))
        throw Error(Errc::NonFiniteLoss, "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch) + ": loss " +
                                             std::to_string(total));
      e.loss_denoise += l.denoise.item();
      e.loss_pred += l.pred.item();
      ad::backward(l.total, weight);
    }
    adam_.step();
  }
  e.loss_denoise /= static_cast<double>(train_.size());
  e.loss_pred /= static_cast<double>(train_.size());

  const auto row = metrics::evaluate(spec_.name, predictor(model_), val_);
  e.val_mse_d = row.mse_d;
  e.val_mse_p = row.mse_p;
  e.val_sum = row.sum;
  if (!std::isfinite(e.val_sum))
    throw Error(Errc::NonFiniteLoss, "epoch " + std::to_string(epoch) + ": validation SUM is not finite");

  epoch_ = epoch;
  log_.push_back(e);
  if (!best_ || e.val_sum < best_sum_) {
    best_sum_ = e.val_sum;
    best_epoch_ = epoch;
    best_ = last_checkpoint();
  }
  return e;
}

void Trainer::run(const std::function<void(const EpochLog&)>& on_epoch) {
  while (epoch_ < cfg_.epochs) {
    const EpochLog e = run_epoch();
    if (on_epoch) on_epoch(e);
  }
}

ckpt::Checkpoint Trainer::last_checkpoint() const {
  ckpt::Checkpoint c;
  c.meta = {{"format", "oostraj.model/1"},
            {"method", spec_.name},
            {"model", to_json(model_cfg_)},
            {"train", to_json(cfg_)},
            {"t_obs", model_.t_obs()},
            {"t_pred", model_.t_pred()},
            {"data_hash", data_hash_},
            {"epoch", epoch_},
            {"best_epoch", best_epoch_},
            {"best_sum", best_sum_},
            {"rng", rng_.serialize()},
            {"adam_steps", adam_.steps()},
            {"parameter_count", model_.parameter_count()},
            {"log", log_to_json(log_)}};
  const auto params = model_.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    c.blobs.push_back({"param/" + p.name, p.tensor.shape(), p.tensor.values()});
    c.blobs.push_back({"adam_m/" + p.name, p.tensor.shape(), adam_.first_moments()[i]});
    c.blobs.push_back({"adam_v/" + p.name, p.tensor.shape(), adam_.second_moments()[i]});
  }
  return c;
}

const ckpt::Checkpoint& Trainer::best_checkpoint() const {
  if (!best_) throw Error(Errc::InsufficientData, "no epoch has been trained yet");
  return *best_;
}

namespace {

void load_params(const nn::ParamList& params, const ckpt::Checkpoint& c) {
  for (const auto& p : params) {
    const auto& b = c.get("param/" + p.name);
    if (b.shape != p.tensor.shape())
      throw Error(Errc::ShapeMismatch, "checkpoint tensor '" + p.name + "' has shape " + ad::shape_str(b.shape) +
                                           ", model expects " + ad::shape_str(p.tensor.shape()));
    auto t = p.tensor;
    std::copy(b.data.begin(), b.data.end(), t.data().begin());
  }
}

}  // namespace

void Trainer::resume(const ckpt::Checkpoint& c) {
  const auto& m = c.meta;
  if (m.at("method").get<std::string>() != spec_.name || m.at("data_hash").get<std::string>() != data_hash_ ||
      m.at("model") != to_json(model_cfg_) || m.at("train") != to_json(cfg_))
    throw Error(Errc::HashMismatch, "checkpoint was produced by a different configuration");
  const auto params = model_.params();
  load_params(params, c);
  for (std::size_t i = 0; i < params.size(); ++i) {
    adam_.first_moments()[i] = c.get("adam_m/" + params[i].name).data;
    adam_.second_moments()[i] = c.get("adam_v/" + params[i].name).data;
  }
  adam_.set_steps(m.at("adam_steps").get<std::uint64_t>());
  rng_.deserialize(m.at("rng").get<std::string>());
  epoch_ = m.at("epoch").get<int>();
  best_epoch_ = m.at("best_epoch").get<int>();
  best_sum_ = m.at("best_sum").get<double>();
  log_ = log_from_json(m.at("log"));
  best_.reset();
  if (epoch_ > 0 && best_epoch_ == epoch_) best_ = c;
}

pipeline::Model load_model(const ckpt::Checkpoint& c, const std::string& expected_hash) {
  const auto& m = c.meta;
  if (m.value("format", "") != "oostraj.model/1") throw Error(Errc::Schema, "checkpoint is not a model checkpoint");
  if (!expected_hash.empty() && m.at("data_hash").get<std::string>() != expected_hash)
    throw Error(Errc::HashMismatch, "checkpoint data hash " + m.at("data_hash").get<std::string>() +
                                        " does not match dataset " + expected_hash);
  const auto spec = pipeline::parse_method(m.at("method").get<std::string>());
  const auto tc = train_config_from_json(m.at("train"));
  pipeline::Model model(spec, model_config_from_json(m.at("model")), m.at("t_obs").get<int>(), m.at("t_pred").get<int>(),
                        tc.seed);
  load_params(model.params(), c);
  return model;
}

metrics::PredictFn predictor(const pipeline::Model& model) {
  return [&model](const sim::Scene& s) { return pipeline::infer(model, s); };
}

}  // namespace oostraj::train
