#pragma once

// Joint training of any learned method: loss = L_denoise + lambda * L_pred,
// mini-batches of scenes (per-scene graphs, gradients accumulated), Adam,
// per-epoch validation in raw pixels and best-validation-SUM selection.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "oostraj/checkpoint.hpp"
#include "oostraj/metrics.hpp"
#include "oostraj/optim.hpp"
#include "oostraj/pipeline.hpp"

namespace oostraj::train {

struct TrainConfig {
  int epochs = 200;
  int batch_size = 16;
  double lambda = 1.0;
  optim::AdamConfig adam;
  std::uint64_t seed = 0;  // model initialization and shuffling
  /// Each epoch, draw the training target of every scene uniformly from the
  /// agents whose visual track covers the whole window (the others stay in
  /// sight). Off: always the designated out-of-sight agent.
  bool resample_out_of_sight = true;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const pipeline::ModelConfig& c);
pipeline::ModelConfig model_config_from_json(const nlohmann::json& j);

struct EpochLog {
  int epoch = 0;  // 1-based
  double loss_denoise = 0.0;  // mean over training scenes, normalized units
  double loss_pred = 0.0;
  double val_mse_d = 0.0;  // pixels
  double val_mse_p = 0.0;
  double val_sum = 0.0;
};

std::string log_header();          // CSV header line
std::string log_row(const EpochLog& e);

/// Loss terms for one scene.
struct SceneLoss {
  ad::Tensor denoise, pred, total;
};
SceneLoss scene_loss(const pipeline::Model& model, const pipeline::Inputs& in, const pipeline::Targets& tgt, double lambda);

class Trainer {
 public:
  /// `data_hash` ties checkpoints to the dataset contract.
  Trainer(const pipeline::MethodSpec& spec, const pipeline::ModelConfig& model_cfg, const TrainConfig& cfg,
          const std::vector<sim::Scene>& train, const std::vector<sim::Scene>& val, std::string data_hash);

  /// One pass over the training split followed by validation. Throws
  /// NonFiniteLoss naming the epoch and batch.
  EpochLog run_epoch();
  /// Runs until cfg.epochs, calling `on_epoch` after each.
  void run(const std::function<void(const EpochLog&)>& on_epoch = {});

  int epoch() const { return epoch_; }
  const std::vector<EpochLog>& log() const { return log_; }
  const pipeline::Model& model() const { return model_; }
  int best_epoch() const { return best_epoch_; }

  /// Full training state after the latest epoch.
  ckpt::Checkpoint last_checkpoint() const;
  /// State at the best validation epoch (throws if no epoch has run).
  const ckpt::Checkpoint& best_checkpoint() const;
  /// Continues from a checkpoint produced by the same configuration.
  void resume(const ckpt::Checkpoint& c);

 private:
  struct Prepared {
    pipeline::Inputs in;
    pipeline::Targets tgt;
  };

  pipeline::MethodSpec spec_;
  pipeline::ModelConfig model_cfg_;
  TrainConfig cfg_;
  std::vector<sim::Scene> val_;
  std::string data_hash_;
  pipeline::Model model_;
  optim::Adam adam_;
  Rng rng_;
  std::vector<std::vector<Prepared>> train_;  // per scene, per training view
  int epoch_ = 0;
  std::vector<EpochLog> log_;
  int best_epoch_ = 0;
  double best_sum_ = 0.0;
  std::optional<ckpt::Checkpoint> best_;
};

/// Metadata + parameters -> model. Validates `expected_hash` against the
/// checkpoint (HashMismatch) unless it is empty.
pipeline::Model load_model(const ckpt::Checkpoint& c, const std::string& expected_hash = "");

/// Wraps infer() for metrics::evaluate.
metrics::PredictFn predictor(const pipeline::Model& model);

}  // namespace oostraj::train
