#pragma once

#include <cstdint>
#include <vector>

#include "oostraj/nn.hpp"

namespace oostraj::optim {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double grad_clip = 0.0;  // global L2 norm; 0 disables
};

/// Adam with bias correction. Moment buffers are shaped like their
/// parameters; step() consumes and then zeroes every gradient.
class Adam {
 public:
  Adam(nn::ParamList params, AdamConfig cfg);

  /// Throws Error(MissingGradient) if any parameter has no gradient.
  void step();
  void zero_grad();

  std::uint64_t steps() const { return step_; }
  const AdamConfig& config() const { return cfg_; }
  const nn::ParamList& params() const { return params_; }
  std::vector<std::vector<double>>& first_moments() { return m_; }
  std::vector<std::vector<double>>& second_moments() { return v_; }
  const std::vector<std::vector<double>>& first_moments() const { return m_; }
  const std::vector<std::vector<double>>& second_moments() const { return v_; }
  void set_steps(std::uint64_t s) { step_ = s; }

  /// L2 norm over all gradients (missing gradients count as zero).
  double grad_norm() const;

 private:
  nn::ParamList params_;
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::uint64_t step_ = 0;
};

}  // namespace oostraj::optim
