#include "oostraj/optim.hpp"

#include <cmath>

#include "oostraj/error.hpp"

namespace oostraj::optim {

Adam::Adam(nn::ParamList params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  for (const auto& p : params_) {
    m_.emplace_back(p.tensor.size(), 0.0);
    v_.emplace_back(p.tensor.size(), 0.0);
  }
}

double Adam::grad_norm() const {
  double s = 0.0;
  for (const auto& p : params_)
    if (p.tensor.has_grad())
      for (double g : p.tensor.grad()) s += g * g;
  return std::sqrt(s);
}

void Adam::step() {
  for (const auto& p : params_)
    if (!p.tensor.has_grad()) throw Error(Errc::MissingGradient, "parameter '" + p.name + "' has no gradient");

  double clip = 1.0;
  if (cfg_.grad_clip > 0.0) {
    const double norm = grad_norm();
    if (norm > cfg_.grad_clip) clip = cfg_.grad_clip / norm;
  }

  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Tensor t = params_[i].tensor;
    auto w = t.data();
    auto g = t.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j] * clip;
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      w[j] -= cfg_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
    }
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

}  // namespace oostraj::optim
