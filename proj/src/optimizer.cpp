#include "treegcn/optimizer.hpp"

#include <cmath>
#include <string>

#include "treegcn/error.hpp"

namespace treegcn {

void AdamConfig::validate() const {
  if (!(learning_rate > 0.0)) raise(ErrorKind::kConfig, "learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    raise(ErrorKind::kConfig, "betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) raise(ErrorKind::kConfig, "epsilon must be positive");
}

void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads, OptimizerState& state,
               const AdamConfig& config) {
  config.validate();
  if (grads.size() != params.size()) {
    raise(ErrorKind::kContract, "adam_step: " + std::to_string(params.size()) + " parameters but " +
                                    std::to_string(grads.size()) + " gradients");
  }
  if (state.empty()) {
    for (const Tensor& p : params) {
      state.first_moment.emplace_back(p.size(), 0.0);
      state.second_moment.emplace_back(p.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
    raise(ErrorKind::kContract, "adam_step: optimizer state does not match parameter count");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const std::size_t n = params[i].size();
    if (grads[i].size() != n || state.first_moment[i].size() != n || state.second_moment[i].size() != n) {
      raise(ErrorKind::kContract, "adam_step: size mismatch for parameter " + std::to_string(i) + " of shape " +
                                      shape_string(params[i].shape()));
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(config.beta1, t);
  const double correction2 = 1.0 - std::pow(config.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].mutable_data();
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const auto& g = grads[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      p[j] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
}

}  // namespace treegcn
