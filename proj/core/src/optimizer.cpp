#include "soar/optimizer.hpp"

#include <cmath>
#include <numbers>

#include "soar/errors.hpp"

namespace soar {

OptimizerState OptimizerState::fresh(const AdamWConfig& config, std::size_t dimension) {
  expects(config.learning_rate >= 0.0, "AdamWConfig: negative learning rate");
  expects(config.total_steps > 0, "AdamWConfig: total_steps must be positive");
  expects(config.warmup_steps >= 0, "AdamWConfig: negative warmup");
  expects(config.beta1 >= 0.0 && config.beta1 < 1.0 && config.beta2 >= 0.0 && config.beta2 < 1.0,
          "AdamWConfig: betas must lie in [0, 1)");
  OptimizerState s;
  s.config = config;
  s.first_moment.assign(dimension, 0.0);
  s.second_moment.assign(dimension, 0.0);
  return s;
}

double scheduled_learning_rate(const AdamWConfig& c, int t) {
  if (c.warmup_steps > 0 && t <= c.warmup_steps)
    return c.learning_rate * static_cast<double>(t) / static_cast<double>(c.warmup_steps);
  const int decay_span = c.total_steps - c.warmup_steps;
  if (decay_span <= 0) return c.learning_rate;
  const double progress =
      static_cast<double>(t - 1 - c.warmup_steps) / static_cast<double>(decay_span);
  const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
  return c.learning_rate * (c.min_lr_ratio + (1.0 - c.min_lr_ratio) * cosine);
}

double OptimizerState::effective_learning_rate() const {
  return scheduled_learning_rate(config, step + 1);
}

void apply_update_in_place(std::vector<double>& params, std::span<const double> grad,
                           OptimizerState& opt) {
  expects(params.size() == grad.size(), "apply_update: gradient dimension mismatch");
  expects(opt.first_moment.size() == params.size() && opt.second_moment.size() == params.size(),
          "apply_update: optimizer state dimension mismatch");
  expects(!opt.exhausted(), "apply_update: schedule exhausted");
  for (double g : grad) expects(std::isfinite(g), "apply_update: non-finite gradient rejected");

  const auto& c = opt.config;
  const int t = opt.step + 1;
  const double lr = scheduled_learning_rate(c, t);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = opt.first_moment[i];
    double& v = opt.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * grad[i];
    v = c.beta2 * v + (1.0 - c.beta2) * grad[i] * grad[i];
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    params[i] -= lr * (m_hat / (std::sqrt(v_hat) + c.epsilon) + c.weight_decay * params[i]);
  }
  opt.step = t;
}

std::pair<std::vector<double>, OptimizerState> apply_update(std::span<const double> params,
                                                            std::span<const double> grad,
                                                            OptimizerState opt) {
  std::vector<double> out(params.begin(), params.end());
  apply_update_in_place(out, grad, opt);
  return {std::move(out), std::move(opt)};
}

}  // namespace soar
