#pragma once

#include <span>
#include <utility>
#include <vector>

namespace soar {

struct AdamWConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled
  int warmup_steps = 0;
  int total_steps = 1;
  double min_lr_ratio = 0.0;  // cosine floor as a fraction of learning_rate

  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

/// Adaptive-moment optimizer state with a linear-warmup + cosine-decay schedule.
struct OptimizerState {
  AdamWConfig config;
  int step = 0;  // updates already applied
  std::vector<double> first_moment;
  std::vector<double> second_moment;

  static OptimizerState fresh(const AdamWConfig& config, std::size_t dimension);

  /// Learning rate the next update will use.
  double effective_learning_rate() const;

  bool exhausted() const noexcept { return step >= config.total_steps; }

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// Learning rate for the 1-based update index `t` under `config`'s schedule.
double scheduled_learning_rate(const AdamWConfig& config, int t);

/// One descent step: params <- params - lr * (m_hat / (sqrt(v_hat) + eps) + wd * params).
/// Throws ContractViolation on a non-finite gradient, mismatched dimensions or an
/// exhausted schedule; in that case neither argument is modified.
void apply_update_in_place(std::vector<double>& params, std::span<const double> grad,
                           OptimizerState& opt);

std::pair<std::vector<double>, OptimizerState> apply_update(std::span<const double> params,
                                                            std::span<const double> grad,
                                                            OptimizerState opt);

}  // namespace soar
