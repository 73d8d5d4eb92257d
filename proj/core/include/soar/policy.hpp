#pragma once

// Categorical policies over a finite outcome set. Both the teacher's level
// distribution and the student's per-task answer head are instances.

#include <cstddef>
#include <span>
#include <vector>

#include "soar/rng.hpp"

namespace soar {

/// Gradient with respect to a parameter vector (logits or latent skills).
using GradientVector = std::vector<double>;

/// Numerically stable log(sum(exp(x))).
double log_sum_exp(std::span<const double> values);

/// softmax(logits / temperature) with finite, strictly positive logits check.
class CategoricalPolicy {
 public:
  explicit CategoricalPolicy(std::vector<double> logits, double temperature = 1.0);

  std::size_t size() const noexcept { return logits_.size(); }
  std::span<const double> logits() const noexcept { return logits_; }
  double temperature() const noexcept { return temperature_; }

  /// log sum_j exp(logit_j / temperature).
  double log_normalizer() const noexcept { return log_normalizer_; }

  std::vector<double> probabilities() const;
  double probability(std::size_t outcome) const;

  /// Index of the largest logit; ties resolve to the lowest index.
  std::size_t argmax() const noexcept;

 private:
  std::vector<double> logits_;
  double temperature_;
  double log_normalizer_;
};

double log_prob(const CategoricalPolicy& policy, std::size_t outcome);

/// d/d(logits) log pi(outcome) = (onehot(outcome) - p) / temperature.
GradientVector score_gradient(const CategoricalPolicy& policy, std::size_t outcome);

/// Inverse-CDF draw using one uniform variate.
std::size_t sample(const CategoricalPolicy& policy, Rng& rng);

struct KlResult {
  double value;
  GradientVector gradient;  // w.r.t. the policy's logits
};

/// KL(policy || reference) and its gradient w.r.t. the policy logits.
KlResult kl_to_reference(const CategoricalPolicy& policy, const CategoricalPolicy& reference);

}  // namespace soar
