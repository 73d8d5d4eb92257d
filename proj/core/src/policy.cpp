#include "soar/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "soar/errors.hpp"

namespace soar {

double log_sum_exp(std::span<const double> values) {
  expects(!values.empty(), "log_sum_exp: empty input");
  const double hi = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (double v : values) acc += std::exp(v - hi);
  return hi + std::log(acc);
}

namespace {

std::vector<double> scaled(std::span<const double> logits, double temperature) {
  std::vector<double> out(logits.begin(), logits.end());
  for (double& x : out) x /= temperature;
  return out;
}

}  // namespace

CategoricalPolicy::CategoricalPolicy(std::vector<double> logits, double temperature)
    : logits_(std::move(logits)), temperature_(temperature) {
  expects(!logits_.empty(), "CategoricalPolicy: no outcomes");
  expects(temperature_ > 0.0 && std::isfinite(temperature_),
          "CategoricalPolicy: temperature must be positive and finite");
  for (double x : logits_) expects(std::isfinite(x), "CategoricalPolicy: non-finite logit");
  log_normalizer_ = log_sum_exp(scaled(logits_, temperature_));
}

std::vector<double> CategoricalPolicy::probabilities() const {
  std::vector<double> p(logits_.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    p[i] = std::exp(logits_[i] / temperature_ - log_normalizer_);
  return p;
}

double CategoricalPolicy::probability(std::size_t outcome) const {
  expects(outcome < logits_.size(), "CategoricalPolicy::probability: outcome out of range");
  return std::exp(logits_[outcome] / temperature_ - log_normalizer_);
}

std::size_t CategoricalPolicy::argmax() const noexcept {
  return static_cast<std::size_t>(std::max_element(logits_.begin(), logits_.end()) -
                                  logits_.begin());
}

double log_prob(const CategoricalPolicy& policy, std::size_t outcome) {
  expects(outcome < policy.size(), "log_prob: outcome out of range");
  return policy.logits()[outcome] / policy.temperature() - policy.log_normalizer();
}

GradientVector score_gradient(const CategoricalPolicy& policy, std::size_t outcome) {
  expects(outcome < policy.size(), "score_gradient: outcome out of range");
  GradientVector g = policy.probabilities();
  const double inv_t = 1.0 / policy.temperature();
  for (double& x : g) x = -x * inv_t;
  g[outcome] += inv_t;
  return g;
}

std::size_t sample(const CategoricalPolicy& policy, Rng& rng) {
  const double u = uniform01(rng);
  const double inv_t = 1.0 / policy.temperature();
  double cumulative = 0.0;
  const auto logits = policy.logits();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    cumulative += std::exp(logits[i] * inv_t - policy.log_normalizer());
    if (u < cumulative) return i;
  }
  // Rounding left a sliver of mass above the last cumulative sum; give it to
  // the last outcome with non-negligible probability.
  for (std::size_t i = logits.size(); i-- > 0;)
    if (std::exp(logits[i] * inv_t - policy.log_normalizer()) > 0.0) return i;
  return logits.size() - 1;
}

KlResult kl_to_reference(const CategoricalPolicy& policy, const CategoricalPolicy& reference) {
  expects(policy.size() == reference.size(), "kl_to_reference: dimension mismatch");
  const auto p = policy.probabilities();
  double kl = 0.0;
  std::vector<double> log_ratio(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    log_ratio[i] = log_prob(policy, i) - log_prob(reference, i);
    kl += p[i] * log_ratio[i];
  }
  // dKL/dz_j = p_j (log_ratio_j - KL) / T
  GradientVector g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    g[i] = p[i] * (log_ratio[i] - kl) / policy.temperature();
  return {std::max(kl, 0.0), std::move(g)};
}

}  // namespace soar
