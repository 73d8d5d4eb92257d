#include "soar/rloo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "soar/errors.hpp"

namespace soar {

std::vector<double> RolloutGroup::rewards() const {
  std::vector<double> r(outcomes.size());
  std::transform(outcomes.begin(), outcomes.end(), r.begin(),
                 [](const RolloutOutcome& o) { return o.reward; });
  return r;
}

AdvantageSet rloo_advantages(std::span<const double> rewards) {
  const std::size_t g = rewards.size();
  expects(g >= 2, "rloo_advantages: group size must be at least 2");
  for (double r : rewards) expects(std::isfinite(r), "rloo_advantages: non-finite reward");
  // A_i = R_i - (S - R_i)/(g-1) = (g R_i - S)/(g-1), with S accumulated once.
  // Centering first keeps the sum at round-off level even for large offsets.
  const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / static_cast<double>(g);
  std::vector<double> centered(g);
  for (std::size_t i = 0; i < g; ++i) centered[i] = rewards[i] - mean;
  const double residual =
      std::accumulate(centered.begin(), centered.end(), 0.0) / static_cast<double>(g);
  const double scale = static_cast<double>(g) / static_cast<double>(g - 1);
  AdvantageSet a(g);
  for (std::size_t i = 0; i < g; ++i) a[i] = scale * (centered[i] - residual);
  return a;
}

namespace {

void check_group(const CategoricalPolicy& policy, const RolloutGroup& group) {
  expects(group.size() >= 2, "RolloutGroup: group size must be at least 2");
  for (const auto& o : group.outcomes)
    expects(o.outcome < policy.size(), "RolloutGroup: outcome outside policy support");
}

}  // namespace

GradientVector rloo_policy_gradient(const CategoricalPolicy& policy, const RolloutGroup& group) {
  check_group(policy, group);
  const auto adv = rloo_advantages(group.rewards());
  // sum_i A_i (e_{z_i} - p) / T; the -p term vanishes because sum_i A_i = 0,
  // but it is kept so the result is the literal sum of score gradients.
  const auto p = policy.probabilities();
  const double inv_t = 1.0 / policy.temperature();
  const double adv_sum = std::accumulate(adv.begin(), adv.end(), 0.0);
  GradientVector g(policy.size());
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = -adv_sum * p[j] * inv_t;
  for (std::size_t i = 0; i < group.size(); ++i) g[group.outcomes[i].outcome] += adv[i] * inv_t;
  return g;
}

GradientVector reinforce_policy_gradient(const CategoricalPolicy& policy,
                                         const RolloutGroup& group) {
  check_group(policy, group);
  GradientVector g(policy.size(), 0.0);
  for (const auto& o : group.outcomes) {
    const auto s = score_gradient(policy, o.outcome);
    for (std::size_t j = 0; j < g.size(); ++j) g[j] += o.reward * s[j];
  }
  return g;
}

AcceptPredicate AcceptPredicate::all() {
  return AcceptPredicate([](std::size_t) { return true; });
}

AcceptPredicate AcceptPredicate::of(std::vector<std::size_t> members) {
  std::sort(members.begin(), members.end());
  return AcceptPredicate([m = std::move(members)](std::size_t z) {
    return std::binary_search(m.begin(), m.end(), z);
  });
}

double AcceptPredicate::mass(const CategoricalPolicy& proposal) const {
  const auto p = proposal.probabilities();
  double s = 0.0;
  for (std::size_t z = 0; z < p.size(); ++z)
    if ((*this)(z)) s += p[z];
  return s;
}

FilteredDraw filtered_sample(const CategoricalPolicy& proposal, const AcceptPredicate& accept,
                             Rng& rng, int max_tries) {
  expects(max_tries >= 1, "filtered_sample: max_tries must be at least 1");
  for (int t = 1; t <= max_tries; ++t) {
    const std::size_t z = sample(proposal, rng);
    if (accept(z)) return {z, t};
  }
  throw ResampleBudgetError(
      "filtered_sample: no accepted outcome in " + std::to_string(max_tries) + " tries",
      max_tries);
}

std::vector<double> restricted_log_probs(const CategoricalPolicy& proposal,
                                         const AcceptPredicate& accept) {
  const auto logits = proposal.logits();
  std::vector<double> kept;
  for (std::size_t z = 0; z < logits.size(); ++z)
    if (accept(z)) kept.push_back(logits[z] / proposal.temperature());
  expects(!kept.empty(), "restricted_log_probs: empty accept set");
  const double lse = log_sum_exp(kept);
  std::vector<double> out(logits.size(), -std::numeric_limits<double>::infinity());
  for (std::size_t z = 0; z < logits.size(); ++z)
    if (accept(z)) out[z] = logits[z] / proposal.temperature() - lse;
  return out;
}

FilteredGradientCheck verify_filtered_gradient_identity(const CategoricalPolicy& proposal,
                                                        const AcceptPredicate& accept,
                                                        std::span<const std::size_t> outcomes,
                                                        std::span<const double> rewards) {
  expects(outcomes.size() == rewards.size(),
          "verify_filtered_gradient_identity: outcomes/rewards length mismatch");
  for (std::size_t z : outcomes) {
    expects(z < proposal.size(), "verify_filtered_gradient_identity: outcome out of range");
    expects(accept(z), "verify_filtered_gradient_identity: outcome outside accept set");
  }
  const auto adv = rloo_advantages(rewards);
  const double inv_t = 1.0 / proposal.temperature();
  const std::size_t k = proposal.size();

  // Restricted distribution: pi(z) = pi0(z) 1[z in S] / pi0(S).
  const auto restricted = restricted_log_probs(proposal, accept);
  std::vector<double> pi(k);
  for (std::size_t z = 0; z < k; ++z) pi[z] = std::exp(restricted[z]);

  FilteredGradientCheck out;
  out.filtered.assign(k, 0.0);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    // grad log pi(z) = (e_z - pi) / T
    for (std::size_t j = 0; j < k; ++j) out.filtered[j] -= adv[i] * pi[j] * inv_t;
    out.filtered[outcomes[i]] += adv[i] * inv_t;
  }

  out.unfiltered.assign(k, 0.0);
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const auto s = score_gradient(proposal, outcomes[i]);
    for (std::size_t j = 0; j < k; ++j) out.unfiltered[j] += adv[i] * s[j];
  }

  for (std::size_t j = 0; j < k; ++j)
    out.max_abs_diff = std::max(out.max_abs_diff, std::abs(out.filtered[j] - out.unfiltered[j]));
  return out;
}

}  // namespace soar
