#pragma once

// REINFORCE leave-one-out estimators and rejection-sampling wrappers.
//
// With advantages A_i = R_i - mean_{j != i} R_j the group gradient is
// sum_i A_i grad log pi(z_i). Because sum_i A_i == 0, drawing z from the
// proposal restricted to an accept set S and renormalised gives exactly the
// same update whether log-probs are taken under the restricted distribution
// or under the raw proposal: the -log pi0(S) shift cancels.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "soar/policy.hpp"
#include "soar/rng.hpp"

namespace soar {

struct RolloutOutcome {
  std::size_t outcome = 0;
  double log_prob = 0.0;  // at sampling time
  double reward = 0.0;
};

/// g >= 2 rollouts sharing one prompt / arm.
struct RolloutGroup {
  std::vector<RolloutOutcome> outcomes;

  std::size_t size() const noexcept { return outcomes.size(); }
  std::vector<double> rewards() const;
};

using AdvantageSet = std::vector<double>;

AdvantageSet rloo_advantages(std::span<const double> rewards);

/// sum_i A_i * score_gradient(policy, z_i).
GradientVector rloo_policy_gradient(const CategoricalPolicy& policy, const RolloutGroup& group);

/// Plain REINFORCE without a baseline: sum_i R_i * score_gradient(policy, z_i).
/// Only used to show that the filtering identity needs the leave-one-out baseline.
GradientVector reinforce_policy_gradient(const CategoricalPolicy& policy,
                                         const RolloutGroup& group);

/// Membership test for the accept set S.
class AcceptPredicate {
 public:
  explicit AcceptPredicate(std::function<bool(std::size_t)> test) : test_(std::move(test)) {}

  static AcceptPredicate all();
  static AcceptPredicate of(std::vector<std::size_t> members);

  bool operator()(std::size_t outcome) const { return test_(outcome); }

  /// Proposal mass of S.
  double mass(const CategoricalPolicy& proposal) const;

 private:
  std::function<bool(std::size_t)> test_;
};

struct FilteredDraw {
  std::size_t outcome;
  int tries_used;
};

inline constexpr int kDefaultMaxTries = 256;

/// Draws from the proposal until the outcome is accepted.
/// Throws ResampleBudgetError when max_tries draws were all rejected.
FilteredDraw filtered_sample(const CategoricalPolicy& proposal, const AcceptPredicate& accept,
                             Rng& rng, int max_tries = kDefaultMaxTries);

/// Log-probabilities of the proposal restricted to S and renormalised
/// (-inf outside S).
std::vector<double> restricted_log_probs(const CategoricalPolicy& proposal,
                                         const AcceptPredicate& accept);

struct FilteredGradientCheck {
  GradientVector filtered;    // via log pi(z) = log pi0(z) - log pi0(S)
  GradientVector unfiltered;  // via log pi0(z)
  double max_abs_diff = 0.0;
};

/// Computes the RLOO gradient both ways for a group of accepted outcomes.
FilteredGradientCheck verify_filtered_gradient_identity(const CategoricalPolicy& proposal,
                                                        const AcceptPredicate& accept,
                                                        std::span<const std::size_t> outcomes,
                                                        std::span<const double> rewards);

}  // namespace soar
