#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "soar/errors.hpp"
#include "soar/rloo.hpp"

using namespace soar;

namespace {

RolloutGroup group_of(const CategoricalPolicy& pol, std::vector<std::size_t> zs, std::vector<double> rs) {
  RolloutGroup g;
  for (std::size_t i = 0; i < zs.size(); ++i) g.outcomes.push_back({zs[i], log_prob(pol, zs[i]), rs[i]});
  return g;
}

}  // namespace

TEST(RlooAdvantages, HandEvaluatedCases) {
  for (double a : rloo_advantages(std::vector<double>{0.3, 0.3, 0.3, 0.3})) EXPECT_NEAR(a, 0.0, 1e-15);
  const auto a = rloo_advantages(std::vector<double>{1.0, 0.0, 0.0});
  EXPECT_NEAR(a[0], 1.0, 1e-15);
  EXPECT_NEAR(a[1], -0.5, 1e-15);
  EXPECT_NEAR(a[2], -0.5, 1e-15);
  const auto b = rloo_advantages(std::vector<double>{2.0, 4.0});
  EXPECT_NEAR(b[0], -2.0, 1e-15);
  EXPECT_NEAR(b[1], 2.0, 1e-15);
}

TEST(RlooAdvantages, RejectsSingletonAndNonFinite) {
  EXPECT_THROW(rloo_advantages(std::vector<double>{1.0}), ContractViolation);
  EXPECT_THROW(rloo_advantages(std::vector<double>{1.0, NAN}), ContractViolation);
}

TEST(RlooAdvantages, SumToZero) {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> r(2 + uniform_index(rng, 15));
    for (auto& x : r) x = uniform(rng, -150, 150);
    double s = 0;
    for (double a : rloo_advantages(r)) s += a;
    ASSERT_NEAR(s, 0.0, 1e-12);
  }
}

TEST(RlooGradient, EqualRewardsGiveZero) {
  const CategoricalPolicy pol({0.2, 1.0, -0.4});
  for (double g : rloo_policy_gradient(pol, group_of(pol, {0, 1, 1, 2}, {5, 5, 5, 5}))) EXPECT_NEAR(g, 0.0, 1e-14);
}

TEST(RlooGradient, RewardShiftInvariant) {
  Rng rng = make_rng(12);
  const CategoricalPolicy pol({0.2, 1.0, -0.4, 0.0});
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::size_t> zs(5);
    std::vector<double> rs(5), shifted(5);
    for (std::size_t i = 0; i < 5; ++i) {
      zs[i] = uniform_index(rng, 4);
      rs[i] = uniform(rng, 0, 120);
      shifted[i] = rs[i] + 7.3;
    }
    const auto a = rloo_policy_gradient(pol, group_of(pol, zs, rs));
    const auto b = rloo_policy_gradient(pol, group_of(pol, zs, shifted));
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(a[j], b[j], 1e-10);
  }
}

// Exact expectation over all 4^3 outcome triples against g * grad E[R].
TEST(RlooGradient, ExpectationMatchesEnumeration) {
  const std::vector<double> logits{0.5, -0.25, 1.0, 0.0};
  const std::vector<double> reward{3.0, -1.0, 0.5, 2.0};
  const CategoricalPolicy pol(logits);
  const auto p = oracle::softmax(logits);
  std::vector<long double> expected(4, 0.0L);
  for (std::size_t a = 0; a < 4; ++a)
    for (std::size_t b = 0; b < 4; ++b)
      for (std::size_t c = 0; c < 4; ++c) {
        const auto g = rloo_policy_gradient(pol, group_of(pol, {a, b, c}, {reward[a], reward[b], reward[c]}));
        for (std::size_t j = 0; j < 4; ++j) expected[j] += p[a] * p[b] * p[c] * g[j];
      }
  for (std::size_t j = 0; j < 4; ++j) {
    long double grad_j = 0;  // d/dlogit_j sum_z p_z R_z
    for (std::size_t z = 0; z < 4; ++z) grad_j += p[z] * reward[z] * ((z == j ? 1.0L : 0.0L) - p[j]);
    EXPECT_NEAR(static_cast<double>(expected[j]), static_cast<double>(3 * grad_j), 1e-12);
  }
}

TEST(FilteredSample, AcceptAllReproducesProposal) {
  const CategoricalPolicy pol({0.0, 1.0, -1.0});
  Rng a = make_rng(13), b = make_rng(13);
  for (int i = 0; i < 1000; ++i) {
    const auto d = filtered_sample(pol, AcceptPredicate::all(), a);
    ASSERT_EQ(d.outcome, sample(pol, b));
    ASSERT_EQ(d.tries_used, 1);
  }
}

TEST(FilteredSample, RenormalisedFrequencies) {
  Rng rng = make_rng(14);
  const CategoricalPolicy pol({0, 0, 0, 0});
  const auto accept = AcceptPredicate::of({0, 1, 2});
  const int n = 100000;
  std::vector<int> counts(4, 0);
  for (int i = 0; i < n; ++i) ++counts[filtered_sample(pol, accept, rng).outcome];
  EXPECT_EQ(counts[3], 0);
  const double p = 1.0 / 3.0, sigma = std::sqrt(n * p * (1 - p));
  double chi2 = 0;
  for (int z = 0; z < 3; ++z) {
    EXPECT_LT(std::abs(counts[z] - n * p), 3 * sigma);
    chi2 += (counts[z] - n * p) * (counts[z] - n * p) / (n * p);
  }
  EXPECT_LT(chi2, 9.21);  // chi-square, 2 dof, 0.01
}

TEST(FilteredSample, BudgetExhaustionCarriesTries) {
  Rng rng = make_rng(15);
  const CategoricalPolicy pol({0, 0, 0, std::log(1e-9) + std::log(3.0)});
  try {
    filtered_sample(pol, AcceptPredicate::of({3}), rng, 10);
    FAIL() << "expected a resample-budget error";
  } catch (const ResampleBudgetError& e) {
    EXPECT_EQ(e.tries_used(), 10);
  }
}

TEST(RestrictedLogProbs, RenormaliseOverAcceptSet) {
  const CategoricalPolicy pol({1.0, 2.0, 0.5, -1.0});
  const auto lp = restricted_log_probs(pol, AcceptPredicate::of({0, 2}));
  const auto p = oracle::softmax({1.0, 0.5});
  EXPECT_NEAR(lp[0], static_cast<double>(std::log(p[0])), 1e-14);
  EXPECT_NEAR(lp[2], static_cast<double>(std::log(p[1])), 1e-14);
  EXPECT_TRUE(std::isinf(lp[1]) && lp[1] < 0);
  EXPECT_NEAR(AcceptPredicate::of({0, 2}).mass(pol), pol.probability(0) + pol.probability(2), 1e-15);
}

TEST(FilteredIdentity, HandCaseAndEqualRewards) {
  const CategoricalPolicy pol({0.3, -0.2, 0.9, 1.4});
  const auto s = AcceptPredicate::of({0, 1, 2});
  const std::vector<std::size_t> zs{0, 1, 2};
  const auto r = verify_filtered_gradient_identity(pol, s, zs, std::vector<double>{1, 0, 0});
  EXPECT_LT(r.max_abs_diff, 1e-10);
  const auto flat = verify_filtered_gradient_identity(pol, s, zs, std::vector<double>{2, 2, 2});
  EXPECT_EQ(flat.max_abs_diff, 0.0);
  for (double g : flat.filtered) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(FilteredIdentity, RejectsOutcomeOutsideAcceptSet) {
  const CategoricalPolicy pol({0, 0, 0});
  const std::vector<std::size_t> zs{0, 2};
  EXPECT_THROW(verify_filtered_gradient_identity(pol, AcceptPredicate::of({0, 1}), zs, std::vector<double>{1, 0}),
               ContractViolation);
}

TEST(FilteredIdentity, RandomInstances) {
  Rng rng = make_rng(16);
  for (int trial = 0; trial < 100; ++trial) {
    const auto k = 3 + uniform_index(rng, 8);
    std::vector<double> logits(k);
    for (auto& x : logits) x = uniform(rng, -4, 4);
    std::vector<std::size_t> members;
    for (std::size_t z = 0; z < k; ++z)
      if (bernoulli(rng, 0.6)) members.push_back(z);
    if (members.empty()) members.push_back(0);
    const auto g = 2 + uniform_index(rng, 10);
    std::vector<std::size_t> zs(g);
    std::vector<double> rs(g);
    for (std::size_t i = 0; i < g; ++i) {
      zs[i] = members[uniform_index(rng, members.size())];
      rs[i] = uniform(rng, -1, 1);
    }
    const auto r = verify_filtered_gradient_identity(CategoricalPolicy(logits, uniform(rng, 0.5, 2)),
                                                     AcceptPredicate::of(members), zs, rs);
    ASSERT_LT(r.max_abs_diff, 1e-10);
  }
}

// Without the leave-one-out baseline the -grad log pi0(S) term survives.
TEST(FilteredIdentity, PlainReinforceBreaksIt) {
  const std::vector<double> logits{0.3, -0.2, 0.9, 1.4};
  const CategoricalPolicy pol(logits);
  const std::vector<std::size_t> zs{0, 1, 2};
  const std::vector<double> rs{1, 0, 0};
  const auto unfiltered = reinforce_policy_gradient(pol, group_of(pol, zs, rs));
  const auto restricted = oracle::softmax({0.3, -0.2, 0.9});
  double diff = 0;
  for (std::size_t j = 0; j < 4; ++j) {
    long double filtered = 0;
    for (std::size_t i = 0; i < 3; ++i)
      filtered += rs[i] * ((zs[i] == j ? 1.0L : 0.0L) - (j < 3 ? restricted[j] : 0.0L));
    diff = std::max(diff, std::abs(static_cast<double>(filtered) - unfiltered[j]));
  }
  EXPECT_GT(diff, 1e-3);
}
