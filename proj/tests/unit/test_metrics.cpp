#include <gtest/gtest.h>

#include <cmath>

#include "oracles.hpp"
#include "soar/metrics.hpp"

using namespace soar;

namespace {

std::vector<double> unit(std::vector<double> v) {
  double n = 0;
  for (double x : v) n += x * x;
  for (auto& x : v) x /= std::sqrt(n);
  return v;
}

std::vector<std::vector<double>> random_rows(Rng& rng, std::size_t m, std::size_t d) {
  std::vector<std::vector<double>> rows(m, std::vector<double>(d));
  for (auto& r : rows) {
    for (auto& x : r) x = standard_normal(rng);
    r = unit(r);
  }
  return rows;
}

MetricSeries series_of(const std::vector<double>& v) {
  MetricSeries s;
  for (std::size_t t = 0; t < v.size(); ++t) s.push(static_cast<long>(t), v[t]);
  return s;
}

double log_choose(int n, int k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

}  // namespace

TEST(PassAtK, MatchesSubsetEnumeration) {
  for (int n = 1; n <= 10; ++n)
    for (int c = 0; c <= n; ++c)
      for (int k = 1; k <= n; ++k)
        ASSERT_NEAR(pass_at_k({0, n, c}, k), oracle::pass_at_k_enumerated(n, c, k), 1e-12)
            << "n=" << n << " c=" << c << " k=" << k;
}

TEST(PassAtK, HandCasesAndContract) {
  EXPECT_EQ(pass_at_k({0, 32, 32}, 1), 1.0);
  EXPECT_EQ(pass_at_k({0, 32, 0}, 32), 0.0);
  EXPECT_NEAR(pass_at_k({0, 4, 2}, 2), 5.0 / 6.0, 1e-15);
  EXPECT_THROW(pass_at_k({0, 4, 2}, 5), ContractViolation);
  EXPECT_THROW(pass_at_k({0, 4, 5}, 1), ContractViolation);
}

TEST(PassAtK, MonotoneInKAndC) {
  for (int c = 0; c <= 32; ++c)
    for (int k = 1; k < 32; ++k) {
      EXPECT_LE(pass_at_k({0, 32, c}, k), pass_at_k({0, 32, c}, k + 1) + 1e-15);
      if (c < 32) EXPECT_LE(pass_at_k({0, 32, c}, k), pass_at_k({0, 32, c + 1}, k) + 1e-15);
    }
}

TEST(PassAtK, LargeCountsStayFinite) {
  const double v = pass_at_k({0, 5000, 3}, 2500);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_NEAR(v, 1 - std::exp(log_choose(4997, 2500) - log_choose(5000, 2500)), 1e-9);
}

TEST(FailAtK, CertainAndImpossibleTasks) {
  Rng rng = make_rng(81);
  const std::vector<int> tasks{0, 1, 2, 3};
  auto never = [](int, Rng&) { return false; };
  auto always = [](int, Rng&) { return true; };
  EXPECT_EQ(fail_at_k_filter<int>(tasks, never, 128, rng), tasks);
  EXPECT_TRUE(fail_at_k_filter<int>(tasks, always, 128, rng).empty());
}

TEST(FailAtK, RetentionMatchesBinomial) {
  Rng rng = make_rng(82);
  const int trials = 10000;
  const std::vector<int> tasks(trials, 0);
  const auto kept = fail_at_k_filter<int>(tasks, [](int, Rng& r) { return bernoulli(r, 0.02); }, 128, rng);
  const double p = std::pow(0.98, 128);
  EXPECT_NEAR(p, 0.0754, 1e-4);
  EXPECT_LT(std::abs(static_cast<double>(kept.size()) - trials * p), 3 * std::sqrt(trials * p * (1 - p)));
}

TEST(Vendi, IdenticalOrthonormalAndHalfCosine) {
  const auto e = unit({1, 2, 3});
  EXPECT_NEAR(vendi_score(EmbeddingMatrix({e, e, e, e, e})), 1.0, 1e-9);
  EXPECT_NEAR(vendi_score(EmbeddingMatrix({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}})), 3.0, 1e-9);
  const double expected = std::exp(-(0.75 * std::log(0.75) + 0.25 * std::log(0.25)));
  EXPECT_NEAR(expected, 1.7548, 1e-4);
  EXPECT_NEAR(vendi_score(EmbeddingMatrix({{1, 0}, {0.5, std::sqrt(0.75)}})), expected, 1e-9);
}

TEST(Vendi, BothRoutesMatchEigenOracle) {
  Rng rng = make_rng(83);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = 2 + uniform_index(rng, 40), d = 2 + uniform_index(rng, 20);
    const auto rows = random_rows(rng, m, d);
    const EmbeddingMatrix x(rows);
    const double expected = oracle::vendi_eigen(rows);
    EXPECT_NEAR(vendi_score(x, VendiRoute::kernel), expected, 1e-9);
    EXPECT_NEAR(vendi_score(x, VendiRoute::gram), expected, 1e-9);
    EXPECT_GE(vendi_score(x), 1.0 - 1e-9);
    EXPECT_LE(vendi_score(x), static_cast<double>(m) + 1e-9);
  }
}

TEST(Vendi, PermutationInvariant) {
  Rng rng = make_rng(84);
  auto rows = random_rows(rng, 30, 8);
  const double a = vendi_score(EmbeddingMatrix(rows), VendiRoute::kernel);
  std::reverse(rows.begin(), rows.end());
  std::swap(rows[3], rows[17]);
  EXPECT_NEAR(vendi_score(EmbeddingMatrix(rows), VendiRoute::kernel), a, 1e-9);
}

TEST(Vendi, RejectsNonUnitRows) {
  EXPECT_THROW(EmbeddingMatrix({{1, 1}}), ContractViolation);
  EXPECT_THROW(EmbeddingMatrix({{1, 0}, {1, 0, 0}}), ContractViolation);
}

TEST(SymmetricEigenvalues, MatchEigen) {
  Rng rng = make_rng(85);
  const std::size_t n = 12;
  std::vector<double> a(n * n);
  Eigen::MatrixXd e(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) {
      a[i * n + j] = a[j * n + i] = uniform(rng, -1, 1);
      e(i, j) = e(j, i) = a[i * n + j];
    }
  const auto ours = symmetric_eigenvalues(a, n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(e);
  for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(ours[i], es.eigenvalues()[n - 1 - i], 1e-10);
}

TEST(VendiBootstrap, IdenticalRowsAndFullSubsample) {
  Rng rng = make_rng(86);
  const auto e = unit({1, 1});
  const auto same = vendi_bootstrap(EmbeddingMatrix(std::vector<std::vector<double>>(200, e)), 128, 100, rng);
  EXPECT_NEAR(same.mean, 1.0, 1e-9);
  EXPECT_NEAR(same.stddev, 0.0, 1e-9);
  const auto rows = random_rows(rng, 128, 10);
  const auto full = vendi_bootstrap(EmbeddingMatrix(rows), 128, 20, rng, Replacement::never);
  EXPECT_NEAR(full.mean, vendi_score(EmbeddingMatrix(rows)), 1e-9);
  EXPECT_LT(full.stddev, 1e-9);
}

// Two orthogonal clusters of 128: a size-128 subsample without replacement has
// a hypergeometric cluster split j, and VS = exp(H(j/128)).
TEST(VendiBootstrap, TwoClustersMatchHypergeometricOracle) {
  std::vector<std::vector<double>> rows(128, std::vector<double>{1, 0});
  rows.insert(rows.end(), 128, std::vector<double>{0, 1});
  double mu = 0, second = 0;
  for (int j = 0; j <= 128; ++j) {
    const double p = std::exp(log_choose(128, j) + log_choose(128, 128 - j) - log_choose(256, 128));
    const double q = j / 128.0;
    double h = 0;
    if (q > 0) h -= q * std::log(q);
    if (q < 1) h -= (1 - q) * std::log(1 - q);
    mu += p * std::exp(h);
    second += p * std::exp(2 * h);
  }
  const double sd = std::sqrt(second - mu * mu);
  Rng rng = make_rng(87);
  const auto b = vendi_bootstrap(EmbeddingMatrix(rows), 128, 100, rng);
  EXPECT_NEAR(mu, 2.0, 0.02);
  EXPECT_LT(std::abs(b.mean - mu), 3 * sd / std::sqrt(100.0));
}

TEST(VendiBootstrap, SmallSetsResampleWithReplacement) {
  Rng rng = make_rng(88);
  const auto rows = random_rows(rng, 40, 6);
  const auto b = vendi_bootstrap(EmbeddingMatrix(rows), 128, 10, rng);
  EXPECT_GE(b.mean, 1.0);
  EXPECT_LE(b.mean, 128.0);
  EXPECT_THROW(vendi_bootstrap(EmbeddingMatrix(rows), 128, 10, rng, Replacement::never), ContractViolation);
}

TEST(CosineDiversity, HandCases) {
  const auto e = unit({2, 1});
  EXPECT_NEAR(pairwise_cosine_diversity(EmbeddingMatrix({e, e, e})), 0.0, 1e-15);
  EXPECT_NEAR(pairwise_cosine_diversity(EmbeddingMatrix({{1, 0}, {0, 1}})), 1.0, 1e-15);
  // three unit vectors with pairwise cosine 0.5
  const double s = 1 / std::sqrt(2.0);
  EXPECT_NEAR(pairwise_cosine_diversity(EmbeddingMatrix({{s, s, 0}, {s, 0, s}, {0, s, s}})), 0.5, 1e-15);
  EXPECT_THROW(pairwise_cosine_diversity(EmbeddingMatrix({e})), ContractViolation);
}

TEST(MetricSeries, StepsMustIncrease) {
  MetricSeries s;
  s.push(0, 1.0);
  s.push(10, 2.0);
  EXPECT_THROW(s.push(10, 3.0), ContractViolation);
  EXPECT_EQ(s.size(), 2u);
}

TEST(CenteredMovingAverage, KeepsCoveredPoints) {
  const std::vector<double> v{1, 2, 3, 4, 5, 6};
  const auto [offset, smooth] = centered_moving_average(v, 3);
  EXPECT_EQ(offset, 1u);
  EXPECT_EQ(smooth, (std::vector<double>{2, 3, 4, 5}));
}

TEST(EarlyStop, RampPlateauOnset) {
  std::vector<double> v;
  for (int t = 0; t <= 400; ++t) v.push_back(std::min(1.0, t / 100.0));
  const auto step = early_stop_step(series_of(v));
  ASSERT_TRUE(step.has_value());
  EXPECT_GE(*step, 75);
  EXPECT_LE(*step, 125);
}

TEST(EarlyStop, LinearConstantAndShort) {
  std::vector<double> line, flat(100, 0.4);
  for (int t = 0; t < 100; ++t) line.push_back(0.01 * t);
  EXPECT_FALSE(early_stop_step(series_of(line)).has_value());
  EXPECT_EQ(early_stop_step(series_of(flat)), 0);
  EXPECT_THROW(early_stop_step(series_of(std::vector<double>(25, 0.0))), ContractViolation);
}

TEST(EarlyStop, PositiveAffineInvariance) {
  Rng rng = make_rng(89);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v;
    const double onset = uniform(rng, 40, 200);
    for (int t = 0; t < 300; ++t) v.push_back(std::min(1.0, t / onset) + 0.05 * standard_normal(rng));
    const double a = uniform(rng, 0.1, 20), b = uniform(rng, -5, 5);
    std::vector<double> w;
    for (double x : v) w.push_back(a * x + b);
    EXPECT_EQ(early_stop_step(series_of(v)), early_stop_step(series_of(w)));
  }
}

TEST(EarlyStop, UsesSeriesSteps) {
  MetricSeries s;
  for (int i = 0; i <= 100; ++i) s.push(10L * i, std::min(1.0, i / 40.0));
  const auto step = early_stop_step(s, 5);
  ASSERT_TRUE(step.has_value());
  EXPECT_EQ(*step % 10, 0);
  EXPECT_GE(*step, 350);
  EXPECT_LE(*step, 450);
}

TEST(WindowedMean, HandCases) {
  EXPECT_NEAR(windowed_mean(std::vector<double>{0, 0.03, 0.03}, 3), 0.02, 1e-15);
  EXPECT_EQ(windowed_mean(std::vector<double>{0.7}, 3), 0.7);
  EXPECT_EQ(windowed_mean(std::vector<double>{0.1, 0.2, 0.9}, 1), 0.9);
  EXPECT_NEAR(windowed_mean(series_of({1, 2, 3, 4}), 2), 3.5, 1e-15);
}

TEST(Summaries, MedianAndPopulationStddev) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
  EXPECT_NEAR(population_stddev(std::vector<double>{1, 3}), 1.0, 1e-15);
  EXPECT_EQ(population_stddev(std::vector<double>{5}), 0.0);
}
