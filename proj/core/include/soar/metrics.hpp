#pragma once

// Evaluation statistics: pass@k, fail@k filtering, Vendi Score, pairwise
// cosine diversity, slope-based early stopping and windowed means.

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "soar/errors.hpp"
#include "soar/rng.hpp"

namespace soar {

struct SampleRecord {
  std::uint64_t task_id = 0;
  int samples = 0;    // n
  int successes = 0;  // c
};

/// 1 - C(n-c, k) / C(n, k): probability that a uniformly chosen size-k subset
/// of the n samples holds at least one success. Evaluated as a product of
/// ratios in log space, so it never overflows.
double pass_at_k(const SampleRecord& record, int k);

/// Keeps the tasks for which `sampler(task, rng)` produced no success in k draws.
template <class TaskT, class Sampler>
std::vector<TaskT> fail_at_k_filter(std::span<const TaskT> tasks, Sampler&& sampler, int k, Rng& rng) {
  expects(k >= 1, "fail_at_k_filter: k must be at least 1");
  std::vector<TaskT> kept;
  for (const auto& task : tasks) {
    bool solved = false;
    for (int i = 0; i < k && !solved; ++i) solved = sampler(task, rng);
    if (!solved) kept.push_back(task);
  }
  return kept;
}

/// Rows of unit-norm embedding vectors.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  /// Throws ContractViolation if any row is not unit norm within 1e-9 or rows differ in length.
  explicit EmbeddingMatrix(std::vector<std::vector<double>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  EmbeddingMatrix select(std::span<const std::size_t> indices) const;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Eigenvalues of a symmetric n x n row-major matrix by cyclic Jacobi rotations,
/// sorted descending.
std::vector<double> symmetric_eigenvalues(std::vector<double> matrix, std::size_t n,
                                          double tolerance = 1e-12);

/// exp(-sum lambda ln lambda) for a spectrum summing to one; 0 ln 0 = 0.
double exp_entropy(std::span<const double> eigenvalues);

enum class VendiRoute {
  automatic,  // the smaller of the two matrices below
  kernel,     // m x m cosine kernel K / m
  gram,       // d x d matrix X^T X / m, same nonzero spectrum
};

double vendi_score(const EmbeddingMatrix& embeddings, VendiRoute route = VendiRoute::automatic);

enum class Replacement { automatic, always, never };

struct BootstrapSummary {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

/// Vendi Score over `iterations` uniform subsamples of `subsample` rows.
/// Replacement::automatic samples without replacement when m >= subsample.
BootstrapSummary vendi_bootstrap(const EmbeddingMatrix& embeddings, int subsample, int iterations,
                                 Rng& rng, Replacement replacement = Replacement::automatic);

/// Mean of (1 - cosine) over unordered row pairs.
double pairwise_cosine_diversity(const EmbeddingMatrix& embeddings);

/// Ordered (step, value) pairs with strictly increasing steps.
class MetricSeries {
 public:
  void push(long step, double value);

  std::size_t size() const noexcept { return steps_.size(); }
  bool empty() const noexcept { return steps_.empty(); }
  std::span<const long> steps() const noexcept { return steps_; }
  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const MetricSeries&, const MetricSeries&) = default;

 private:
  std::vector<long> steps_;
  std::vector<double> values_;
};

/// Centred moving average keeping only fully covered points; returns
/// (first covered index, smoothed values).
std::pair<std::size_t, std::vector<double>> centered_moving_average(std::span<const double> values,
                                                                    int window);

/// Earliest step where the range-normalised slope of the smoothed series drops
/// below `slope_fraction` of its maximum. nullopt means no plateau (the slope
/// never drops, e.g. a straight line). A constant series returns its first step.
std::optional<long> early_stop_step(const MetricSeries& series, int smooth_window = 25,
                                    double slope_fraction = 0.15);

/// Mean of the last min(width, size) values.
double windowed_mean(std::span<const double> values, int width);
double windowed_mean(const MetricSeries& series, int width);

double mean(std::span<const double> values);
double population_stddev(std::span<const double> values);
double median(std::vector<double> values);

}  // namespace soar
