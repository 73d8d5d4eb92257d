#include "soar/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace soar {

double pass_at_k(const SampleRecord& record, int k) {
  const int n = record.samples;
  const int c = record.successes;
  expects(n >= 1, "pass_at_k: no samples");
  expects(c >= 0 && c <= n, "pass_at_k: successes outside [0, n]");
  expects(k >= 1 && k <= n, "pass_at_k: k outside [1, n]");
  if (n - c < k) return 1.0;
  // C(n-c, k)/C(n, k) = prod_{i<k} (n-c-i)/(n-i)
  double log_ratio = 0.0;
  for (int i = 0; i < k; ++i)
    log_ratio += std::log(static_cast<double>(n - c - i)) - std::log(static_cast<double>(n - i));
  return 1.0 - std::exp(log_ratio);
}

EmbeddingMatrix::EmbeddingMatrix(std::vector<std::vector<double>> rows) {
  rows_ = rows.size();
  cols_ = rows.empty() ? 0 : rows.front().size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    expects(r.size() == cols_, "EmbeddingMatrix: ragged rows");
    double norm2 = 0.0;
    for (double x : r) norm2 += x * x;
    expects(std::abs(std::sqrt(norm2) - 1.0) <= 1e-9, "EmbeddingMatrix: row is not unit norm");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

EmbeddingMatrix EmbeddingMatrix::select(std::span<const std::size_t> indices) const {
  EmbeddingMatrix out;
  out.rows_ = indices.size();
  out.cols_ = cols_;
  out.data_.reserve(out.rows_ * cols_);
  for (std::size_t i : indices) {
    expects(i < rows_, "EmbeddingMatrix::select: index out of range");
    const auto r = row(i);
    out.data_.insert(out.data_.end(), r.begin(), r.end());
  }
  return out;
}

std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t n, double tolerance) {
  expects(a.size() == n * n, "symmetric_eigenvalues: matrix size mismatch");
  auto at = [&a, n](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };

  double total = 0.0;
  for (double x : a) total += x * x;
  const double threshold = tolerance * tolerance * std::max(total, 1e-300);

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += 2.0 * at(i, j) * at(i, j);
    if (off <= threshold) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = at(i, i);
  std::sort(eig.begin(), eig.end(), std::greater<>());
  return eig;
}

double exp_entropy(std::span<const double> eigenvalues) {
  double h = 0.0;
  for (double l : eigenvalues)
    if (l > 0.0) h -= l * std::log(l);
  return std::exp(h);
}

double vendi_score(const EmbeddingMatrix& x, VendiRoute route) {
  const std::size_t m = x.rows();
  const std::size_t d = x.cols();
  expects(m >= 1, "vendi_score: no rows");
  if (route == VendiRoute::automatic) route = d < m ? VendiRoute::gram : VendiRoute::kernel;

  const double inv_m = 1.0 / static_cast<double>(m);
  if (route == VendiRoute::kernel) {
    std::vector<double> k(m * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i; j < m; ++j) {
        const auto a = x.row(i);
        const auto b = x.row(j);
        const double s = std::inner_product(a.begin(), a.end(), b.begin(), 0.0) * inv_m;
        k[i * m + j] = s;
        k[j * m + i] = s;
      }
    return exp_entropy(symmetric_eigenvalues(std::move(k), m));
  }
  std::vector<double> g(d * d, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    const auto v = x.row(r);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i; j < d; ++j) g[i * d + j] += v[i] * v[j];
  }
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i; j < d; ++j) {
      g[i * d + j] *= inv_m;
      g[j * d + i] = g[i * d + j];
    }
  return exp_entropy(symmetric_eigenvalues(std::move(g), d));
}

BootstrapSummary vendi_bootstrap(const EmbeddingMatrix& x, int subsample, int iterations, Rng& rng,
                                 Replacement replacement) {
  expects(x.rows() >= 1, "vendi_bootstrap: no rows");
  expects(subsample >= 1 && iterations >= 1, "vendi_bootstrap: subsample and iterations must be positive");
  const auto m = x.rows();
  const auto s = static_cast<std::size_t>(subsample);
  bool with_replacement = replacement == Replacement::always ||
                          (replacement == Replacement::automatic && m < s);
  expects(with_replacement || s <= m, "vendi_bootstrap: subsample exceeds rows without replacement");

  std::vector<double> scores;
  scores.reserve(static_cast<std::size_t>(iterations));
  std::vector<std::size_t> perm(m);
  std::vector<std::size_t> pick(s);
  for (int it = 0; it < iterations; ++it) {
    if (with_replacement) {
      for (auto& i : pick) i = uniform_index(rng, m);
    } else {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      for (std::size_t i = 0; i < s; ++i) std::swap(perm[i], perm[i + uniform_index(rng, m - i)]);
      std::copy_n(perm.begin(), s, pick.begin());
      std::sort(pick.begin(), pick.end());
    }
    scores.push_back(vendi_score(x.select(pick)));
  }
  return {mean(scores), population_stddev(scores)};
}

double pairwise_cosine_diversity(const EmbeddingMatrix& x) {
  const auto m = x.rows();
  expects(m >= 2, "pairwise_cosine_diversity: need at least two rows");
  double acc = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = i + 1; j < m; ++j) {
      const auto a = x.row(i);
      const auto b = x.row(j);
      acc += 1.0 - std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
    }
  return acc / (0.5 * static_cast<double>(m) * static_cast<double>(m - 1));
}

void MetricSeries::push(long step, double value) {
  expects(steps_.empty() || step > steps_.back(), "MetricSeries: steps must strictly increase");
  steps_.push_back(step);
  values_.push_back(value);
}

std::pair<std::size_t, std::vector<double>> centered_moving_average(std::span<const double> v,
                                                                    int window) {
  expects(window >= 1, "centered_moving_average: window must be positive");
  const auto w = static_cast<std::size_t>(window);
  expects(v.size() >= w, "centered_moving_average: series shorter than window");
  const std::size_t half = (w - 1) / 2;
  std::vector<double> out;
  out.reserve(v.size() - w + 1);
  for (std::size_t start = 0; start + w <= v.size(); ++start) {
    double s = 0.0;
    for (std::size_t i = 0; i < w; ++i) s += v[start + i];
    out.push_back(s / static_cast<double>(w));
  }
  return {half, std::move(out)};
}

std::optional<long> early_stop_step(const MetricSeries& series, int smooth_window,
                                    double slope_fraction) {
  expects(smooth_window >= 1, "early_stop_step: smoothing window must be positive");
  expects(series.size() > static_cast<std::size_t>(smooth_window),
          "early_stop_step: series must be longer than the smoothing window");
  const auto values = series.values();
  const auto steps = series.steps();
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double range = *hi - *lo;
  if (!(range > 0.0)) return steps.front();

  const auto [offset, smooth] = centered_moving_average(values, smooth_window);
  std::vector<double> slope(smooth.size() - 1);
  for (std::size_t i = 0; i + 1 < smooth.size(); ++i) {
    const double dt = static_cast<double>(steps[offset + i + 1] - steps[offset + i]);
    slope[i] = (smooth[i + 1] - smooth[i]) / dt / range;
  }
  const double max_slope = *std::max_element(slope.begin(), slope.end());
  if (!(max_slope > 0.0)) return steps.front();
  const double threshold = slope_fraction * max_slope;
  for (std::size_t i = 0; i < slope.size(); ++i)
    if (slope[i] < threshold) return steps[offset + i];
  return std::nullopt;
}

double windowed_mean(std::span<const double> values, int width) {
  expects(!values.empty(), "windowed_mean: empty series");
  expects(width >= 1, "windowed_mean: width must be positive");
  const auto take = std::min(values.size(), static_cast<std::size_t>(width));
  const auto tail = values.subspan(values.size() - take);
  return std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(take);
}

double windowed_mean(const MetricSeries& series, int width) {
  return windowed_mean(series.values(), width);
}

double mean(std::span<const double> values) {
  expects(!values.empty(), "mean: empty input");
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

double population_stddev(std::span<const double> values) {
  const double mu = mean(values);
  double s = 0.0;
  for (double v : values) s += (v - mu) * (v - mu);
  return std::sqrt(s / static_cast<double>(values.size()));
}

double median(std::vector<double> values) {
  expects(!values.empty(), "median: empty input");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace soar
