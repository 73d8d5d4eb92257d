#pragma once

#include <cstdint>
#include <algorithm>
#include <deque>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "soar/env.hpp"
#include "soar/inner_loop.hpp"
#include "soar/metrics.hpp"

namespace soar {

struct CandidateDataset {
  std::vector<QAPair> items;
  double log_prob_sum = 0.0;  // sum of unfiltered generation log-probs
  std::optional<double> reward;

  friend bool operator==(const CandidateDataset&, const CandidateDataset&) = default;
};

enum class MovingAverage { window, exponential };
enum class TeacherReward { grounded, learnability };

struct OuterLoopConfig {
  int group_size = 4;  // g
  int dataset_size = 64;  // n
  int repeats = 4;  // r
  int reward_questions = 64;
  double tau = 0.01;
  int window = 3;
  int max_steps = 200;
  int teacher_batch = 2;  // prompts per teacher update; the toy teacher has a single prompt

  double learning_rate = 0.15;
  int warmup_steps = 0;
  double kl_coef = 0.001;
  double weight_decay = 0.0;

  MovingAverage moving_average = MovingAverage::window;
  double ema_decay = 0.5;  // weight on the previous average
  bool reset_window_on_promotion = false;
  TeacherReward reward = TeacherReward::grounded;
  int learnability_samples = 32;
  int max_tries = kDefaultMaxTries;
  int threads = 0;  // inner trainings in parallel; 0 = hardware

  AdamWConfig teacher_optimizer() const;
  void validate() const;

  friend bool operator==(const OuterLoopConfig&, const OuterLoopConfig&) = default;
};

struct PromotionEvent {
  int step = 0;
  double reward = 0.0;  // windowed mean that triggered it

  friend bool operator==(const PromotionEvent&, const PromotionEvent&) = default;
};

template <class Student>
struct BasicPromotionLedger {
  Student baseline;
  int stage = 0;
  double tau = 0.01;
  int window_width = 3;
  std::deque<double> recent;
  std::optional<double> ema;
  std::vector<CandidateDataset> best;  // D_best
  std::vector<PromotionEvent> history;

  static BasicPromotionLedger start(Student baseline, const OuterLoopConfig& cfg) {
    BasicPromotionLedger l;
    l.baseline = std::move(baseline);
    l.tau = cfg.tau;
    l.window_width = cfg.window;
    return l;
  }

  /// Pushes a step's mean reward and returns the current moving average.
  double record(double mean_reward, MovingAverage kind, double ema_decay) {
    recent.push_back(mean_reward);
    while (static_cast<int>(recent.size()) > window_width) recent.pop_front();
    ema = ema ? ema_decay * *ema + (1.0 - ema_decay) * mean_reward : mean_reward;
    if (kind == MovingAverage::exponential) return *ema;
    double s = 0.0;
    for (double r : recent) s += r;
    return s / static_cast<double>(recent.size());
  }

  /// Needs a full window: a single early step cannot trigger a promotion.
  bool should_promote(double moving_average) const {
    return static_cast<int>(recent.size()) >= window_width && moving_average > tau;
  }

  void promote(Student next, CandidateDataset dataset, int step, double moving_average,
               bool reset_window) {
    baseline = std::move(next);
    best.push_back(std::move(dataset));
    ++stage;
    history.push_back({step, moving_average});
    if (reset_window) {
      recent.clear();
      ema.reset();
    }
  }

  friend bool operator==(const BasicPromotionLedger&, const BasicPromotionLedger&) = default;
};

using PromotionLedger = BasicPromotionLedger<StudentState>;

struct StepReport {
  int step = 0;
  std::vector<double> rewards;
  double window_mean = 0.0;
  bool promoted = false;
  int stage = 0;
  std::vector<int> level_hist;
  std::vector<int> retries;  // per dataset, rejected draws while generating it
  double vendi = 0.0;
  double cosine_div = 0.0;

  friend bool operator==(const StepReport&, const StepReport&) = default;
};

struct GeneratedBatch {
  std::vector<CandidateDataset> datasets;
  std::vector<int> level_hist;
  std::vector<int> retries;  // per dataset
};

/// g*n teacher samples split in generation order into g datasets of n.
GeneratedBatch generate_candidates(const TeacherState& teacher, const EnvProfile& env,
                                   const OuterLoopConfig& cfg, Rng& rng);

/// Uniform sample without replacement (all of them, shuffled, if count >= size).
std::vector<Task> sample_reward_questions(std::span<const Task> train_tasks, int count, Rng& rng);

struct GroundedReward {
  double reward = 0.0;
  std::vector<double> repeat_rewards;
  std::vector<StudentState> students;
};

/// Trains one clone of `baseline` per seed on the dataset; each repeat's reward
/// is its greedy accuracy gain on the reward questions.
GroundedReward grounded_reward(const CandidateDataset& dataset, const StudentState& baseline,
                               int stage, std::span<const Task> reward_questions,
                               const InnerLoopConfig& inner, const EnvProfile& env,
                               std::span<const std::uint64_t> seeds,
                               BaselineAccuracyCache* cache = nullptr);

/// 0 when the item is never solved, 1 - success rate otherwise.
double learnability_item_reward(double success_rate);

/// Mean item reward; an item counts as solved when a sampled student answer
/// matches the teacher's proposed answer.
double learnability_reward(const CandidateDataset& dataset, const StudentState& baseline,
                           const EnvProfile& env, int samples, Rng& rng);

/// Index of the median; the lower one for an even count. Ties keep the earliest index.
std::size_t median_index(std::span<const double> rewards);

template <class Student>
Student select_promotion_student(std::span<const double> rewards, std::span<const Student> students) {
  expects(!rewards.empty() && rewards.size() == students.size(),
          "select_promotion_student: need one reward per student");
  return students[median_index(rewards)];
}

/// Arm-level RLOO gradient of the teacher objective (descent direction, i.e.
/// already negated) using unfiltered generation log-probs, averaged over the
/// g*n rollouts.
GradientVector teacher_rloo_gradient(const TeacherState& teacher, const EnvProfile& env,
                                     std::span<const CandidateDataset> datasets,
                                     std::span<const double> rewards);

/// The same gradient with log-probs taken under the renormalised well-formed
/// distribution. Equal to teacher_rloo_gradient up to rounding.
GradientVector teacher_rloo_gradient_filtered(const TeacherState& teacher, const EnvProfile& env,
                                              std::span<const CandidateDataset> datasets,
                                              std::span<const double> rewards);

/// RLOO step plus the KL penalty toward the frozen reference.
TeacherState update_teacher(TeacherState teacher, const EnvProfile& env,
                            std::span<const CandidateDataset> datasets,
                            std::span<const double> rewards, const OuterLoopConfig& cfg);

/// Diversity of a set of generated items: Vendi Score and mean pairwise cosine distance.
std::pair<double, double> diversity_snapshot(std::span<const CandidateDataset> datasets);

EmbeddingMatrix task_embeddings(std::span<const Task> tasks);
EmbeddingMatrix item_embeddings(std::span<const QAPair> items);

/// Generation phase of outer step `step`: g*n samples from a stream derived
/// from (run_seed, step). A resample-budget failure names the step.
GeneratedBatch generate_step_candidates(const TeacherState& teacher, const EnvProfile& env,
                                        const OuterLoopConfig& cfg, int step, std::uint64_t run_seed);

/// Q_R for outer step `step`.
std::vector<Task> step_reward_questions(std::span<const Task> train_tasks, const OuterLoopConfig& cfg,
                                        int step, std::uint64_t run_seed);

/// Seed of inner run (k, j) of outer step `step`.
std::uint64_t inner_run_seed(std::uint64_t run_seed, int step, std::size_t k, std::size_t j);

/// Promotion check, teacher update and report, shared by every student backend.
/// `students[k][j]` is the student trained on dataset k in repeat j (empty for
/// the learnability reward, which never promotes).
template <class Student>
StepReport conclude_outer_step(TeacherState& teacher, BasicPromotionLedger<Student>& ledger,
                               const EnvProfile& env, GeneratedBatch& batch,
                               const std::vector<double>& rewards,
                               const std::vector<std::vector<double>>& repeat_rewards,
                               std::vector<std::vector<Student>>& students,
                               const OuterLoopConfig& cfg, int step) {
  for (std::size_t k = 0; k < rewards.size(); ++k) batch.datasets[k].reward = rewards[k];
  StepReport report;
  report.step = step;
  report.rewards = rewards;
  report.window_mean = ledger.record(mean(rewards), cfg.moving_average, cfg.ema_decay);
  if (cfg.reward == TeacherReward::grounded && ledger.should_promote(report.window_mean)) {
    const auto best = static_cast<std::size_t>(
        std::max_element(rewards.begin(), rewards.end()) - rewards.begin());
    auto promoted = select_promotion_student<Student>(repeat_rewards[best], students[best]);
    ledger.promote(std::move(promoted), batch.datasets[best], step, report.window_mean,
                   cfg.reset_window_on_promotion);
    report.promoted = true;
  }
  report.stage = ledger.stage;
  teacher = update_teacher(std::move(teacher), env, batch.datasets, rewards, cfg);
  report.level_hist = batch.level_hist;
  report.retries = batch.retries;
  std::tie(report.vendi, report.cosine_div) = diversity_snapshot(batch.datasets);
  return report;
}

struct OuterStepResult {
  TeacherState teacher;
  PromotionLedger ledger;
  StepReport report;
  std::vector<CandidateDataset> datasets;
};

/// One full teacher step. Inputs are taken by value and only the returned
/// copies change, so an exception leaves the caller's state untouched.
/// Randomness derives from (run_seed, step) so results do not depend on the
/// thread count.
OuterStepResult run_outer_step(TeacherState teacher, PromotionLedger ledger, const EnvProfile& env,
                               std::span<const Task> train_tasks, const OuterLoopConfig& cfg,
                               const InnerLoopConfig& inner, int step, std::uint64_t run_seed);

}  // namespace soar
