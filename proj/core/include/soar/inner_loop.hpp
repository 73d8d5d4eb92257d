#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <vector>

#include "soar/env.hpp"

namespace soar {

struct InnerLoopConfig {
  int steps = 10;
  int extra_steps_per_stage = 5;
  int batch_size = 8;
  int group_size = 32;
  double learning_rate = 4.0;
  int warmup_steps = 0;
  double kl_coef = 0.001;
  double weight_decay = 0.0;
  double min_lr_ratio = 0.0;

  int steps_for_stage(int stage) const { return steps + extra_steps_per_stage * stage; }
  AdamWConfig optimizer_config(int total_steps) const;
  void validate() const;

  friend bool operator==(const InnerLoopConfig&, const InnerLoopConfig&) = default;
};

/// One RLOO update of `student` on a batch of pairs, with a KL penalty toward
/// `reference`. Returns the mean raw reward over all rollouts of the batch.
double student_rl_step(StudentState& student, const StudentState& reference,
                       std::span<const QAPair* const> batch, const InnerLoopConfig& cfg,
                       const EnvProfile& env, Rng& rng);

/// Trains a copy of `baseline` for cfg.steps_for_stage(stage) updates on
/// batches drawn uniformly with replacement from `dataset`. The optimizer is
/// re-initialised for this run; `baseline` itself is never touched.
StudentState rl_update_student(const StudentState& baseline, std::span<const QAPair> dataset,
                               const InnerLoopConfig& cfg, const EnvProfile& env, int stage,
                               std::uint64_t seed);

/// Same with an explicit number of updates.
StudentState rl_update_student_steps(const StudentState& baseline, std::span<const QAPair> dataset,
                                     const InnerLoopConfig& cfg, const EnvProfile& env,
                                     int total_steps, std::uint64_t seed);

/// Greedy accuracy of the baseline on the reward questions.
double baseline_accuracy(const StudentState& baseline, std::span<const Task> reward_questions);

/// Memoises baseline_accuracy per (baseline fingerprint, question sample) so
/// the g*r reward evaluations of an outer step evaluate the baseline once.
class BaselineAccuracyCache {
 public:
  double get(const StudentState& baseline, std::span<const Task> reward_questions);
  std::size_t hits() const;
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::map<std::pair<std::uint64_t, std::uint64_t>, double> values_;
  std::size_t hits_ = 0;
};

}  // namespace soar
