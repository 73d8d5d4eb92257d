#include "soar/inner_loop.hpp"

#include <cmath>

#include "soar/errors.hpp"

namespace soar {

AdamWConfig InnerLoopConfig::optimizer_config(int total_steps) const {
  AdamWConfig c;
  c.learning_rate = learning_rate;
  c.warmup_steps = warmup_steps;
  c.total_steps = total_steps;
  c.weight_decay = weight_decay;
  c.min_lr_ratio = min_lr_ratio;
  return c;
}

void InnerLoopConfig::validate() const {
  if (steps < 1) throw ConfigError("inner loop: steps must be at least 1");
  if (extra_steps_per_stage < 0) throw ConfigError("inner loop: extra steps must be nonnegative");
  if (batch_size < 1) throw ConfigError("inner loop: batch_size must be positive");
  if (group_size < 2) throw ConfigError("inner loop: group_size must be at least 2");
  if (!(learning_rate >= 0)) throw ConfigError("inner loop: learning_rate must be nonnegative");
  if (warmup_steps < 0) throw ConfigError("inner loop: warmup must be nonnegative");
  if (!(kl_coef >= 0)) throw ConfigError("inner loop: kl_coef must be nonnegative");
}

double student_rl_step(StudentState& student, const StudentState& reference,
                       std::span<const QAPair* const> batch, const InnerLoopConfig& cfg,
                       const EnvProfile& env, Rng& rng) {
  expects(!batch.empty(), "student_rl_step: empty batch");
  const auto n = static_cast<std::size_t>(student.num_levels());
  // d(loss)/dx accumulated per level, x being the ground-truth logit of a task.
  std::vector<double> dx(n, 0.0);
  const double rollout_weight = 1.0 / (static_cast<double>(batch.size()) * cfg.group_size);
  const double item_weight = 1.0 / static_cast<double>(batch.size());
  double reward_sum = 0.0;

  for (const QAPair* qa : batch) {
    const auto rollouts = student_rollout(student, *qa, cfg.group_size, env, rng);
    const auto head = answer_head(student, qa->task);
    const auto pg = rloo_policy_gradient(head, rollouts.group);
    const auto d = static_cast<std::size_t>(qa->task.level);
    dx[d] -= rollout_weight * pg[kEmitGroundTruth];
    if (cfg.kl_coef > 0) {
      const auto kl = kl_to_reference(head, answer_head(reference, qa->task));
      dx[d] += cfg.kl_coef * item_weight * kl.gradient[kEmitGroundTruth];
    }
    for (const auto& o : rollouts.group.outcomes) reward_sum += o.reward;
  }

  // x_d = sum_j K[d][j] w_j - b_d - delta  =>  dL/dw_j = sum_d K[d][j] dL/dx_d
  std::vector<double> grad(n, 0.0);
  for (std::size_t d = 0; d < n; ++d) {
    if (dx[d] == 0.0) continue;
    for (std::size_t j = 0; j < n; ++j) grad[j] += student.kernel[d * n + j] * dx[d];
  }
  apply_update_in_place(student.skills, grad, student.optimizer);
  return reward_sum * rollout_weight;
}

StudentState rl_update_student(const StudentState& baseline, std::span<const QAPair> dataset,
                               const InnerLoopConfig& cfg, const EnvProfile& env, int stage,
                               std::uint64_t seed) {
  expects(stage >= 0, "rl_update_student: negative stage");
  return rl_update_student_steps(baseline, dataset, cfg, env, cfg.steps_for_stage(stage), seed);
}

StudentState rl_update_student_steps(const StudentState& baseline, std::span<const QAPair> dataset,
                                     const InnerLoopConfig& cfg, const EnvProfile& env,
                                     int total, std::uint64_t seed) {
  expects(!dataset.empty(), "rl_update_student: empty dataset");
  expects(total >= 1, "rl_update_student: need at least one step");
  for (const auto& qa : dataset) expects(qa.well_formed, "rl_update_student: malformed pair in dataset");

  StudentState student = baseline;
  student.optimizer = OptimizerState::fresh(cfg.optimizer_config(total), student.skills.size());
  Rng rng = make_rng(seed);
  std::vector<const QAPair*> batch(static_cast<std::size_t>(cfg.batch_size));
  for (int step = 0; step < total; ++step) {
    for (auto& slot : batch) slot = &dataset[uniform_index(rng, dataset.size())];
    student_rl_step(student, baseline, batch, cfg, env, rng);
  }
  return student;
}

double baseline_accuracy(const StudentState& baseline, std::span<const Task> reward_questions) {
  expects(!reward_questions.empty(), "baseline_accuracy: empty question list");
  return greedy_accuracy(baseline, reward_questions);
}

namespace {

std::uint64_t question_key(std::span<const Task> questions) {
  std::uint64_t h = 0x13198a2e03707344ULL;
  for (const auto& t : questions) h = mix64(h ^ t.id);
  return mix64(h ^ questions.size());
}

}  // namespace

double BaselineAccuracyCache::get(const StudentState& baseline,
                                  std::span<const Task> reward_questions) {
  const auto key = std::make_pair(state_hash(baseline), question_key(reward_questions));
  {
    std::lock_guard lock(mutex_);
    if (auto it = values_.find(key); it != values_.end()) {
      ++hits_;
      return it->second;
    }
  }
  const double acc = baseline_accuracy(baseline, reward_questions);
  std::lock_guard lock(mutex_);
  values_.emplace(key, acc);
  return acc;
}

std::size_t BaselineAccuracyCache::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

std::size_t BaselineAccuracyCache::size() const {
  std::lock_guard lock(mutex_);
  return values_.size();
}

}  // namespace soar
