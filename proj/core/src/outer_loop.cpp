#include "soar/outer_loop.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "soar/errors.hpp"
#include "soar/parallel.hpp"

namespace soar {

AdamWConfig OuterLoopConfig::teacher_optimizer() const {
  AdamWConfig c;
  c.learning_rate = learning_rate;
  c.warmup_steps = warmup_steps;
  c.total_steps = max_steps;
  c.weight_decay = weight_decay;
  c.min_lr_ratio = 0.0;
  return c;
}

void OuterLoopConfig::validate() const {
  if (group_size < 2) throw ConfigError("outer loop: group_size must be at least 2");
  if (dataset_size < 1) throw ConfigError("outer loop: dataset_size must be positive");
  if (repeats < 1) throw ConfigError("outer loop: repeats must be positive");
  if (reward_questions < 1) throw ConfigError("outer loop: reward_questions must be positive");
  if (!(tau > 0)) throw ConfigError("outer loop: tau must be positive");
  if (window < 1) throw ConfigError("outer loop: window must be positive");
  if (max_steps < 1) throw ConfigError("outer loop: max_steps must be positive");
  if (teacher_batch < 1) throw ConfigError("outer loop: teacher_batch must be positive");
  if (!(learning_rate >= 0)) throw ConfigError("outer loop: learning_rate must be nonnegative");
  if (warmup_steps < 0 || warmup_steps >= max_steps)
    throw ConfigError("outer loop: warmup must lie in [0, max_steps)");
  if (!(kl_coef >= 0)) throw ConfigError("outer loop: kl_coef must be nonnegative");
  if (!(ema_decay >= 0 && ema_decay < 1)) throw ConfigError("outer loop: ema_decay must lie in [0, 1)");
  if (learnability_samples < 1) throw ConfigError("outer loop: learnability_samples must be positive");
  if (max_tries < 1) throw ConfigError("outer loop: max_tries must be positive");
}

GeneratedBatch generate_candidates(const TeacherState& teacher, const EnvProfile& env,
                                   const OuterLoopConfig& cfg, Rng& rng) {
  GeneratedBatch out;
  out.level_hist.assign(static_cast<std::size_t>(env.num_levels()), 0);
  out.datasets.resize(static_cast<std::size_t>(cfg.group_size));
  out.retries.assign(static_cast<std::size_t>(cfg.group_size), 0);
  for (std::size_t k = 0; k < out.datasets.size(); ++k) {
    auto& ds = out.datasets[k];
    ds.items.reserve(static_cast<std::size_t>(cfg.dataset_size));
    for (int i = 0; i < cfg.dataset_size; ++i) {
      ds.items.push_back(teacher_generate(teacher, env, rng, cfg.max_tries));
      const auto& qa = ds.items.back();
      ds.log_prob_sum += qa.generation_log_prob;
      out.retries[k] += qa.tries - 1;
      ++out.level_hist[static_cast<std::size_t>(qa.task.level)];
    }
  }
  return out;
}

std::vector<Task> sample_reward_questions(std::span<const Task> train_tasks, int count, Rng& rng) {
  expects(!train_tasks.empty(), "sample_reward_questions: no training tasks");
  expects(count >= 1, "sample_reward_questions: count must be positive");
  const auto m = train_tasks.size();
  const auto take = std::min(m, static_cast<std::size_t>(count));
  std::vector<std::size_t> idx(m);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < take; ++i) std::swap(idx[i], idx[i + uniform_index(rng, m - i)]);
  std::vector<Task> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(train_tasks[idx[i]]);
  return out;
}

GroundedReward grounded_reward(const CandidateDataset& dataset, const StudentState& baseline,
                               int stage, std::span<const Task> reward_questions,
                               const InnerLoopConfig& inner, const EnvProfile& env,
                               std::span<const std::uint64_t> seeds, BaselineAccuracyCache* cache) {
  expects(!reward_questions.empty(), "grounded_reward: no reward questions");
  expects(!seeds.empty(), "grounded_reward: need at least one repeat");
  const double before =
      cache ? cache->get(baseline, reward_questions) : baseline_accuracy(baseline, reward_questions);
  GroundedReward out;
  for (auto seed : seeds) {
    auto trained = rl_update_student(baseline, dataset.items, inner, env, stage, seed);
    out.repeat_rewards.push_back(greedy_accuracy(trained, reward_questions) - before);
    out.students.push_back(std::move(trained));
  }
  out.reward = mean(out.repeat_rewards);
  return out;
}

double learnability_item_reward(double success_rate) {
  expects(success_rate >= 0.0 && success_rate <= 1.0, "learnability_item_reward: rate outside [0, 1]");
  return success_rate == 0.0 ? 0.0 : 1.0 - success_rate;
}

double learnability_reward(const CandidateDataset& dataset, const StudentState& baseline,
                           const EnvProfile& env, int samples, Rng& rng) {
  expects(samples >= 1, "learnability_reward: samples must be positive");
  expects(!dataset.items.empty(), "learnability_reward: empty dataset");
  double total = 0.0;
  for (const auto& qa : dataset.items) {
    const auto head = answer_head(baseline, qa.task);
    const int wrong = distractor_answer(qa.task, env.alphabet);
    int hits = 0;
    for (int s = 0; s < samples; ++s) {
      const auto o = sample(head, rng);
      if ((o == kEmitGroundTruth && qa.task.answer == qa.proposed_answer) ||
          (o == kEmitDistractor && wrong == qa.proposed_answer))
        ++hits;
    }
    total += learnability_item_reward(static_cast<double>(hits) / samples);
  }
  return total / static_cast<double>(dataset.items.size());
}

std::size_t median_index(std::span<const double> rewards) {
  expects(!rewards.empty(), "median_index: empty input");
  std::vector<std::size_t> order(rewards.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rewards[a] < rewards[b]; });
  const double m = rewards[order[(rewards.size() - 1) / 2]];
  for (std::size_t i = 0;; ++i)
    if (rewards[i] == m) return i;
}

namespace {

void check_arms(const TeacherState& teacher, const EnvProfile& env,
                std::span<const CandidateDataset> datasets, std::span<const double> rewards) {
  expects(datasets.size() >= 2, "teacher gradient: need at least two arms");
  expects(datasets.size() == rewards.size(), "teacher gradient: one reward per arm");
  expects(teacher.logits.size() == static_cast<std::size_t>(env.num_levels()),
          "teacher gradient: level mismatch");
}

std::size_t rollout_count(std::span<const CandidateDataset> datasets) {
  std::size_t n = 0;
  for (const auto& ds : datasets) n += ds.items.size();
  expects(n > 0, "teacher gradient: empty datasets");
  return n;
}

}  // namespace

GradientVector teacher_rloo_gradient(const TeacherState& teacher, const EnvProfile& env,
                                     std::span<const CandidateDataset> datasets,
                                     std::span<const double> rewards) {
  check_arms(teacher, env, datasets, rewards);
  const auto proposal = generation_proposal(teacher, env);
  const auto adv = rloo_advantages(rewards);
  const double scale = 1.0 / static_cast<double>(rollout_count(datasets));
  GradientVector g(teacher.logits.size(), 0.0);
  for (std::size_t k = 0; k < datasets.size(); ++k) {
    if (adv[k] == 0.0) continue;
    for (const auto& qa : datasets[k].items) {
      const auto s = teacher_score_gradient(proposal, 2 * static_cast<std::size_t>(qa.task.level),
                                            env.num_levels());
      for (std::size_t d = 0; d < g.size(); ++d) g[d] -= scale * adv[k] * s[d];
    }
  }
  return g;
}

GradientVector teacher_rloo_gradient_filtered(const TeacherState& teacher, const EnvProfile& env,
                                              std::span<const CandidateDataset> datasets,
                                              std::span<const double> rewards) {
  check_arms(teacher, env, datasets, rewards);
  const auto proposal = generation_proposal(teacher, env);
  const auto restricted = restricted_log_probs(proposal, well_formed_outputs());
  std::vector<double> pi_s(restricted.size());
  for (std::size_t i = 0; i < pi_s.size(); ++i) pi_s[i] = std::exp(restricted[i]);

  const auto adv = rloo_advantages(rewards);
  const double scale = 1.0 / static_cast<double>(rollout_count(datasets));
  GradientVector g(teacher.logits.size(), 0.0);
  for (std::size_t k = 0; k < datasets.size(); ++k) {
    for (const auto& qa : datasets[k].items) {
      // d/dphi_d log pi_S(z) = [level(z) == d] - (pi_S(2d) + pi_S(2d+1))
      for (std::size_t d = 0; d < g.size(); ++d) {
        const double onehot = static_cast<int>(d) == qa.task.level ? 1.0 : 0.0;
        g[d] -= scale * adv[k] * (onehot - pi_s[2 * d] - pi_s[2 * d + 1]);
      }
    }
  }
  return g;
}

TeacherState update_teacher(TeacherState teacher, const EnvProfile& env,
                            std::span<const CandidateDataset> datasets,
                            std::span<const double> rewards, const OuterLoopConfig& cfg) {
  auto g = teacher_rloo_gradient(teacher, env, datasets, rewards);
  if (cfg.kl_coef > 0) {
    const auto kl = kl_to_reference(teacher.policy(), teacher.reference());
    for (std::size_t d = 0; d < g.size(); ++d) g[d] += cfg.kl_coef * kl.gradient[d];
  }
  apply_update_in_place(teacher.logits, g, teacher.optimizer);
  return teacher;
}

EmbeddingMatrix task_embeddings(std::span<const Task> tasks) {
  std::vector<std::vector<double>> rows;
  rows.reserve(tasks.size());
  for (const auto& t : tasks) rows.push_back(t.features);
  return EmbeddingMatrix(std::move(rows));
}

EmbeddingMatrix item_embeddings(std::span<const QAPair> items) {
  std::vector<std::vector<double>> rows;
  rows.reserve(items.size());
  for (const auto& qa : items) rows.push_back(qa.task.features);
  return EmbeddingMatrix(std::move(rows));
}

std::pair<double, double> diversity_snapshot(std::span<const CandidateDataset> datasets) {
  std::vector<QAPair> all;
  for (const auto& ds : datasets) all.insert(all.end(), ds.items.begin(), ds.items.end());
  if (all.size() < 2) return {static_cast<double>(all.size()), 0.0};
  const auto x = item_embeddings(all);
  return {vendi_score(x), pairwise_cosine_diversity(x)};
}

GeneratedBatch generate_step_candidates(const TeacherState& teacher, const EnvProfile& env,
                                        const OuterLoopConfig& cfg, int step, std::uint64_t run_seed) {
  Rng rng = make_rng(derive_seed(run_seed, {static_cast<std::uint64_t>(step), 0}));
  try {
    return generate_candidates(teacher, env, cfg, rng);
  } catch (const ResampleBudgetError& e) {
    throw ResampleBudgetError("outer step " + std::to_string(step) + ": " + e.what(), e.tries_used());
  }
}

std::vector<Task> step_reward_questions(std::span<const Task> train_tasks, const OuterLoopConfig& cfg,
                                        int step, std::uint64_t run_seed) {
  Rng rng = make_rng(derive_seed(run_seed, {static_cast<std::uint64_t>(step), 1}));
  return sample_reward_questions(train_tasks, cfg.reward_questions, rng);
}

std::uint64_t inner_run_seed(std::uint64_t run_seed, int step, std::size_t k, std::size_t j) {
  return derive_seed(run_seed, {static_cast<std::uint64_t>(step), 2, k, j});
}

OuterStepResult run_outer_step(TeacherState teacher, PromotionLedger ledger, const EnvProfile& env,
                               std::span<const Task> train_tasks, const OuterLoopConfig& cfg,
                               const InnerLoopConfig& inner, int step, std::uint64_t run_seed) {
  expects(!train_tasks.empty(), "run_outer_step: empty training set");
  auto batch = generate_step_candidates(teacher, env, cfg, step, run_seed);

  // every evaluation compares against the pre-step baseline
  const auto g = static_cast<std::size_t>(cfg.group_size);
  const auto r = static_cast<std::size_t>(cfg.repeats);
  std::vector<double> rewards(g, 0.0);
  std::vector<std::vector<double>> repeat_rewards;
  std::vector<std::vector<StudentState>> students;

  if (cfg.reward == TeacherReward::grounded) {
    repeat_rewards.assign(g, std::vector<double>(r, 0.0));
    students.assign(g, std::vector<StudentState>(r));
    const auto questions = step_reward_questions(train_tasks, cfg, step, run_seed);
    const double before = baseline_accuracy(ledger.baseline, questions);
    parallel_for(g * r, cfg.threads, [&](std::size_t job) {
      const auto k = job / r;
      const auto j = job % r;
      auto trained = rl_update_student(ledger.baseline, batch.datasets[k].items, inner, env,
                                       ledger.stage, inner_run_seed(run_seed, step, k, j));
      repeat_rewards[k][j] = greedy_accuracy(trained, questions) - before;
      students[k][j] = std::move(trained);
    });
    for (std::size_t k = 0; k < g; ++k) rewards[k] = mean(repeat_rewards[k]);
  } else {
    const auto s = static_cast<std::uint64_t>(step);
    parallel_for(g, cfg.threads, [&](std::size_t k) {
      Rng rng = make_rng(derive_seed(run_seed, {s, 3, k}));
      rewards[k] = learnability_reward(batch.datasets[k], ledger.baseline, env,
                                       cfg.learnability_samples, rng);
    });
  }

  auto report = conclude_outer_step(teacher, ledger, env, batch, rewards, repeat_rewards, students,
                                    cfg, step);
  return {std::move(teacher), std::move(ledger), std::move(report), std::move(batch.datasets)};
}

}  // namespace soar
