#pragma once

// Synthetic verifiable-task environment.
//
// A ladder of difficulty levels 0..D. The student holds one latent skill per
// level; its effective competence is theta = K w where K is a symmetric band
// kernel, so practising level d also moves the neighbouring levels. A task at
// level d with difficulty offset delta is solved with probability
// sigmoid(theta_d - b_d - delta).

#include <cstdint>
#include <span>
#include <vector>

#include "soar/optimizer.hpp"
#include "soar/policy.hpp"
#include "soar/rloo.hpp"
#include "soar/rng.hpp"

namespace soar {

struct Task {
  std::uint64_t id = 0;
  int level = 0;
  double difficulty_offset = 0.0;
  std::vector<double> features;  // unit norm
  int answer = 0;                // ground truth in [0, alphabet)

  friend bool operator==(const Task&, const Task&) = default;
};

/// A generated (question, proposed answer) pair.
struct QAPair {
  Task task;
  int proposed_answer = 0;
  bool well_formed = true;
  double generation_log_prob = 0.0;  // unfiltered proposal log-prob of the accepted draw
  int tries = 1;                     // proposal draws until a well-formed output

  friend bool operator==(const QAPair&, const QAPair&) = default;
};

struct EnvProfile {
  int top_level = 8;  // D; levels are 0..D
  std::vector<double> offsets;               // b_d, strictly increasing
  std::vector<double> generator_competence;  // q_d, nonincreasing
  std::vector<double> format_failure;        // f_d
  int alphabet = 16;
  double kernel_weight = 0.35;
  int kernel_bandwidth = 1;
  double mention_probability = 0.1;
  double student_malformed_share = 0.2;
  double difficulty_spread = 1.0;  // delta ~ U[-spread, spread]
  int feature_noise_dim = 16;
  double feature_noise_share = 0.15;  // squared weight of the per-task noise block
  double feature_band_width = 0.5;
  int pool_per_level = 128;

  int num_levels() const noexcept { return top_level + 1; }

  /// Calibrated ladder used by the desk-scale experiments.
  static EnvProfile desk_default();

  /// Throws ConfigError when an invariant is broken.
  void validate() const;

  friend bool operator==(const EnvProfile&, const EnvProfile&) = default;
};

/// Row-major (D+1)x(D+1) band matrix.
std::vector<double> transfer_kernel(const EnvProfile& env);

struct StudentState {
  std::vector<double> skills;    // w
  std::vector<double> kernel;    // K, row-major
  std::vector<double> offsets;   // b
  double malformed_share = 0.2;  // rho: share of non-correct mass that is malformed
  OptimizerState optimizer;

  int num_levels() const noexcept { return static_cast<int>(skills.size()); }
  std::vector<double> competence() const;  // theta = K w
  double competence_at(int level) const;

  /// Untrained student (w = 0) for an environment.
  static StudentState fresh(const EnvProfile& env);

  friend bool operator==(const StudentState&, const StudentState&) = default;
};

/// 64-bit fingerprint of the parameters (skills + optimizer moments).
std::uint64_t state_hash(const StudentState& student);

// Student answer head outcomes.
inline constexpr std::size_t kEmitGroundTruth = 0;
inline constexpr std::size_t kEmitDistractor = 1;
inline constexpr std::size_t kEmitMalformed = 2;

/// sigmoid(theta_d - b_d - delta).
double student_success_prob(const StudentState& student, const Task& task);

/// Logit x = theta_d - b_d - delta of the ground-truth emission.
double student_logit(const StudentState& student, const Task& task);

/// Categorical head [x, ln(1-rho), ln rho]; P(ground truth) = sigmoid(x).
CategoricalPolicy answer_head(const StudentState& student, const Task& task);

/// The fixed wrong answer the student emits for a task.
int distractor_answer(const Task& task, int alphabet);

struct Emission {
  bool formatted = true;
  int answer = 0;
  std::vector<int> mentions;  // always contains `answer` when formatted
};

/// Reward ladder: 120 exact match, 20 key mentioned, 10 formatted mismatch, 0 malformed.
double verify(const Emission& emission, int key);

Emission emit(const Task& task, std::size_t head_outcome, int key, const EnvProfile& env, Rng& rng);

struct StudentRollouts {
  RolloutGroup group;
  std::vector<Emission> emissions;
};

/// Samples `group_size` answers and scores them against the pair's proposed answer.
StudentRollouts student_rollout(const StudentState& student, const QAPair& qa, int group_size,
                                const EnvProfile& env, Rng& rng);

/// One sampled attempt judged against the ground truth (pass@k / fail@k use this).
bool sample_success(const StudentState& student, const Task& task, Rng& rng);

/// Fraction of tasks whose argmax emission is the ground truth.
double greedy_accuracy(const StudentState& student, std::span<const Task> tasks);
bool greedy_correct(const StudentState& student, const Task& task);

std::vector<double> make_features(int level, const EnvProfile& env, Rng& rng);
Task make_task(int level, const EnvProfile& env, Rng& rng);

/// env.pool_per_level tasks at every level, level-major order.
std::vector<Task> make_task_pool(const EnvProfile& env, Rng& rng);

/// Unit-norm feature vector.
std::span<const double> embed(const Task& task);

double cosine_similarity(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Teacher

struct TeacherState {
  std::vector<double> logits;            // over levels
  std::vector<double> reference_logits;  // frozen copy for the KL penalty
  OptimizerState optimizer;

  CategoricalPolicy policy() const { return CategoricalPolicy(logits); }
  CategoricalPolicy reference() const { return CategoricalPolicy(reference_logits); }

  static TeacherState fresh(const EnvProfile& env, const AdamWConfig& optimizer_config);

  friend bool operator==(const TeacherState&, const TeacherState&) = default;
};

/// Proposal over (level, formatted) pairs: index 2d is a well-formed level-d
/// output, 2d+1 a malformed one.
CategoricalPolicy generation_proposal(const TeacherState& teacher, const EnvProfile& env);
AcceptPredicate well_formed_outputs();

/// Gradient of log pi0(z) w.r.t. the teacher's level logits (chain rule
/// through the format split).
GradientVector teacher_score_gradient(const CategoricalPolicy& proposal, std::size_t proposal_outcome,
                                      int num_levels);

QAPair teacher_generate(const TeacherState& teacher, const EnvProfile& env, Rng& rng,
                        int max_tries = kDefaultMaxTries);

}  // namespace soar
