#include "soar/env.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "soar/errors.hpp"

namespace soar {

namespace {

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Probabilities of exactly 0 or 1 would give infinite logits; clamp so the
// corresponding outcome is merely negligible.
double safe_log(double p) { return std::log(std::max(p, 1e-300)); }

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

}  // namespace

EnvProfile EnvProfile::desk_default() {
  EnvProfile e;
  e.top_level = 8;
  e.offsets = {-3.0, -2.5, -2.0, -1.5, -1.0, -0.5, 0.0, 15.0, 19.0};
  e.generator_competence = linspace(0.95, 0.25, 9);
  e.format_failure.assign(9, 0.15);
  return e;
}

void EnvProfile::validate() const {
  const auto n = static_cast<std::size_t>(num_levels());
  auto fail = [](const std::string& m) { throw ConfigError("EnvProfile: " + m); };
  if (top_level < 1) fail("top_level must be at least 1");
  if (offsets.size() != n) fail("offsets must have top_level+1 entries");
  if (generator_competence.size() != n) fail("generator_competence must have top_level+1 entries");
  if (format_failure.size() != n) fail("format_failure must have top_level+1 entries");
  for (std::size_t d = 1; d < n; ++d)
    if (!(offsets[d] > offsets[d - 1])) fail("offsets must be strictly increasing");
  for (std::size_t d = 0; d < n; ++d) {
    if (!(generator_competence[d] >= 0 && generator_competence[d] <= 1))
      fail("generator_competence outside [0,1]");
    if (!(format_failure[d] >= 0 && format_failure[d] <= 1)) fail("format_failure outside [0,1]");
    if (d > 0 && generator_competence[d] > generator_competence[d - 1])
      fail("generator_competence must be nonincreasing");
  }
  if (alphabet < 2) fail("alphabet must have at least 2 answers");
  if (!(kernel_weight >= 0)) fail("kernel_weight must be nonnegative");
  if (kernel_bandwidth < 0) fail("kernel_bandwidth must be nonnegative");
  if (!(mention_probability >= 0 && mention_probability <= 1)) fail("mention_probability outside [0,1]");
  if (!(student_malformed_share > 0 && student_malformed_share < 1))
    fail("student_malformed_share must lie in (0,1)");
  if (!(difficulty_spread >= 0)) fail("difficulty_spread must be nonnegative");
  if (feature_noise_dim < 1) fail("feature_noise_dim must be positive");
  if (!(feature_noise_share >= 0 && feature_noise_share < 1)) fail("feature_noise_share outside [0,1)");
  if (!(feature_band_width > 0)) fail("feature_band_width must be positive");
  if (pool_per_level < 1) fail("pool_per_level must be positive");
}

std::vector<double> transfer_kernel(const EnvProfile& env) {
  const int n = env.num_levels();
  std::vector<double> k(static_cast<std::size_t>(n * n), 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const int dist = std::abs(i - j);
      if (dist == 0)
        k[i * n + j] = 1.0;
      else if (dist <= env.kernel_bandwidth)
        k[i * n + j] = env.kernel_weight;
    }
  return k;
}

std::vector<double> StudentState::competence() const {
  const auto n = skills.size();
  std::vector<double> theta(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) theta[i] += kernel[i * n + j] * skills[j];
  return theta;
}

double StudentState::competence_at(int level) const {
  const auto n = skills.size();
  const auto d = static_cast<std::size_t>(level);
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += kernel[d * n + j] * skills[j];
  return s;
}

StudentState StudentState::fresh(const EnvProfile& env) {
  env.validate();
  StudentState s;
  s.skills.assign(static_cast<std::size_t>(env.num_levels()), 0.0);
  s.kernel = transfer_kernel(env);
  s.offsets = env.offsets;
  s.malformed_share = env.student_malformed_share;
  s.optimizer = OptimizerState::fresh(AdamWConfig{}, s.skills.size());
  return s;
}

std::uint64_t state_hash(const StudentState& student) {
  std::uint64_t h = 0x243f6a8885a308d3ULL;
  auto feed = [&h](std::span<const double> v) {
    for (double x : v) h = mix64(h ^ std::bit_cast<std::uint64_t>(x));
  };
  feed(student.skills);
  feed(student.kernel);
  feed(student.offsets);
  feed(student.optimizer.first_moment);
  feed(student.optimizer.second_moment);
  h = mix64(h ^ static_cast<std::uint64_t>(student.optimizer.step));
  return h;
}

double student_logit(const StudentState& student, const Task& task) {
  expects(task.level >= 0 && task.level < student.num_levels(), "task level outside the ladder");
  return student.competence_at(task.level) - student.offsets[task.level] - task.difficulty_offset;
}

double student_success_prob(const StudentState& student, const Task& task) {
  return sigmoid(student_logit(student, task));
}

CategoricalPolicy answer_head(const StudentState& student, const Task& task) {
  const double rho = student.malformed_share;
  return CategoricalPolicy({student_logit(student, task), std::log1p(-rho), std::log(rho)});
}

int distractor_answer(const Task& task, int alphabet) {
  const auto shift = 1 + static_cast<int>(task.id % static_cast<std::uint64_t>(alphabet - 1));
  return (task.answer + shift) % alphabet;
}

double verify(const Emission& emission, int key) {
  if (!emission.formatted) return 0.0;
  if (emission.answer == key) return 120.0;
  if (std::find(emission.mentions.begin(), emission.mentions.end(), key) != emission.mentions.end())
    return 20.0;
  return 10.0;
}

Emission emit(const Task& task, std::size_t head_outcome, int key, const EnvProfile& env, Rng& rng) {
  Emission e;
  // Always consume the mention draw so trajectories don't depend on the outcome.
  const bool mention_key = bernoulli(rng, env.mention_probability);
  if (head_outcome == kEmitMalformed) {
    e.formatted = false;
    return e;
  }
  e.answer = head_outcome == kEmitGroundTruth ? task.answer : distractor_answer(task, env.alphabet);
  e.mentions.push_back(e.answer);
  if (mention_key && key != e.answer) e.mentions.push_back(key);
  return e;
}

StudentRollouts student_rollout(const StudentState& student, const QAPair& qa, int group_size,
                                const EnvProfile& env, Rng& rng) {
  expects(qa.well_formed, "student_rollout: malformed QAPair");
  expects(group_size >= 2, "student_rollout: group size must be at least 2");
  const auto head = answer_head(student, qa.task);
  StudentRollouts out;
  out.group.outcomes.reserve(static_cast<std::size_t>(group_size));
  out.emissions.reserve(static_cast<std::size_t>(group_size));
  for (int i = 0; i < group_size; ++i) {
    const std::size_t z = sample(head, rng);
    Emission e = emit(qa.task, z, qa.proposed_answer, env, rng);
    out.group.outcomes.push_back({z, log_prob(head, z), verify(e, qa.proposed_answer)});
    out.emissions.push_back(std::move(e));
  }
  return out;
}

bool sample_success(const StudentState& student, const Task& task, Rng& rng) {
  return sample(answer_head(student, task), rng) == kEmitGroundTruth;
}

bool greedy_correct(const StudentState& student, const Task& task) {
  return answer_head(student, task).argmax() == kEmitGroundTruth;
}

double greedy_accuracy(const StudentState& student, std::span<const Task> tasks) {
  expects(!tasks.empty(), "greedy_accuracy: empty task list");
  std::size_t hits = 0;
  for (const auto& t : tasks) hits += greedy_correct(student, t) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(tasks.size());
}

std::vector<double> make_features(int level, const EnvProfile& env, Rng& rng) {
  const int levels = env.num_levels();
  const int noise_dim = env.feature_noise_dim;
  std::vector<double> f(static_cast<std::size_t>(levels + noise_dim), 0.0);

  double band_norm = 0.0;
  for (int j = 0; j < levels; ++j) {
    const double z = (j - level) / env.feature_band_width;
    f[j] = std::exp(-0.5 * z * z);
    band_norm += f[j] * f[j];
  }
  band_norm = std::sqrt(band_norm);

  double noise_norm = 0.0;
  for (int j = 0; j < noise_dim; ++j) {
    f[levels + j] = standard_normal(rng);
    noise_norm += f[levels + j] * f[levels + j];
  }
  noise_norm = std::sqrt(noise_norm);

  const double band_scale = std::sqrt(1.0 - env.feature_noise_share) / band_norm;
  const double noise_scale = std::sqrt(env.feature_noise_share) / noise_norm;
  for (int j = 0; j < levels; ++j) f[j] *= band_scale;
  for (int j = 0; j < noise_dim; ++j) f[levels + j] *= noise_scale;
  return f;
}

Task make_task(int level, const EnvProfile& env, Rng& rng) {
  expects(level >= 0 && level <= env.top_level, "make_task: level outside the ladder");
  Task t;
  t.id = rng() >> 12;
  t.level = level;
  t.difficulty_offset = uniform(rng, -env.difficulty_spread, env.difficulty_spread);
  t.answer = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(env.alphabet)));
  t.features = make_features(level, env, rng);
  return t;
}

std::vector<Task> make_task_pool(const EnvProfile& env, Rng& rng) {
  env.validate();
  std::vector<Task> pool;
  pool.reserve(static_cast<std::size_t>(env.num_levels() * env.pool_per_level));
  for (int d = 0; d <= env.top_level; ++d)
    for (int i = 0; i < env.pool_per_level; ++i) pool.push_back(make_task(d, env, rng));
  return pool;
}

std::span<const double> embed(const Task& task) { return task.features; }

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  expects(a.size() == b.size(), "cosine_similarity: dimension mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return dot / std::sqrt(na * nb);
}

// ---------------------------------------------------------------------------

TeacherState TeacherState::fresh(const EnvProfile& env, const AdamWConfig& optimizer_config) {
  env.validate();
  TeacherState t;
  t.logits.assign(static_cast<std::size_t>(env.num_levels()), 0.0);
  t.reference_logits = t.logits;
  t.optimizer = OptimizerState::fresh(optimizer_config, t.logits.size());
  return t;
}

CategoricalPolicy generation_proposal(const TeacherState& teacher, const EnvProfile& env) {
  expects(teacher.logits.size() == static_cast<std::size_t>(env.num_levels()),
          "generation_proposal: teacher/environment level mismatch");
  std::vector<double> z(2 * teacher.logits.size());
  for (std::size_t d = 0; d < teacher.logits.size(); ++d) {
    z[2 * d] = teacher.logits[d] + safe_log(1.0 - env.format_failure[d]);
    z[2 * d + 1] = teacher.logits[d] + safe_log(env.format_failure[d]);
  }
  return CategoricalPolicy(std::move(z));
}

AcceptPredicate well_formed_outputs() {
  return AcceptPredicate([](std::size_t z) { return z % 2 == 0; });
}

GradientVector teacher_score_gradient(const CategoricalPolicy& proposal,
                                      std::size_t proposal_outcome, int num_levels) {
  const auto s = score_gradient(proposal, proposal_outcome);
  GradientVector g(static_cast<std::size_t>(num_levels));
  for (std::size_t d = 0; d < g.size(); ++d) g[d] = s[2 * d] + s[2 * d + 1];
  return g;
}

QAPair teacher_generate(const TeacherState& teacher, const EnvProfile& env, Rng& rng,
                        int max_tries) {
  const auto proposal = generation_proposal(teacher, env);
  const auto draw = filtered_sample(proposal, well_formed_outputs(), rng, max_tries);
  const int level = static_cast<int>(draw.outcome / 2);

  QAPair qa;
  qa.task = make_task(level, env, rng);
  qa.well_formed = true;
  qa.tries = draw.tries_used;
  qa.generation_log_prob = log_prob(proposal, draw.outcome);
  if (bernoulli(rng, env.generator_competence[level])) {
    qa.proposed_answer = qa.task.answer;
  } else {
    auto wrong = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(env.alphabet - 1)));
    if (wrong >= qa.task.answer) ++wrong;
    qa.proposed_answer = wrong;
  }
  return qa;
}

}  // namespace soar
