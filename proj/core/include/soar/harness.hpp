#pragma once

// Experiment arms and their on-disk artifacts.
//
//   <out>/split.json
//   <out>/soar/t<seed>/         run.json steps.jsonl checkpoint.json teacher.json pq.json ps.json samples.json
//   <out>/intrinsic/t<seed>/    run.json steps.jsonl checkpoint.json teacher.json samples.json
//   <out>/base-teacher/t<seed>/ samples.json
//   <out>/eval/<arm>/[t<seed>/]s<seed>/  result.json series.jsonl

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "soar/config.hpp"
#include "soar/metrics.hpp"

namespace soar {

struct TaskSetSplit {
  std::vector<Task> train;  // D_train
  std::vector<Task> test;   // D_test

  friend bool operator==(const TaskSetSplit&, const TaskSetSplit&) = default;
};

enum class Backend { toy, bridge };
enum class TeacherArm { soar, intrinsic, base_teacher };
enum class DatasetSource { none, pq, sampled, ps };
enum class BaselineArm { hard_only, intrinsic, base_teacher };

std::string to_string(TeacherArm arm);
TeacherArm parse_teacher_arm(const std::string& s);
std::string to_string(DatasetSource s);
std::string to_string(BaselineArm arm);
BaselineArm parse_baseline_arm(const std::string& s);
DatasetSource parse_dataset_source(const std::string& s);

struct ArtifactLayout {
  std::filesystem::path root;

  std::filesystem::path split() const { return root / "split.json"; }
  std::filesystem::path teacher_dir(TeacherArm arm, std::uint64_t teacher_seed) const;
  std::filesystem::path eval_dir(const std::string& arm_label, std::optional<std::uint64_t> teacher_seed,
                                 std::uint64_t student_seed) const;
  std::filesystem::path report_dir() const { return root / "report"; }
};

/// Label of an evaluation arm, e.g. "hard-only", "pq-mixed", "ps", "sampled-base-teacher-mixed".
std::string eval_arm_label(DatasetSource source, MixingStrategy strategy,
                           TeacherArm sampled_from = TeacherArm::soar);

// filter ----------------------------------------------------------------------

/// Pool -> fail@k with the fresh student -> seeded split. Throws ConfigError
/// when nothing survives the filter.
TaskSetSplit build_split(const RunConfig& cfg);
TaskSetSplit cmd_filter(const RunConfig& cfg);
TaskSetSplit load_split(const RunConfig& cfg);

// teacher runs ----------------------------------------------------------------

struct TeacherRunOptions {
  bool resume = false;               // continue from checkpoint.json if present
  std::optional<int> stop_after;     // stop once this many outer steps exist (simulated interruption)
  Backend backend = Backend::toy;
  std::string worker_command;        // bridge backend only
};

struct TeacherRunSummary {
  std::uint64_t teacher_seed = 0;
  int steps = 0;
  int promotions = 0;
  std::vector<int> promotion_steps;
  double ps_train_accuracy = 0.0;
  bool complete = false;
};

/// Outer loop for one teacher seed (grounded reward for soar, learnability for intrinsic).
TeacherRunSummary run_teacher_arm(const RunConfig& cfg, const TaskSetSplit& split, TeacherArm arm,
                                  std::uint64_t teacher_seed, const TeacherRunOptions& options = {});

std::vector<TeacherRunSummary> cmd_train_soar(const RunConfig& cfg, const TeacherRunOptions& options = {},
                                              std::optional<std::uint64_t> only_seed = std::nullopt);

/// hard-only: evaluation with no synthetic data for every student seed;
/// intrinsic: learnability-reward outer loop for every teacher seed;
/// base-teacher: 128 samples from the untrained teacher for every teacher seed.
void cmd_train_baseline(const RunConfig& cfg, BaselineArm arm,
                        std::optional<std::uint64_t> only_seed = std::nullopt);

inline constexpr int kTeacherSampleCount = 128;

/// Well-formed pairs from the arm's teacher (trained for soar/intrinsic, fresh for base-teacher).
std::vector<QAPair> cmd_sample_teacher(const RunConfig& cfg, TeacherArm arm, std::uint64_t teacher_seed,
                                       int count = kTeacherSampleCount);

// evaluation --------------------------------------------------------------------

struct EvalPoint {
  long step = 0;
  std::vector<double> pass_at_k;  // aligned with EvalConfig::ks
  double greedy_accuracy = 0.0;

  friend bool operator==(const EvalPoint&, const EvalPoint&) = default;
};

struct EvalResult {
  MetricSeries train_reward;
  std::vector<EvalPoint> test;
  std::optional<long> stop_step;
  long window_begin = 0;  // test points with window_begin <= step <= window_end are averaged
  long window_end = 0;
  std::vector<double> pass_at_k;
  double greedy_accuracy = 0.0;
};

/// Trains `start` on D_train plus the synthetic pairs under the strategy and
/// tracks test pass@k every cadence steps. Curriculum uses synthetic pairs
/// only for the first synthetic_warmup_steps; mixed samples uniformly from the
/// concatenation. With no synthetic pairs both reduce to D_train only.
EvalResult evaluate_student(const StudentState& start, std::span<const QAPair> synthetic,
                            const TaskSetSplit& split, const EvalConfig& eval, const EnvProfile& env,
                            std::uint64_t seed);

/// Wraps tasks as pairs whose proposed answer is the ground truth.
std::vector<QAPair> as_pairs(std::span<const Task> tasks);

/// Runs one evaluation cell and writes its artifacts.
EvalResult cmd_eval_student(const RunConfig& cfg, DatasetSource source, MixingStrategy strategy,
                            std::optional<std::uint64_t> teacher_seed, std::uint64_t student_seed,
                            TeacherArm sampled_from = TeacherArm::soar);

/// Every (teacher, student) cell of the roster (student seeds only for source none).
void cmd_eval_grid(const RunConfig& cfg, DatasetSource source, MixingStrategy strategy,
                   TeacherArm sampled_from = TeacherArm::soar);

}  // namespace soar
