#include "soar/harness.hpp"

#include <algorithm>
#include <cmath>

#include "json_io.hpp"
#include "soar/bridge.hpp"
#include "soar/serialize.hpp"
#include "soar/subprocess.hpp"

namespace soar {

namespace fs = std::filesystem;

std::string to_string(TeacherArm arm) {
  switch (arm) {
    case TeacherArm::soar: return "soar";
    case TeacherArm::intrinsic: return "intrinsic";
    case TeacherArm::base_teacher: return "base-teacher";
  }
  return "?";
}

TeacherArm parse_teacher_arm(const std::string& s) {
  if (s == "soar") return TeacherArm::soar;
  if (s == "intrinsic") return TeacherArm::intrinsic;
  if (s == "base-teacher") return TeacherArm::base_teacher;
  throw ConfigError("teacher arm must be soar, intrinsic or base-teacher, got \"" + s + "\"");
}

std::string to_string(DatasetSource s) {
  switch (s) {
    case DatasetSource::none: return "none";
    case DatasetSource::pq: return "pq";
    case DatasetSource::sampled: return "sampled";
    case DatasetSource::ps: return "ps";
  }
  return "?";
}

DatasetSource parse_dataset_source(const std::string& s) {
  if (s == "none") return DatasetSource::none;
  if (s == "pq") return DatasetSource::pq;
  if (s == "sampled") return DatasetSource::sampled;
  if (s == "ps") return DatasetSource::ps;
  throw ConfigError("dataset source must be none, pq, sampled or ps, got \"" + s + "\"");
}

std::string to_string(BaselineArm arm) {
  switch (arm) {
    case BaselineArm::hard_only: return "hard-only";
    case BaselineArm::intrinsic: return "intrinsic";
    case BaselineArm::base_teacher: return "base-teacher";
  }
  return "?";
}

BaselineArm parse_baseline_arm(const std::string& s) {
  if (s == "hard-only") return BaselineArm::hard_only;
  if (s == "intrinsic") return BaselineArm::intrinsic;
  if (s == "base-teacher") return BaselineArm::base_teacher;
  throw ConfigError("baseline arm must be hard-only, intrinsic or base-teacher, got \"" + s + "\"");
}

fs::path ArtifactLayout::teacher_dir(TeacherArm arm, std::uint64_t teacher_seed) const {
  return root / to_string(arm) / ("t" + std::to_string(teacher_seed));
}

fs::path ArtifactLayout::eval_dir(const std::string& arm_label, std::optional<std::uint64_t> teacher_seed,
                                  std::uint64_t student_seed) const {
  auto dir = root / "eval" / arm_label;
  if (teacher_seed) dir /= "t" + std::to_string(*teacher_seed);
  return dir / ("s" + std::to_string(student_seed));
}

std::string eval_arm_label(DatasetSource source, MixingStrategy strategy, TeacherArm sampled_from) {
  switch (source) {
    case DatasetSource::none: return "hard-only";
    case DatasetSource::ps: return "ps";
    case DatasetSource::pq: return "pq-" + to_string(strategy);
    case DatasetSource::sampled: return "sampled-" + to_string(sampled_from) + "-" + to_string(strategy);
  }
  return "?";
}

namespace {

std::uint64_t arm_tag(TeacherArm arm) {
  switch (arm) {
    case TeacherArm::soar: return 1;
    case TeacherArm::intrinsic: return 2;
    case TeacherArm::base_teacher: return 3;
  }
  return 0;
}

json identity(const RunConfig& cfg) { return json{{"config_hash", config_hash(cfg)}, {"profile", cfg.profile}}; }

// The split depends on the environment, filter and split seeds only, so
// changing e.g. the outer-loop budget does not invalidate it.
std::string split_key(const RunConfig& cfg) {
  json j{{"env", cfg.env}, {"filter", cfg.filter}, {"pool", cfg.seeds.pool}, {"split", cfg.seeds.split}};
  std::uint64_t h = 0x84222325cbf29ce4ULL;
  for (unsigned char ch : j.dump()) h = mix64(h ^ ch);
  return std::to_string(h);
}

json read_json_file(const fs::path& path, const char* what) {
  if (!fs::exists(path)) throw ConfigError(std::string("missing ") + what + ": " + path.string());
  return parse_json(read_file(path), what);
}

void write_json_file(const fs::path& path, const json& j) { write_file_atomic(path, j.dump() + "\n"); }

}  // namespace

// filter ------------------------------------------------------------------------

TaskSetSplit build_split(const RunConfig& cfg) {
  cfg.validate();
  Rng pool_rng = make_rng(derive_seed(cfg.seeds.pool, {0}));
  const auto pool = make_task_pool(cfg.env, pool_rng);
  const auto fresh = StudentState::fresh(cfg.env);
  Rng filter_rng = make_rng(derive_seed(cfg.seeds.pool, {1}));
  auto hard = fail_at_k_filter<Task>(
      pool, [&](const Task& t, Rng& rng) { return sample_success(fresh, t, rng); }, cfg.filter.k, filter_rng);
  if (hard.size() < 2)
    throw ConfigError("fail@" + std::to_string(cfg.filter.k) + " kept " + std::to_string(hard.size()) +
                      " tasks; raise the offsets of the top levels so the fresh student cannot solve them");

  Rng split_rng = make_rng(derive_seed(cfg.seeds.split, {0}));
  for (std::size_t i = hard.size(); i > 1; --i) std::swap(hard[i - 1], hard[uniform_index(split_rng, i)]);
  auto n_train = static_cast<std::size_t>(std::llround(cfg.filter.train_fraction * static_cast<double>(hard.size())));
  n_train = std::clamp<std::size_t>(n_train, 1, hard.size() - 1);
  TaskSetSplit split;
  split.train.assign(hard.begin(), hard.begin() + static_cast<std::ptrdiff_t>(n_train));
  split.test.assign(hard.begin() + static_cast<std::ptrdiff_t>(n_train), hard.end());
  return split;
}

TaskSetSplit cmd_filter(const RunConfig& cfg) {
  auto split = build_split(cfg);
  json j{{"run", identity(cfg)}, {"split_key", split_key(cfg)}, {"train", split.train}, {"test", split.test}};
  write_json_file(ArtifactLayout{cfg.out_dir}.split(), j);
  return split;
}

TaskSetSplit load_split(const RunConfig& cfg) {
  const auto path = ArtifactLayout{cfg.out_dir}.split();
  const auto j = read_json_file(path, "split (run the filter command first)");
  if (j.at("split_key").get<std::string>() != split_key(cfg))
    throw ConfigError(path.string() + " was built from a different environment or seeds; rerun filter");
  TaskSetSplit split;
  j.at("train").get_to(split.train);
  j.at("test").get_to(split.test);
  return split;
}

// teacher runs ---------------------------------------------------------------------

namespace {

// Truncates steps.jsonl to its first `keep` records.
void truncate_steps(const fs::path& path, int keep) {
  if (!fs::exists(path)) {
    if (keep > 0) throw ConfigError("checkpoint is ahead of the missing step log " + path.string());
    return;
  }
  auto lines = read_lines(path);
  if (static_cast<int>(lines.size()) < keep)
    throw ConfigError("step log " + path.string() + " is shorter than the checkpoint");
  lines.resize(static_cast<std::size_t>(keep));
  std::string content;
  for (const auto& l : lines) content += l + "\n";
  write_file_atomic(path, content);
}

template <class Student>
struct RunState {
  TeacherState teacher;
  BasicPromotionLedger<Student> ledger;
  Student ps;
  double ps_accuracy = 0.0;
  int ps_step = -1;
  int next_step = 0;
};

template <class Student>
json checkpoint_json(const RunConfig& cfg, std::uint64_t seed, const RunState<Student>& s) {
  return json{{"run", identity(cfg)},
              {"teacher_seed", seed},
              {"next_step", s.next_step},
              {"teacher", s.teacher},
              {"ledger", s.ledger},
              {"ps", {{"student", s.ps}, {"train_accuracy", s.ps_accuracy}, {"step", s.ps_step}}}};
}

template <class Student>
RunState<Student> state_from_checkpoint(const json& j) {
  RunState<Student> s;
  j.at("next_step").get_to(s.next_step);
  j.at("teacher").get_to(s.teacher);
  j.at("ledger").get_to(s.ledger);
  j.at("ps").at("student").get_to(s.ps);
  j.at("ps").at("train_accuracy").get_to(s.ps_accuracy);
  j.at("ps").at("step").get_to(s.ps_step);
  return s;
}

// Shared outer-loop driver: `step_fn(state, step)` advances one step and
// returns its report; `accuracy_fn(student)` is the D_train greedy accuracy.
template <class Student, class StepFn, class AccuracyFn>
TeacherRunSummary drive_teacher(const RunConfig& cfg, TeacherArm arm, std::uint64_t seed,
                                RunState<Student> state, const TeacherRunOptions& options,
                                StepFn&& step_fn, AccuracyFn&& accuracy_fn) {
  const auto dir = ArtifactLayout{cfg.out_dir}.teacher_dir(arm, seed);
  const auto steps_path = dir / "steps.jsonl";
  const auto checkpoint_path = dir / "checkpoint.json";

  TeacherRunSummary summary;
  summary.teacher_seed = seed;
  for (int step = state.next_step; step < cfg.outer.max_steps; ++step) {
    if (options.stop_after && step >= *options.stop_after) break;
    const auto report = step_fn(state, step);
    if (report.promoted) {
      // ties go to the later, further-trained baseline
      const double acc = accuracy_fn(state.ledger.baseline);
      if (acc >= state.ps_accuracy) {
        state.ps = state.ledger.baseline;
        state.ps_accuracy = acc;
        state.ps_step = step;
      }
    }
    state.next_step = step + 1;
    append_line(steps_path, encode_step_report(report));
    write_json_file(checkpoint_path, checkpoint_json(cfg, seed, state));
  }

  summary.steps = state.next_step;
  summary.promotions = state.ledger.stage;
  for (const auto& e : state.ledger.history) summary.promotion_steps.push_back(e.step);
  summary.ps_train_accuracy = state.ps_accuracy;
  summary.complete = state.next_step >= cfg.outer.max_steps;
  if (!summary.complete) return summary;

  write_json_file(dir / "teacher.json", json{{"run", identity(cfg)}, {"teacher_seed", seed}, {"teacher", state.teacher}});
  if (arm == TeacherArm::soar) {
    write_json_file(dir / "pq.json", json{{"run", identity(cfg)},
                                          {"teacher_seed", seed},
                                          {"promotion_steps", summary.promotion_steps},
                                          {"datasets", state.ledger.best}});
    write_json_file(dir / "ps.json", json{{"run", identity(cfg)},
                                          {"teacher_seed", seed},
                                          {"step", state.ps_step},
                                          {"train_accuracy", state.ps_accuracy},
                                          {"student", state.ps}});
  }
  return summary;
}

}  // namespace

TeacherRunSummary run_teacher_arm(const RunConfig& cfg, const TaskSetSplit& split, TeacherArm arm,
                                  std::uint64_t teacher_seed, const TeacherRunOptions& options) {
  cfg.validate();
  expects(arm != TeacherArm::base_teacher, "run_teacher_arm: the base teacher is never trained");
  auto outer = cfg.outer;
  outer.reward = arm == TeacherArm::soar ? TeacherReward::grounded : TeacherReward::learnability;
  const auto run_seed = derive_seed(teacher_seed, {arm_tag(arm)});
  const auto dir = ArtifactLayout{cfg.out_dir}.teacher_dir(arm, teacher_seed);
  const auto checkpoint_path = dir / "checkpoint.json";

  json run{{"run", identity(cfg)},
           {"arm", to_string(arm)},
           {"teacher_seed", teacher_seed},
           {"backend", options.backend == Backend::toy ? "toy" : "bridge"},
           {"reset_window_on_promotion", outer.reset_window_on_promotion},
           {"moving_average", outer.moving_average == MovingAverage::window ? "window" : "exponential"},
           {"embeddings", "toy"},
           {"config", cfg}};
  write_json_file(dir / "run.json", run);

  auto train_accuracy = [&](const StudentState& s) { return greedy_accuracy(s, split.train); };

  if (options.backend == Backend::bridge) {
    if (arm != TeacherArm::soar) throw ConfigError("the bridge backend drives the soar arm only");
    if (options.resume) throw ConfigError("bridge runs cannot resume: worker checkpoints do not outlive the session");
    if (options.worker_command.empty()) throw ConfigError("the bridge backend needs a worker command");
    BridgeClient client(std::make_unique<SubprocessTransport>(options.worker_command));
    BridgeStudent student(client);
    RunState<std::string> state;
    state.teacher = TeacherState::fresh(cfg.env, outer.teacher_optimizer());
    state.ledger = BridgeLedger::start(student.snapshot(), outer);
    state.ps = state.ledger.baseline;
    state.ps_accuracy = student.greedy_eval(split.train);
    fs::remove(dir / "steps.jsonl");
    return drive_teacher(
        cfg, arm, teacher_seed, std::move(state), options,
        [&](RunState<std::string>& s, int step) {
          auto r = run_outer_step_bridge(std::move(s.teacher), std::move(s.ledger), cfg.env, split.train,
                                         outer, cfg.inner, step, run_seed, student);
          s.teacher = std::move(r.teacher);
          s.ledger = std::move(r.ledger);
          return r.report;
        },
        [&](const std::string& token) {
          student.restore(token);
          return student.greedy_eval(split.train);
        });
  }

  RunState<StudentState> state;
  if (options.resume && fs::exists(checkpoint_path)) {
    const auto j = read_json_file(checkpoint_path, "checkpoint");
    if (j.at("run").at("config_hash").get<std::string>() != config_hash(cfg))
      throw ConfigError(checkpoint_path.string() + " belongs to a different configuration");
    state = state_from_checkpoint<StudentState>(j);
    truncate_steps(dir / "steps.jsonl", state.next_step);
  } else {
    const auto fresh = StudentState::fresh(cfg.env);
    state.teacher = TeacherState::fresh(cfg.env, outer.teacher_optimizer());
    state.ledger = PromotionLedger::start(fresh, outer);
    state.ps = fresh;
    state.ps_accuracy = train_accuracy(fresh);
    fs::remove(dir / "steps.jsonl");
  }
  auto summary = drive_teacher(
      cfg, arm, teacher_seed, std::move(state), options,
      [&](RunState<StudentState>& s, int step) {
        auto r = run_outer_step(std::move(s.teacher), std::move(s.ledger), cfg.env, split.train, outer,
                                cfg.inner, step, run_seed);
        s.teacher = std::move(r.teacher);
        s.ledger = std::move(r.ledger);
        return r.report;
      },
      train_accuracy);
  if (summary.complete) cmd_sample_teacher(cfg, arm, teacher_seed);
  return summary;
}

std::vector<TeacherRunSummary> cmd_train_soar(const RunConfig& cfg, const TeacherRunOptions& options,
                                              std::optional<std::uint64_t> only_seed) {
  const auto split = load_split(cfg);
  std::vector<TeacherRunSummary> out;
  for (auto seed : cfg.seeds.teacher) {
    if (only_seed && seed != *only_seed) continue;
    out.push_back(run_teacher_arm(cfg, split, TeacherArm::soar, seed, options));
  }
  return out;
}

std::vector<QAPair> cmd_sample_teacher(const RunConfig& cfg, TeacherArm arm, std::uint64_t teacher_seed, int count) {
  expects(count >= 1, "cmd_sample_teacher: count must be positive");
  const auto dir = ArtifactLayout{cfg.out_dir}.teacher_dir(arm, teacher_seed);
  TeacherState teacher;
  if (arm == TeacherArm::base_teacher) {
    teacher = TeacherState::fresh(cfg.env, cfg.outer.teacher_optimizer());
  } else {
    read_json_file(dir / "teacher.json", "trained teacher (run the arm first)").at("teacher").get_to(teacher);
  }
  Rng rng = make_rng(derive_seed(teacher_seed, {arm_tag(arm), 0x5a}));
  std::vector<QAPair> pairs;
  pairs.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) pairs.push_back(teacher_generate(teacher, cfg.env, rng, cfg.outer.max_tries));
  write_json_file(dir / "samples.json",
                  json{{"run", identity(cfg)}, {"arm", to_string(arm)}, {"teacher_seed", teacher_seed}, {"pairs", pairs}});
  return pairs;
}

void cmd_train_baseline(const RunConfig& cfg, BaselineArm arm, std::optional<std::uint64_t> only_seed) {
  switch (arm) {
    case BaselineArm::hard_only:
      for (auto s : cfg.seeds.student)
        if (!only_seed || s == *only_seed) cmd_eval_student(cfg, DatasetSource::none, cfg.eval.strategy, std::nullopt, s);
      return;
    case BaselineArm::intrinsic: {
      const auto split = load_split(cfg);
      for (auto t : cfg.seeds.teacher)
        if (!only_seed || t == *only_seed) run_teacher_arm(cfg, split, TeacherArm::intrinsic, t);
      return;
    }
    case BaselineArm::base_teacher:
      for (auto t : cfg.seeds.teacher)
        if (!only_seed || t == *only_seed) cmd_sample_teacher(cfg, TeacherArm::base_teacher, t);
      return;
  }
}

// evaluation ------------------------------------------------------------------------

std::vector<QAPair> as_pairs(std::span<const Task> tasks) {
  std::vector<QAPair> out;
  out.reserve(tasks.size());
  for (const auto& t : tasks) {
    QAPair qa;
    qa.task = t;
    qa.proposed_answer = t.answer;
    out.push_back(std::move(qa));
  }
  return out;
}

namespace {

EvalPoint test_point(const StudentState& student, std::span<const Task> test, const EvalConfig& eval, long step,
                     Rng& rng) {
  EvalPoint p;
  p.step = step;
  p.pass_at_k.assign(eval.ks.size(), 0.0);
  for (const auto& t : test) {
    int c = 0;
    for (int i = 0; i < eval.samples; ++i) c += sample_success(student, t, rng) ? 1 : 0;
    for (std::size_t q = 0; q < eval.ks.size(); ++q)
      p.pass_at_k[q] += pass_at_k({t.id, eval.samples, c}, eval.ks[q]);
  }
  for (auto& v : p.pass_at_k) v /= static_cast<double>(test.size());
  p.greedy_accuracy = greedy_accuracy(student, test);
  return p;
}

}  // namespace

EvalResult evaluate_student(const StudentState& start, std::span<const QAPair> synthetic, const TaskSetSplit& split,
                            const EvalConfig& eval, const EnvProfile& env, std::uint64_t seed) {
  eval.validate();
  expects(!split.train.empty() && !split.test.empty(), "evaluate_student: empty split");
  const auto real = as_pairs(split.train);
  std::vector<QAPair> mixed = real;
  mixed.insert(mixed.end(), synthetic.begin(), synthetic.end());

  InnerLoopConfig step_cfg;
  step_cfg.batch_size = eval.batch_size;
  step_cfg.group_size = eval.group_size;
  step_cfg.kl_coef = eval.kl_coef;
  step_cfg.learning_rate = eval.learning_rate;

  StudentState student = start;
  const StudentState reference = start;
  student.optimizer = OptimizerState::fresh(step_cfg.optimizer_config(eval.max_steps), student.skills.size());
  Rng rng = make_rng(derive_seed(seed, {0}));
  Rng test_rng = make_rng(derive_seed(seed, {1}));

  EvalResult result;
  result.test.push_back(test_point(student, split.test, eval, 0, test_rng));
  std::vector<const QAPair*> batch(static_cast<std::size_t>(eval.batch_size));
  for (int step = 1; step <= eval.max_steps; ++step) {
    std::span<const QAPair> source = real;
    if (!synthetic.empty()) {
      if (eval.strategy == MixingStrategy::mixed)
        source = mixed;
      else if (step <= eval.synthetic_warmup_steps)
        source = synthetic;
    }
    for (auto& slot : batch) slot = &source[uniform_index(rng, source.size())];
    result.train_reward.push(step, student_rl_step(student, reference, batch, step_cfg, env, rng));
    if (step % eval.cadence == 0) result.test.push_back(test_point(student, split.test, eval, step, test_rng));
  }

  if (result.train_reward.size() > static_cast<std::size_t>(eval.smooth_window))
    result.stop_step = early_stop_step(result.train_reward, eval.smooth_window, eval.slope_fraction);
  result.window_begin = result.stop_step ? *result.stop_step : std::max(0, eval.max_steps - eval.report_window);
  result.window_end = std::min<long>(result.window_begin + eval.report_window, eval.max_steps);

  std::vector<const EvalPoint*> in_window;
  for (const auto& p : result.test)
    if (p.step >= result.window_begin && p.step <= result.window_end) in_window.push_back(&p);
  if (in_window.empty()) in_window.push_back(&result.test.back());
  result.pass_at_k.assign(eval.ks.size(), 0.0);
  for (const auto* p : in_window) {
    for (std::size_t q = 0; q < eval.ks.size(); ++q) result.pass_at_k[q] += p->pass_at_k[q];
    result.greedy_accuracy += p->greedy_accuracy;
  }
  for (auto& v : result.pass_at_k) v /= static_cast<double>(in_window.size());
  result.greedy_accuracy /= static_cast<double>(in_window.size());
  return result;
}

EvalResult cmd_eval_student(const RunConfig& cfg, DatasetSource source, MixingStrategy strategy,
                            std::optional<std::uint64_t> teacher_seed, std::uint64_t student_seed,
                            TeacherArm sampled_from) {
  const auto split = load_split(cfg);
  const ArtifactLayout layout{cfg.out_dir};
  if (source != DatasetSource::none && !teacher_seed)
    throw ConfigError("evaluating " + to_string(source) + " needs a teacher seed");
  if (source == DatasetSource::none) teacher_seed.reset();

  StudentState start = StudentState::fresh(cfg.env);
  std::vector<QAPair> synthetic;
  switch (source) {
    case DatasetSource::none: break;
    case DatasetSource::pq: {
      const auto j = read_json_file(layout.teacher_dir(TeacherArm::soar, *teacher_seed) / "pq.json",
                                    "promotion questions (run train-soar first)");
      for (const auto& ds : j.at("datasets").get<std::vector<CandidateDataset>>())
        synthetic.insert(synthetic.end(), ds.items.begin(), ds.items.end());
      break;
    }
    case DatasetSource::sampled: {
      const auto j = read_json_file(layout.teacher_dir(sampled_from, *teacher_seed) / "samples.json",
                                    "teacher samples (run the arm or sample-teacher first)");
      j.at("pairs").get_to(synthetic);
      break;
    }
    case DatasetSource::ps: {
      const auto j = read_json_file(layout.teacher_dir(TeacherArm::soar, *teacher_seed) / "ps.json",
                                    "promoted student (run train-soar first)");
      j.at("student").get_to(start);
      break;
    }
  }

  auto eval = cfg.eval;
  eval.strategy = strategy;
  const auto label = eval_arm_label(source, strategy, sampled_from);
  std::uint64_t label_hash = 0;
  for (unsigned char ch : label) label_hash = mix64(label_hash ^ ch);
  const auto seed = derive_seed(student_seed, {label_hash, teacher_seed.value_or(~0ULL)});
  auto result = evaluate_student(start, synthetic, split, eval, cfg.env, seed);

  const auto dir = layout.eval_dir(label, teacher_seed, student_seed);
  json summary{{"run", identity(cfg)},
               {"arm", label},
               {"teacher_seed", teacher_seed ? json(*teacher_seed) : json(nullptr)},
               {"student_seed", student_seed},
               {"synthetic_items", synthetic.size()},
               {"stop_step", result.stop_step ? json(*result.stop_step) : json(nullptr)},
               {"window", {result.window_begin, result.window_end}},
               {"ks", eval.ks},
               {"pass_at_k", result.pass_at_k},
               {"greedy_accuracy", result.greedy_accuracy},
               {"final_greedy_accuracy", result.test.back().greedy_accuracy},
               {"train_reward", {{"steps", result.train_reward.steps()}, {"values", result.train_reward.values()}}}};
  write_json_file(dir / "result.json", summary);
  std::string series;
  for (const auto& p : result.test)
    series += json{{"step", p.step}, {"pass_at_k", p.pass_at_k}, {"greedy_accuracy", p.greedy_accuracy}}.dump() + "\n";
  write_file_atomic(dir / "series.jsonl", series);
  return result;
}

void cmd_eval_grid(const RunConfig& cfg, DatasetSource source, MixingStrategy strategy, TeacherArm sampled_from) {
  if (source == DatasetSource::none) {
    for (auto s : cfg.seeds.student) cmd_eval_student(cfg, source, strategy, std::nullopt, s);
    return;
  }
  for (auto t : cfg.seeds.teacher)
    for (auto s : cfg.seeds.student) cmd_eval_student(cfg, source, strategy, t, s, sampled_from);
}

}  // namespace soar
