// soar: command-line driver for the teacher-student experiments.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "soar/config.hpp"
#include "soar/errors.hpp"
#include "soar/harness.hpp"
#include "soar/report.hpp"

using namespace soar;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string profile = "desk";
  std::string backend = "toy";
  std::string worker;
  bool dump_config = false;
};

RunConfig resolve(const Globals& g) {
  RunConfig cfg = g.config.empty() ? RunConfig::for_profile(g.profile) : load_run_config(g.config, g.profile);
  if (!g.out.empty()) cfg.out_dir = g.out;
  cfg.validate();
  if (g.dump_config) std::cout << dump_run_config(cfg) << "\n";
  return cfg;
}

Backend backend_of(const Globals& g) {
  if (g.backend == "toy") return Backend::toy;
  if (g.backend == "bridge") return Backend::bridge;
  throw ConfigError("--backend must be toy or bridge");
}

void require_toy(const Globals& g, const char* command) {
  if (backend_of(g) != Backend::toy)
    throw ConfigError(std::string(command) + " runs on the toy backend only; --backend bridge applies to train-soar");
}

void print_summary(const TeacherRunSummary& s) {
  std::printf("teacher seed %llu: %d steps, %d promotions", static_cast<unsigned long long>(s.teacher_seed), s.steps,
              s.promotions);
  if (!s.promotion_steps.empty()) {
    std::printf(" at");
    for (int p : s.promotion_steps) std::printf(" %d", p);
  }
  std::printf(", PS train accuracy %.3f%s\n", s.ps_train_accuracy, s.complete ? "" : " (stopped early)");
}

void print_eval(const std::string& label, std::optional<std::uint64_t> t, std::uint64_t s, const EvalConfig& eval,
                const EvalResult& r) {
  std::printf("%s", label.c_str());
  if (t) std::printf(" t%llu", static_cast<unsigned long long>(*t));
  std::printf(" s%llu: stop %s, window [%ld, %ld], greedy %.3f", static_cast<unsigned long long>(s),
              r.stop_step ? std::to_string(*r.stop_step).c_str() : "none", r.window_begin, r.window_end,
              r.greedy_accuracy);
  for (std::size_t q = 0; q < eval.ks.size(); ++q) std::printf(", pass@%d %.3f", eval.ks[q], r.pass_at_k[q]);
  std::printf("\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Teacher-student meta-RL simulator"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "JSON config overlay")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Restrict to one seed of the roster");
  app.add_option("--out", g.out, "Output directory (overrides the config)");
  app.add_option("--profile", g.profile, "Default budget profile")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--backend", g.backend, "Student backend")->check(CLI::IsMember({"toy", "bridge"}));
  app.add_option("--worker", g.worker, "Shell command that starts a bridge worker");
  app.add_flag("--dump-config", g.dump_config, "Print the effective configuration");

  auto* filter = app.add_subcommand("filter", "Build the task pool, apply fail@k and split 50-50");

  auto* train = app.add_subcommand("train-soar", "Run the grounded-reward outer loop");
  bool resume = false;
  std::optional<int> stop_after;
  train->add_flag("--resume", resume, "Continue from the last checkpoint");
  train->add_option("--stop-after", stop_after, "Stop once this many outer steps exist");

  auto* baseline = app.add_subcommand("train-baseline", "Run a baseline arm");
  std::string baseline_arm = "hard-only";
  baseline->add_option("--arm", baseline_arm, "hard-only | intrinsic | base-teacher")
      ->check(CLI::IsMember({"hard-only", "intrinsic", "base-teacher"}));

  auto* eval = app.add_subcommand("eval-student", "Train fresh students and track test pass@k");
  std::string source = "pq";
  std::string strategy;
  std::string from = "soar";
  std::optional<std::uint64_t> student_seed;
  eval->add_option("--source", source, "none | pq | sampled | ps")
      ->check(CLI::IsMember({"none", "pq", "sampled", "ps"}));
  eval->add_option("--strategy", strategy, "curriculum | mixed (default from config)")
      ->check(CLI::IsMember({"curriculum", "mixed"}));
  eval->add_option("--from", from, "Teacher arm for --source sampled")
      ->check(CLI::IsMember({"soar", "intrinsic", "base-teacher"}));
  eval->add_option("--student-seed", student_seed, "Restrict to one student seed");

  auto* sample = app.add_subcommand("sample-teacher", "Sample well-formed pairs from a teacher");
  std::string sample_arm = "soar";
  int count = kTeacherSampleCount;
  sample->add_option("--arm", sample_arm, "soar | intrinsic | base-teacher")
      ->check(CLI::IsMember({"soar", "intrinsic", "base-teacher"}));
  sample->add_option("--count", count, "Number of pairs")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Aggregate runs into CSV tables and JSONL plot data");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve(g);
    if (filter->parsed()) {
      require_toy(g, "filter");
      const auto split = cmd_filter(cfg);
      std::printf("kept %zu train / %zu test tasks -> %s\n", split.train.size(), split.test.size(),
                  ArtifactLayout{cfg.out_dir}.split().c_str());
    } else if (train->parsed()) {
      TeacherRunOptions options;
      options.resume = resume;
      options.stop_after = stop_after;
      options.backend = backend_of(g);
      options.worker_command = g.worker;
      for (const auto& s : cmd_train_soar(cfg, options, g.seed)) print_summary(s);
    } else if (baseline->parsed()) {
      require_toy(g, "train-baseline");
      cmd_train_baseline(cfg, parse_baseline_arm(baseline_arm), g.seed);
      std::printf("%s done\n", baseline_arm.c_str());
    } else if (eval->parsed()) {
      require_toy(g, "eval-student");
      const auto src = parse_dataset_source(source);
      const auto strat = strategy.empty() ? cfg.eval.strategy : parse_mixing_strategy(strategy);
      const auto arm = parse_teacher_arm(from);
      const auto label = eval_arm_label(src, strat, arm);
      auto run = [&](std::optional<std::uint64_t> t, std::uint64_t s) {
        print_eval(label, t, s, cfg.eval, cmd_eval_student(cfg, src, strat, t, s, arm));
      };
      for (auto s : cfg.seeds.student) {
        if (student_seed && s != *student_seed) continue;
        if (src == DatasetSource::none) {
          run(std::nullopt, s);
          continue;
        }
        for (auto t : cfg.seeds.teacher)
          if (!g.seed || t == *g.seed) run(t, s);
      }
    } else if (sample->parsed()) {
      require_toy(g, "sample-teacher");
      const auto arm = parse_teacher_arm(sample_arm);
      for (auto t : cfg.seeds.teacher) {
        if (g.seed && t != *g.seed) continue;
        const auto pairs = cmd_sample_teacher(cfg, arm, t, count);
        std::printf("%s t%llu: %zu pairs\n", sample_arm.c_str(), static_cast<unsigned long long>(t), pairs.size());
      }
    } else if (report->parsed()) {
      require_toy(g, "report");
      const auto tables = cmd_report(cfg);
      std::printf("%-28s %4s %8s %8s %8s\n", "arm", "k", "median", "std", "delta");
      for (const auto& r : tables.pass_at_k)
        std::printf("%-28s %4d %8.3f %8.3f %8s\n", r.arm.c_str(), r.k, r.median, r.stddev,
                    r.delta ? std::to_string(*r.delta).substr(0, 6).c_str() : "-");
      for (const auto& r : tables.diversity)
        std::printf("diversity %-14s vendi %.2f +- %.2f  cosine %.3f\n", r.arm.c_str(), r.vendi_mean,
                    r.vendi_stddev, r.cosine_div);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fatal: %s\n", e.what());
    return 1;
  }
  return 0;
}
