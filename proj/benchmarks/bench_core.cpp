#include <benchmark/benchmark.h>

#include "soar/env.hpp"
#include "soar/inner_loop.hpp"
#include "soar/metrics.hpp"
#include "soar/outer_loop.hpp"
#include "soar/rloo.hpp"

using namespace soar;

namespace {

std::vector<Task> tasks_at(int level, int count, std::uint64_t seed) {
  const auto env = EnvProfile::desk_default();
  Rng rng = make_rng(seed);
  std::vector<Task> out;
  for (int i = 0; i < count; ++i) out.push_back(make_task(level, env, rng));
  return out;
}

void BM_RlooGradient(benchmark::State& state) {
  const auto g = static_cast<std::size_t>(state.range(0));
  Rng rng = make_rng(1);
  std::vector<double> logits(9);
  for (auto& x : logits) x = uniform(rng, -2, 2);
  const CategoricalPolicy pol(logits);
  RolloutGroup group;
  for (std::size_t i = 0; i < g; ++i) {
    const auto z = sample(pol, rng);
    group.outcomes.push_back({z, log_prob(pol, z), uniform01(rng)});
  }
  for (auto _ : state) benchmark::DoNotOptimize(rloo_policy_gradient(pol, group));
}
BENCHMARK(BM_RlooGradient)->Arg(4)->Arg(32)->Arg(256);

void BM_PassAtK(benchmark::State& state) {
  for (auto _ : state)
    for (int c = 0; c <= 32; ++c) benchmark::DoNotOptimize(pass_at_k({0, 32, c}, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_PassAtK)->Arg(1)->Arg(32);

void BM_Vendi(benchmark::State& state) {
  const auto tasks = tasks_at(3, static_cast<int>(state.range(0)), 2);
  const auto x = task_embeddings(tasks);
  const auto route = state.range(1) == 0 ? VendiRoute::kernel : VendiRoute::gram;
  for (auto _ : state) benchmark::DoNotOptimize(vendi_score(x, route));
}
BENCHMARK(BM_Vendi)->Args({64, 0})->Args({64, 1})->Args({128, 0})->Args({128, 1})->Unit(benchmark::kMicrosecond);

void BM_VendiBootstrap(benchmark::State& state) {
  std::vector<Task> tasks;
  for (int level = 0; level < 9; ++level) {
    const auto part = tasks_at(level, 32, 10 + static_cast<std::uint64_t>(level));
    tasks.insert(tasks.end(), part.begin(), part.end());
  }
  const auto x = task_embeddings(tasks);
  Rng rng = make_rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(vendi_bootstrap(x, 128, 100, rng));
}
BENCHMARK(BM_VendiBootstrap)->Unit(benchmark::kMillisecond);

void BM_TeacherGenerate(benchmark::State& state) {
  const auto env = EnvProfile::desk_default();
  const auto teacher = TeacherState::fresh(env, OuterLoopConfig{}.teacher_optimizer());
  Rng rng = make_rng(4);
  for (auto _ : state) benchmark::DoNotOptimize(teacher_generate(teacher, env, rng));
}
BENCHMARK(BM_TeacherGenerate);

void BM_InnerRun(benchmark::State& state) {
  const auto env = EnvProfile::desk_default();
  std::vector<QAPair> data;
  for (const auto& t : tasks_at(4, 64, 5)) data.push_back(QAPair{t, t.answer});
  const auto base = StudentState::fresh(env);
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(rl_update_student(base, data, InnerLoopConfig{}, env, static_cast<int>(state.range(0)), seed++));
}
BENCHMARK(BM_InnerRun)->Arg(0)->Arg(3)->Unit(benchmark::kMicrosecond);

void BM_OuterStep(benchmark::State& state) {
  const auto env = EnvProfile::desk_default();
  OuterLoopConfig cfg;
  cfg.threads = static_cast<int>(state.range(0));
  std::vector<Task> train = tasks_at(7, 64, 6);
  const auto more = tasks_at(8, 64, 7);
  train.insert(train.end(), more.begin(), more.end());
  const auto teacher = TeacherState::fresh(env, cfg.teacher_optimizer());
  const auto ledger = PromotionLedger::start(StudentState::fresh(env), cfg);
  int step = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(run_outer_step(teacher, ledger, env, train, cfg, InnerLoopConfig{}, step++, 1));
}
BENCHMARK(BM_OuterStep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
