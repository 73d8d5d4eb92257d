#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "soar/config.hpp"
#include "soar/errors.hpp"
#include "soar/serialize.hpp"

using namespace soar;
namespace fs = std::filesystem;

namespace {

StepReport awkward_report() {
  StepReport r;
  r.step = 17;
  r.rewards = {0.1, -1.0 / 3.0, 0.0, 5e-324};
  r.window_mean = std::nextafter(0.01, 1.0);
  r.promoted = true;
  r.stage = 2;
  r.level_hist = {0, 1, 2, 3, 4, 5, 6, 7, 36};
  r.retries = {0, 3, 1, 12};
  r.vendi = 7.123456789012345;
  r.cosine_div = 0.9999999999999999;
  return r;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("soar_unit_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST(Serialize, StepReportRoundTripsBitExact) {
  const auto r = awkward_report();
  const auto line = encode_step_report(r);
  EXPECT_EQ(line.find('\n'), std::string::npos);
  EXPECT_EQ(decode_step_report(line), r);
  EXPECT_EQ(encode_step_report(decode_step_report(line)), line);
}

TEST(Serialize, StepReportFieldNames) {
  const auto line = encode_step_report(awkward_report());
  for (const char* key : {"\"step\"", "\"rewards\"", "\"window_mean\"", "\"promoted\"", "\"stage\"", "\"level_hist\"",
                          "\"retries\"", "\"vendi\"", "\"cosine_div\""})
    EXPECT_NE(line.find(key), std::string::npos) << key;
}

TEST(Serialize, StateRoundTrips) {
  const auto env = EnvProfile::desk_default();
  Rng rng = make_rng(91);
  std::vector<Task> tasks;
  std::vector<QAPair> pairs;
  for (int i = 0; i < 5; ++i) {
    tasks.push_back(make_task(i, env, rng));
    pairs.push_back(QAPair{tasks.back(), 4, true, -1.0 / 7.0, 3});
  }
  EXPECT_EQ(decode_tasks(encode_tasks(tasks)), tasks);
  EXPECT_EQ(decode_pairs(encode_pairs(pairs)), pairs);

  auto student = StudentState::fresh(env);
  student.skills[3] = 0.1 + 0.2;
  student.optimizer.first_moment[2] = -1e-300;
  student.optimizer.step = 9;
  EXPECT_EQ(decode_student(encode_student(student)), student);

  auto teacher = TeacherState::fresh(env, AdamWConfig{});
  teacher.logits[0] = std::acos(-1.0);
  EXPECT_EQ(decode_teacher(encode_teacher(teacher)), teacher);

  OuterLoopConfig cfg;
  auto ledger = PromotionLedger::start(student, cfg);
  ledger.record(0.02, MovingAverage::window, 0.5);
  CandidateDataset ds{pairs, -3.5, 0.125};
  ledger.promote(student, ds, 4, 0.02, false);
  EXPECT_EQ(decode_ledger(encode_ledger(ledger)), ledger);
}

TEST(Serialize, MalformedInputIsAConfigError) {
  EXPECT_THROW(decode_step_report("{\"step\": 1"), ConfigError);
  EXPECT_THROW(decode_student("[]"), ConfigError);
}

TEST(Serialize, FileHelpers) {
  const auto dir = scratch("files");
  write_file_atomic(dir / "a.json", "first");
  write_file_atomic(dir / "a.json", "second");
  EXPECT_EQ(read_file(dir / "a.json"), "second");
  append_line(dir / "log.jsonl", "{\"a\":1}");
  append_line(dir / "log.jsonl", "{\"a\":2}");
  EXPECT_EQ(read_lines(dir / "log.jsonl"), (std::vector<std::string>{"{\"a\":1}", "{\"a\":2}"}));
  EXPECT_THROW(read_file(dir / "missing.json"), ConfigError);
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_EQ(e.path().extension().string().find("tmp"), std::string::npos);
}

TEST(RunConfig, ProfilesDifferInBudgetOnly) {
  const auto desk = RunConfig::for_profile("desk");
  const auto paper = RunConfig::for_profile("paper");
  EXPECT_EQ(desk.outer.max_steps, 60);
  EXPECT_EQ(paper.outer.max_steps, 200);
  EXPECT_EQ(desk.eval.max_steps, 1500);
  EXPECT_EQ(desk.eval.ks, (std::vector<int>{1, 4, 8, 16, 32}));
  EXPECT_EQ(desk.eval.synthetic_warmup_steps, 64);
  EXPECT_THROW(RunConfig::for_profile("laptop"), ConfigError);
}

TEST(RunConfig, DumpParseRoundTrip) {
  auto cfg = RunConfig::for_profile("paper");
  cfg.outer.tau = 0.02;
  cfg.eval.strategy = MixingStrategy::curriculum;
  cfg.seeds.teacher = {7, 8};
  cfg.env.offsets[8] = 21.0;
  EXPECT_EQ(parse_run_config(dump_run_config(cfg), "paper"), cfg);
}

TEST(RunConfig, OverlayKeepsDefaults) {
  const auto cfg = parse_run_config(R"({"outer": {"tau": 0.05}, "eval": {"strategy": "curriculum"}})");
  EXPECT_EQ(cfg.outer.tau, 0.05);
  EXPECT_EQ(cfg.outer.group_size, 4);
  EXPECT_EQ(cfg.eval.strategy, MixingStrategy::curriculum);
  EXPECT_EQ(cfg.env, EnvProfile::desk_default());
}

TEST(RunConfig, InfiniteThresholdSpelledInf) {
  const auto cfg = parse_run_config(R"({"outer": {"tau": "inf"}})");
  EXPECT_TRUE(std::isinf(cfg.outer.tau));
  EXPECT_EQ(parse_run_config(dump_run_config(cfg)).outer.tau, std::numeric_limits<double>::infinity());
}

TEST(RunConfig, RejectsUnknownKeysBadTypesAndValues) {
  EXPECT_THROW(parse_run_config(R"({"outer": {"tua": 0.05}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"banana": 1})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"outer": {"group_size": "four"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"eval": {"strategy": "shuffled"}})"), ConfigError);
  EXPECT_THROW(parse_run_config(R"({"outer": {"group_size": 1}})"), ConfigError);
  EXPECT_THROW(parse_run_config("not json"), ConfigError);
}

TEST(RunConfig, HashIgnoresOutputDirectory) {
  auto a = RunConfig::for_profile("desk");
  auto b = a;
  b.out_dir = "/somewhere/else";
  EXPECT_EQ(config_hash(a), config_hash(b));
  b.outer.tau = 0.011;
  EXPECT_NE(config_hash(a), config_hash(b));
  EXPECT_NE(config_hash(a), config_hash(RunConfig::for_profile("paper")));
}

TEST(RunConfig, MixingStrategyNames) {
  EXPECT_EQ(to_string(MixingStrategy::curriculum), "curriculum");
  EXPECT_EQ(parse_mixing_strategy("mixed"), MixingStrategy::mixed);
  EXPECT_THROW(parse_mixing_strategy("both"), ConfigError);
}
