#include "soar/config.hpp"

#include <cstdio>
#include <set>

#include "json_io.hpp"
#include "soar/serialize.hpp"

namespace soar {

std::string to_string(MixingStrategy s) { return s == MixingStrategy::curriculum ? "curriculum" : "mixed"; }

MixingStrategy parse_mixing_strategy(const std::string& s) {
  if (s == "curriculum") return MixingStrategy::curriculum;
  if (s == "mixed") return MixingStrategy::mixed;
  throw ConfigError("mixing strategy must be curriculum or mixed, got \"" + s + "\"");
}

namespace {

std::string moving_average_name(MovingAverage m) { return m == MovingAverage::window ? "window" : "exponential"; }

MovingAverage parse_moving_average(const std::string& s) {
  if (s == "window") return MovingAverage::window;
  if (s == "exponential") return MovingAverage::exponential;
  throw ConfigError("moving_average must be window or exponential, got \"" + s + "\"");
}

std::string reward_name(TeacherReward r) { return r == TeacherReward::grounded ? "grounded" : "learnability"; }

TeacherReward parse_reward(const std::string& s) {
  if (s == "grounded") return TeacherReward::grounded;
  if (s == "learnability") return TeacherReward::learnability;
  throw ConfigError("reward must be grounded or learnability, got \"" + s + "\"");
}

// Keys of `patch` that `base` does not have, as dotted paths.
void unknown_keys(const json& base, const json& patch, const std::string& prefix,
                  std::vector<std::string>& out) {
  if (!patch.is_object()) return;
  for (const auto& [key, value] : patch.items()) {
    const auto path = prefix.empty() ? key : prefix + "." + key;
    if (!base.contains(key)) {
      out.push_back(path);
      continue;
    }
    if (base.at(key).is_object()) unknown_keys(base.at(key), value, path, out);
  }
}

}  // namespace

void to_json(json& j, const EnvProfile& e) {
  j = json{{"top_level", e.top_level},
           {"offsets", e.offsets},
           {"generator_competence", e.generator_competence},
           {"format_failure", e.format_failure},
           {"alphabet", e.alphabet},
           {"kernel_weight", e.kernel_weight},
           {"kernel_bandwidth", e.kernel_bandwidth},
           {"mention_probability", e.mention_probability},
           {"student_malformed_share", e.student_malformed_share},
           {"difficulty_spread", e.difficulty_spread},
           {"feature_noise_dim", e.feature_noise_dim},
           {"feature_noise_share", e.feature_noise_share},
           {"feature_band_width", e.feature_band_width},
           {"pool_per_level", e.pool_per_level}};
}

void from_json(const json& j, EnvProfile& e) {
  j.at("top_level").get_to(e.top_level);
  j.at("offsets").get_to(e.offsets);
  j.at("generator_competence").get_to(e.generator_competence);
  j.at("format_failure").get_to(e.format_failure);
  j.at("alphabet").get_to(e.alphabet);
  e.kernel_weight = real_from_json(j.at("kernel_weight"));
  j.at("kernel_bandwidth").get_to(e.kernel_bandwidth);
  e.mention_probability = real_from_json(j.at("mention_probability"));
  e.student_malformed_share = real_from_json(j.at("student_malformed_share"));
  e.difficulty_spread = real_from_json(j.at("difficulty_spread"));
  j.at("feature_noise_dim").get_to(e.feature_noise_dim);
  e.feature_noise_share = real_from_json(j.at("feature_noise_share"));
  e.feature_band_width = real_from_json(j.at("feature_band_width"));
  j.at("pool_per_level").get_to(e.pool_per_level);
}

void to_json(json& j, const OuterLoopConfig& c) {
  j = json{{"group_size", c.group_size},
           {"dataset_size", c.dataset_size},
           {"repeats", c.repeats},
           {"reward_questions", c.reward_questions},
           {"tau", real_to_json(c.tau)},
           {"window", c.window},
           {"max_steps", c.max_steps},
           {"teacher_batch", c.teacher_batch},
           {"learning_rate", c.learning_rate},
           {"warmup_steps", c.warmup_steps},
           {"kl_coef", c.kl_coef},
           {"weight_decay", c.weight_decay},
           {"moving_average", moving_average_name(c.moving_average)},
           {"ema_decay", c.ema_decay},
           {"reset_window_on_promotion", c.reset_window_on_promotion},
           {"reward", reward_name(c.reward)},
           {"learnability_samples", c.learnability_samples},
           {"max_tries", c.max_tries},
           {"threads", c.threads}};
}

void from_json(const json& j, OuterLoopConfig& c) {
  j.at("group_size").get_to(c.group_size);
  j.at("dataset_size").get_to(c.dataset_size);
  j.at("repeats").get_to(c.repeats);
  j.at("reward_questions").get_to(c.reward_questions);
  c.tau = real_from_json(j.at("tau"));
  j.at("window").get_to(c.window);
  j.at("max_steps").get_to(c.max_steps);
  j.at("teacher_batch").get_to(c.teacher_batch);
  c.learning_rate = real_from_json(j.at("learning_rate"));
  j.at("warmup_steps").get_to(c.warmup_steps);
  c.kl_coef = real_from_json(j.at("kl_coef"));
  c.weight_decay = real_from_json(j.at("weight_decay"));
  c.moving_average = parse_moving_average(j.at("moving_average").get<std::string>());
  c.ema_decay = real_from_json(j.at("ema_decay"));
  j.at("reset_window_on_promotion").get_to(c.reset_window_on_promotion);
  c.reward = parse_reward(j.at("reward").get<std::string>());
  j.at("learnability_samples").get_to(c.learnability_samples);
  j.at("max_tries").get_to(c.max_tries);
  j.at("threads").get_to(c.threads);
}

void to_json(json& j, const InnerLoopConfig& c) {
  j = json{{"steps", c.steps},
           {"extra_steps_per_stage", c.extra_steps_per_stage},
           {"batch_size", c.batch_size},
           {"group_size", c.group_size},
           {"learning_rate", c.learning_rate},
           {"warmup_steps", c.warmup_steps},
           {"kl_coef", c.kl_coef},
           {"weight_decay", c.weight_decay},
           {"min_lr_ratio", c.min_lr_ratio}};
}

void from_json(const json& j, InnerLoopConfig& c) {
  j.at("steps").get_to(c.steps);
  j.at("extra_steps_per_stage").get_to(c.extra_steps_per_stage);
  j.at("batch_size").get_to(c.batch_size);
  j.at("group_size").get_to(c.group_size);
  c.learning_rate = real_from_json(j.at("learning_rate"));
  j.at("warmup_steps").get_to(c.warmup_steps);
  c.kl_coef = real_from_json(j.at("kl_coef"));
  c.weight_decay = real_from_json(j.at("weight_decay"));
  c.min_lr_ratio = real_from_json(j.at("min_lr_ratio"));
}

void to_json(json& j, const EvalConfig& c) {
  j = json{{"strategy", to_string(c.strategy)},
           {"synthetic_warmup_steps", c.synthetic_warmup_steps},
           {"max_steps", c.max_steps},
           {"samples", c.samples},
           {"ks", c.ks},
           {"cadence", c.cadence},
           {"smooth_window", c.smooth_window},
           {"slope_fraction", c.slope_fraction},
           {"report_window", c.report_window},
           {"learning_rate", c.learning_rate},
           {"batch_size", c.batch_size},
           {"group_size", c.group_size},
           {"kl_coef", c.kl_coef}};
}

void from_json(const json& j, EvalConfig& c) {
  c.strategy = parse_mixing_strategy(j.at("strategy").get<std::string>());
  j.at("synthetic_warmup_steps").get_to(c.synthetic_warmup_steps);
  j.at("max_steps").get_to(c.max_steps);
  j.at("samples").get_to(c.samples);
  j.at("ks").get_to(c.ks);
  j.at("cadence").get_to(c.cadence);
  j.at("smooth_window").get_to(c.smooth_window);
  c.slope_fraction = real_from_json(j.at("slope_fraction"));
  j.at("report_window").get_to(c.report_window);
  c.learning_rate = real_from_json(j.at("learning_rate"));
  j.at("batch_size").get_to(c.batch_size);
  j.at("group_size").get_to(c.group_size);
  c.kl_coef = real_from_json(j.at("kl_coef"));
}

void to_json(json& j, const FilterConfig& c) { j = json{{"k", c.k}, {"train_fraction", c.train_fraction}}; }

void from_json(const json& j, FilterConfig& c) {
  j.at("k").get_to(c.k);
  c.train_fraction = real_from_json(j.at("train_fraction"));
}

void to_json(json& j, const SeedRoster& s) {
  j = json{{"teacher", s.teacher}, {"student", s.student}, {"pool", s.pool}, {"split", s.split}};
}

void from_json(const json& j, SeedRoster& s) {
  j.at("teacher").get_to(s.teacher);
  j.at("student").get_to(s.student);
  j.at("pool").get_to(s.pool);
  j.at("split").get_to(s.split);
}

void to_json(json& j, const RunConfig& c) {
  j = json{{"profile", c.profile}, {"env", c.env},       {"outer", c.outer},
           {"inner", c.inner},     {"eval", c.eval},     {"filter", c.filter},
           {"seeds", c.seeds},     {"out_dir", c.out_dir.string()}};
}

void from_json(const json& j, RunConfig& c) {
  j.at("profile").get_to(c.profile);
  j.at("env").get_to(c.env);
  j.at("outer").get_to(c.outer);
  j.at("inner").get_to(c.inner);
  j.at("eval").get_to(c.eval);
  j.at("filter").get_to(c.filter);
  j.at("seeds").get_to(c.seeds);
  c.out_dir = j.at("out_dir").get<std::string>();
}

void EvalConfig::validate() const {
  if (synthetic_warmup_steps < 0) throw ConfigError("eval: synthetic_warmup_steps must be nonnegative");
  if (max_steps < 1) throw ConfigError("eval: max_steps must be positive");
  if (samples < 1) throw ConfigError("eval: samples must be positive");
  if (ks.empty()) throw ConfigError("eval: ks must not be empty");
  for (int k : ks)
    if (k < 1 || k > samples) throw ConfigError("eval: every k must lie in [1, samples]");
  if (cadence < 1) throw ConfigError("eval: cadence must be positive");
  if (smooth_window < 1) throw ConfigError("eval: smooth_window must be positive");
  if (!(slope_fraction > 0 && slope_fraction < 1)) throw ConfigError("eval: slope_fraction must lie in (0, 1)");
  if (report_window < 1) throw ConfigError("eval: report_window must be positive");
  if (!(learning_rate >= 0)) throw ConfigError("eval: learning_rate must be nonnegative");
  if (batch_size < 1) throw ConfigError("eval: batch_size must be positive");
  if (group_size < 2) throw ConfigError("eval: group_size must be at least 2");
  if (!(kl_coef >= 0)) throw ConfigError("eval: kl_coef must be nonnegative");
}

RunConfig RunConfig::for_profile(const std::string& profile) {
  RunConfig c;
  c.profile = profile;
  if (profile == "desk") {
    c.outer.max_steps = 60;
  } else if (profile == "paper") {
    c.outer.max_steps = 200;
  } else {
    throw ConfigError("profile must be desk or paper, got \"" + profile + "\"");
  }
  return c;
}

void RunConfig::validate() const {
  if (profile != "desk" && profile != "paper") throw ConfigError("profile must be desk or paper");
  env.validate();
  outer.validate();
  inner.validate();
  eval.validate();
  if (filter.k < 1) throw ConfigError("filter: k must be positive");
  if (!(filter.train_fraction > 0 && filter.train_fraction < 1))
    throw ConfigError("filter: train_fraction must lie in (0, 1)");
  auto unique_nonempty = [](const std::vector<std::uint64_t>& v, const char* name) {
    if (v.empty()) throw ConfigError(std::string("seeds: ") + name + " roster is empty");
    if (std::set<std::uint64_t>(v.begin(), v.end()).size() != v.size())
      throw ConfigError(std::string("seeds: ") + name + " roster has duplicates");
  };
  unique_nonempty(seeds.teacher, "teacher");
  unique_nonempty(seeds.student, "student");
}

RunConfig parse_run_config(const std::string& json_text, const std::string& profile) {
  const auto patch = parse_json(json_text, "config");
  if (!patch.is_object()) throw ConfigError("config: top level must be an object");
  // A profile named in the file wins over the command-line default.
  const auto chosen = patch.contains("profile") && patch.at("profile").is_string()
                          ? patch.at("profile").get<std::string>()
                          : profile;
  json merged = RunConfig::for_profile(chosen);
  std::vector<std::string> unknown;
  unknown_keys(merged, patch, "", unknown);
  if (!unknown.empty()) {
    std::string msg = "config: unknown keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }
  merged.merge_patch(patch);
  RunConfig cfg;
  try {
    cfg = merged.get<RunConfig>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path, const std::string& profile) {
  return parse_run_config(read_file(path), profile);
}

std::string dump_run_config(const RunConfig& cfg) { return json(cfg).dump(2); }

std::string config_hash(const RunConfig& cfg) {
  json j = cfg;
  j.erase("out_dir");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) h = (h ^ ch) * 0x100000001b3ULL;
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(mix64(h)));
  return buf;
}

}  // namespace soar
