#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "soar/env.hpp"
#include "soar/inner_loop.hpp"
#include "soar/outer_loop.hpp"

namespace soar {

enum class MixingStrategy { curriculum, mixed };

struct EvalConfig {
  MixingStrategy strategy = MixingStrategy::mixed;
  int synthetic_warmup_steps = 64;  // curriculum only
  int max_steps = 1500;
  int samples = 32;  // per test task for pass@k
  std::vector<int> ks{1, 4, 8, 16, 32};
  int cadence = 10;
  int smooth_window = 25;
  double slope_fraction = 0.15;
  int report_window = 200;
  double learning_rate = 4.0;
  int batch_size = 8;
  int group_size = 32;
  double kl_coef = 0.001;

  void validate() const;
  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct FilterConfig {
  int k = 128;
  double train_fraction = 0.5;
  friend bool operator==(const FilterConfig&, const FilterConfig&) = default;
};

/// Teacher seeds x student seeds; every student seed is run under every teacher seed.
struct SeedRoster {
  std::vector<std::uint64_t> teacher{0, 1, 2, 3, 4};
  std::vector<std::uint64_t> student{0, 1};
  std::uint64_t pool = 11;   // task pool generation and fail@k draws
  std::uint64_t split = 12;  // train/test split

  friend bool operator==(const SeedRoster&, const SeedRoster&) = default;
};

struct RunConfig {
  std::string profile = "desk";
  EnvProfile env = EnvProfile::desk_default();
  OuterLoopConfig outer;
  InnerLoopConfig inner;
  EvalConfig eval;
  FilterConfig filter;
  SeedRoster seeds;
  std::filesystem::path out_dir = "out";

  /// "desk" (60 outer steps) or "paper" (200 outer steps); throws ConfigError otherwise.
  static RunConfig for_profile(const std::string& profile);

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Profile defaults overlaid with the keys present in `json_text`. Unknown keys
/// and type mismatches are ConfigErrors.
RunConfig parse_run_config(const std::string& json_text, const std::string& profile = "desk");
RunConfig load_run_config(const std::filesystem::path& path, const std::string& profile = "desk");

/// Every field, pretty-printed.
std::string dump_run_config(const RunConfig& cfg);

/// Fingerprint of everything except the output directory, hex encoded.
std::string config_hash(const RunConfig& cfg);

std::string to_string(MixingStrategy s);
MixingStrategy parse_mixing_strategy(const std::string& s);

}  // namespace soar
