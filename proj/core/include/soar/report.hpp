#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "soar/config.hpp"

namespace soar {

struct PassAtKRow {
  std::string arm;
  int k = 1;
  double median = 0.0;
  double stddev = 0.0;
  std::optional<double> delta;  // median minus the hard-only median
  std::size_t runs = 0;
};

struct AccuracyRow {
  std::string arm;
  double median = 0.0;
  double stddev = 0.0;
  std::size_t runs = 0;
};

struct DiversityRow {
  std::string arm;  // soar, intrinsic, base-teacher, pq
  double vendi_mean = 0.0;
  double vendi_stddev = 0.0;  // across teacher seeds
  double cosine_div = 0.0;
  std::size_t items = 0;
  std::size_t teachers = 0;
};

struct ReportTables {
  std::vector<PassAtKRow> pass_at_k;
  std::vector<AccuracyRow> accuracy;
  std::vector<DiversityRow> diversity;
};

/// Aggregates every evaluation arm and teacher arm found under the output
/// directory and writes report/{pass_at_k,accuracy,diversity}.csv plus
/// report/{teacher_rewards,promotions}.jsonl. Throws ConfigError listing the
/// missing runs when an arm does not cover the whole seed roster, or when an
/// artifact was produced under a different configuration.
ReportTables cmd_report(const RunConfig& cfg);

}  // namespace soar
