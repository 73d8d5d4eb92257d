#pragma once

// nlohmann::json conversions shared by the artifact writers. Private to the library.

#include <cmath>
#include <limits>
#include <string>

#include "json.hpp"
#include "soar/config.hpp"
#include "soar/errors.hpp"
#include "soar/outer_loop.hpp"

namespace soar {

using json = nlohmann::json;

// JSON has no infinity; write it as a string so an unreachable threshold survives a round trip.
inline json real_to_json(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

inline double real_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw ConfigError("expected a number, got \"" + s + "\"");
  }
  if (!j.is_number()) throw ConfigError("expected a number, got " + j.dump());
  return j.get<double>();
}

void to_json(json& j, const Task& t);
void from_json(const json& j, Task& t);
void to_json(json& j, const QAPair& q);
void from_json(const json& j, QAPair& q);
void to_json(json& j, const AdamWConfig& c);
void from_json(const json& j, AdamWConfig& c);
void to_json(json& j, const OptimizerState& o);
void from_json(const json& j, OptimizerState& o);
void to_json(json& j, const StudentState& s);
void from_json(const json& j, StudentState& s);
void to_json(json& j, const TeacherState& t);
void from_json(const json& j, TeacherState& t);
void to_json(json& j, const CandidateDataset& d);
void from_json(const json& j, CandidateDataset& d);
void to_json(json& j, const StepReport& r);
void from_json(const json& j, StepReport& r);

void to_json(json& j, const EnvProfile& e);
void from_json(const json& j, EnvProfile& e);
void to_json(json& j, const OuterLoopConfig& c);
void from_json(const json& j, OuterLoopConfig& c);
void to_json(json& j, const InnerLoopConfig& c);
void from_json(const json& j, InnerLoopConfig& c);
void to_json(json& j, const EvalConfig& c);
void from_json(const json& j, EvalConfig& c);
void to_json(json& j, const FilterConfig& c);
void from_json(const json& j, FilterConfig& c);
void to_json(json& j, const SeedRoster& s);
void from_json(const json& j, SeedRoster& s);
void to_json(json& j, const RunConfig& c);
void from_json(const json& j, RunConfig& c);

template <class Student>
void to_json(json& j, const BasicPromotionLedger<Student>& l) {
  json history = json::array();
  for (const auto& e : l.history) history.push_back({{"step", e.step}, {"reward", e.reward}});
  j = json{{"baseline", l.baseline},
           {"stage", l.stage},
           {"tau", real_to_json(l.tau)},
           {"window_width", l.window_width},
           {"recent", std::vector<double>(l.recent.begin(), l.recent.end())},
           {"best", l.best},
           {"history", history}};
  j["ema"] = l.ema ? json(*l.ema) : json(nullptr);
}

template <class Student>
void from_json(const json& j, BasicPromotionLedger<Student>& l) {
  j.at("baseline").get_to(l.baseline);
  j.at("stage").get_to(l.stage);
  l.tau = real_from_json(j.at("tau"));
  j.at("window_width").get_to(l.window_width);
  const auto recent = j.at("recent").get<std::vector<double>>();
  l.recent.assign(recent.begin(), recent.end());
  const auto& ema = j.at("ema");
  l.ema = ema.is_null() ? std::nullopt : std::optional<double>(ema.get<double>());
  j.at("best").get_to(l.best);
  l.history.clear();
  for (const auto& e : j.at("history"))
    l.history.push_back({e.at("step").get<int>(), e.at("reward").get<double>()});
}

json parse_json(std::string_view text, const char* what);

}  // namespace soar
