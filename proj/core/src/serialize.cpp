#include "soar/serialize.hpp"

#include <fstream>
#include <sstream>

#include "json_io.hpp"

namespace soar {

json parse_json(std::string_view text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

void to_json(json& j, const Task& t) {
  j = json{{"id", t.id},
           {"level", t.level},
           {"difficulty_offset", t.difficulty_offset},
           {"features", t.features},
           {"answer", t.answer}};
}

void from_json(const json& j, Task& t) {
  j.at("id").get_to(t.id);
  j.at("level").get_to(t.level);
  j.at("difficulty_offset").get_to(t.difficulty_offset);
  j.at("features").get_to(t.features);
  j.at("answer").get_to(t.answer);
}

void to_json(json& j, const QAPair& q) {
  j = json{{"task", q.task},
           {"proposed_answer", q.proposed_answer},
           {"well_formed", q.well_formed},
           {"generation_log_prob", q.generation_log_prob},
           {"tries", q.tries}};
}

void from_json(const json& j, QAPair& q) {
  j.at("task").get_to(q.task);
  j.at("proposed_answer").get_to(q.proposed_answer);
  j.at("well_formed").get_to(q.well_formed);
  j.at("generation_log_prob").get_to(q.generation_log_prob);
  j.at("tries").get_to(q.tries);
}

void to_json(json& j, const AdamWConfig& c) {
  j = json{{"learning_rate", c.learning_rate}, {"beta1", c.beta1},
           {"beta2", c.beta2},                 {"epsilon", c.epsilon},
           {"weight_decay", c.weight_decay},   {"warmup_steps", c.warmup_steps},
           {"total_steps", c.total_steps},     {"min_lr_ratio", c.min_lr_ratio}};
}

void from_json(const json& j, AdamWConfig& c) {
  j.at("learning_rate").get_to(c.learning_rate);
  j.at("beta1").get_to(c.beta1);
  j.at("beta2").get_to(c.beta2);
  j.at("epsilon").get_to(c.epsilon);
  j.at("weight_decay").get_to(c.weight_decay);
  j.at("warmup_steps").get_to(c.warmup_steps);
  j.at("total_steps").get_to(c.total_steps);
  j.at("min_lr_ratio").get_to(c.min_lr_ratio);
}

void to_json(json& j, const OptimizerState& o) {
  j = json{{"config", o.config},
           {"step", o.step},
           {"first_moment", o.first_moment},
           {"second_moment", o.second_moment}};
}

void from_json(const json& j, OptimizerState& o) {
  j.at("config").get_to(o.config);
  j.at("step").get_to(o.step);
  j.at("first_moment").get_to(o.first_moment);
  j.at("second_moment").get_to(o.second_moment);
}

void to_json(json& j, const StudentState& s) {
  j = json{{"skills", s.skills},
           {"kernel", s.kernel},
           {"offsets", s.offsets},
           {"malformed_share", s.malformed_share},
           {"optimizer", s.optimizer}};
}

void from_json(const json& j, StudentState& s) {
  j.at("skills").get_to(s.skills);
  j.at("kernel").get_to(s.kernel);
  j.at("offsets").get_to(s.offsets);
  j.at("malformed_share").get_to(s.malformed_share);
  j.at("optimizer").get_to(s.optimizer);
}

void to_json(json& j, const TeacherState& t) {
  j = json{{"logits", t.logits}, {"reference_logits", t.reference_logits}, {"optimizer", t.optimizer}};
}

void from_json(const json& j, TeacherState& t) {
  j.at("logits").get_to(t.logits);
  j.at("reference_logits").get_to(t.reference_logits);
  j.at("optimizer").get_to(t.optimizer);
}

void to_json(json& j, const CandidateDataset& d) {
  j = json{{"items", d.items}, {"log_prob_sum", d.log_prob_sum}};
  j["reward"] = d.reward ? json(*d.reward) : json(nullptr);
}

void from_json(const json& j, CandidateDataset& d) {
  j.at("items").get_to(d.items);
  j.at("log_prob_sum").get_to(d.log_prob_sum);
  const auto& r = j.at("reward");
  d.reward = r.is_null() ? std::nullopt : std::optional<double>(r.get<double>());
}

void to_json(json& j, const StepReport& r) {
  j = json{{"step", r.step},
           {"rewards", r.rewards},
           {"window_mean", r.window_mean},
           {"promoted", r.promoted},
           {"stage", r.stage},
           {"level_hist", r.level_hist},
           {"retries", r.retries},
           {"vendi", r.vendi},
           {"cosine_div", r.cosine_div}};
}

void from_json(const json& j, StepReport& r) {
  j.at("step").get_to(r.step);
  j.at("rewards").get_to(r.rewards);
  j.at("window_mean").get_to(r.window_mean);
  j.at("promoted").get_to(r.promoted);
  j.at("stage").get_to(r.stage);
  j.at("level_hist").get_to(r.level_hist);
  j.at("retries").get_to(r.retries);
  j.at("vendi").get_to(r.vendi);
  j.at("cosine_div").get_to(r.cosine_div);
}

namespace {

template <class T>
T decode_as(std::string_view text, const char* what) {
  const auto j = parse_json(text, what);
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string encode_step_report(const StepReport& report) { return json(report).dump(); }
StepReport decode_step_report(std::string_view line) { return decode_as<StepReport>(line, "step report"); }

std::string encode_tasks(const std::vector<Task>& tasks) { return json(tasks).dump(); }
std::vector<Task> decode_tasks(std::string_view text) { return decode_as<std::vector<Task>>(text, "tasks"); }

std::string encode_pairs(const std::vector<QAPair>& pairs) { return json(pairs).dump(); }
std::vector<QAPair> decode_pairs(std::string_view text) {
  return decode_as<std::vector<QAPair>>(text, "pairs");
}

std::string encode_student(const StudentState& student) { return json(student).dump(); }
StudentState decode_student(std::string_view text) { return decode_as<StudentState>(text, "student"); }

std::string encode_teacher(const TeacherState& teacher) { return json(teacher).dump(); }
TeacherState decode_teacher(std::string_view text) { return decode_as<TeacherState>(text, "teacher"); }

std::string encode_ledger(const PromotionLedger& ledger) { return json(ledger).dump(); }
PromotionLedger decode_ledger(std::string_view text) {
  return decode_as<PromotionLedger>(text, "ledger");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void append_line(const std::filesystem::path& path, std::string_view line) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw ConfigError("cannot append to " + path.string());
  out << line << '\n';
  out.flush();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) lines.push_back(line);
  return lines;
}

}  // namespace soar
