#include "soar/bridge.hpp"

#include <cctype>
#include <charconv>
#include <istream>
#include <ostream>

#include "json_io.hpp"

namespace soar {

namespace {

using ojson = nlohmann::ordered_json;

ojson parse_object(std::string_view text, const char* what) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw BridgeError("bad_request", std::string(what) + " is not valid JSON");
  }
  if (!j.is_object()) throw BridgeError("bad_request", std::string(what) + " must be a JSON object");
  return j;
}

template <class F>
auto field(const ojson& j, const char* key, F&& convert) {
  if (!j.contains(key)) throw BridgeError("bad_request", std::string("missing field \"") + key + "\"");
  try {
    return convert(j.at(key));
  } catch (const ojson::exception&) {
    throw BridgeError("bad_request", std::string("field \"") + key + "\" has the wrong type");
  }
}

void check_protocol(const ojson& j) {
  const auto p = field(j, "protocol", [](const ojson& v) { return v.get<std::string>(); });
  if (p != kBridgeProtocol) throw BridgeError("bad_protocol", "expected protocol " + std::string(kBridgeProtocol) + ", got " + p);
}

ojson task_to_ojson(const Task& t) { return ojson::parse(json(t).dump()); }

Task task_from_ojson(const ojson& j) {
  try {
    return json::parse(j.dump()).get<Task>();
  } catch (const json::exception&) {
    throw BridgeError("bad_request", "malformed task record");
  }
}

}  // namespace

std::string to_string(BridgeCommand cmd) {
  switch (cmd) {
    case BridgeCommand::sample: return "sample";
    case BridgeCommand::greedy_eval: return "greedy_eval";
    case BridgeCommand::rl_update: return "rl_update";
    case BridgeCommand::snapshot: return "snapshot";
    case BridgeCommand::restore: return "restore";
  }
  return "?";
}

BridgeCommand parse_bridge_command(std::string_view name) {
  for (auto c : {BridgeCommand::sample, BridgeCommand::greedy_eval, BridgeCommand::rl_update,
                 BridgeCommand::snapshot, BridgeCommand::restore})
    if (to_string(c) == name) return c;
  throw BridgeError("bad_request", "unknown cmd \"" + std::string(name) + "\"");
}

std::string encode_request(const BridgeRequest& r) {
  ojson j;
  j["protocol"] = kBridgeProtocol;
  j["id"] = r.id;
  j["cmd"] = to_string(r.cmd);
  j["payload"] = parse_object(r.payload, "payload");
  return j.dump();
}

BridgeRequest decode_request(std::string_view line) {
  const auto j = parse_object(line, "request");
  check_protocol(j);
  BridgeRequest r;
  r.id = field(j, "id", [](const ojson& v) {
    if (!v.is_number_integer()) throw BridgeError("bad_request", "id must be an integer");
    return v.get<std::int64_t>();
  });
  r.cmd = parse_bridge_command(field(j, "cmd", [](const ojson& v) { return v.get<std::string>(); }));
  const auto payload = j.contains("payload") ? j.at("payload") : ojson::object();
  if (!payload.is_object()) throw BridgeError("bad_request", "payload must be an object");
  r.payload = payload.dump();
  return r;
}

std::string encode_response(const BridgeResponse& r) {
  ojson j;
  j["protocol"] = kBridgeProtocol;
  j["id"] = r.id;
  j["status"] = r.ok ? "ok" : "error";
  if (r.ok)
    j["payload"] = parse_object(r.payload, "payload");
  else
    j["error"] = ojson{{"code", r.error_code}, {"message", r.error_message}};
  return j.dump();
}

BridgeResponse decode_response(std::string_view line) {
  const auto j = parse_object(line, "response");
  check_protocol(j);
  BridgeResponse r;
  r.id = field(j, "id", [](const ojson& v) { return v.get<std::int64_t>(); });
  const auto status = field(j, "status", [](const ojson& v) { return v.get<std::string>(); });
  if (status == "ok") {
    r.ok = true;
    r.payload = j.contains("payload") ? j.at("payload").dump() : "{}";
  } else if (status == "error") {
    r.ok = false;
    const auto err = field(j, "error", [](const ojson& v) { return v; });
    r.error_code = field(err, "code", [](const ojson& v) { return v.get<std::string>(); });
    r.error_message = err.contains("message") ? err.at("message").get<std::string>() : "";
  } else {
    throw BridgeError("bad_response", "unknown status \"" + status + "\"");
  }
  return r;
}

BridgeClient::BridgeClient(std::unique_ptr<LineTransport> transport) : transport_(std::move(transport)) {
  expects(transport_ != nullptr, "BridgeClient: null transport");
}

std::string BridgeClient::call(BridgeCommand cmd, const std::string& payload) {
  const BridgeRequest request{next_id_++, cmd, payload};
  transport_->write_line(encode_request(request));
  const auto response = decode_response(transport_->read_line());
  if (response.id != request.id)
    throw BridgeError("bad_response", "response id " + std::to_string(response.id) +
                                          " does not match request id " + std::to_string(request.id));
  if (!response.ok) throw BridgeError(response.error_code, response.error_message);
  return response.payload;
}

std::string render_question(const Task& task) {
  return "Level " + std::to_string(task.level) + " problem #" + std::to_string(task.id) +
         ": find the hidden symbol.";
}

std::string render_answer(int answer) { return "\\boxed{" + std::to_string(answer) + "}"; }

std::optional<TeacherOutput> parse_teacher_output(std::string_view text) {
  auto between = [&](std::string_view open, std::string_view close) -> std::optional<std::string_view> {
    const auto a = text.find(open);
    if (a == std::string_view::npos) return std::nullopt;
    const auto b = text.find(close, a + open.size());
    if (b == std::string_view::npos) return std::nullopt;
    return text.substr(a + open.size(), b - a - open.size());
  };
  const auto q = between("<question>", "</question>");
  const auto a = between("<answer>", "</answer>");
  if (!q || !a) return std::nullopt;
  auto strip = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  const auto question = strip(*q);
  if (question.empty()) return std::nullopt;
  constexpr std::string_view box = "\\boxed{";
  const auto at = a->find(box);
  if (at == std::string_view::npos) return std::nullopt;
  const auto end = a->find('}', at + box.size());
  if (end == std::string_view::npos) return std::nullopt;
  const auto inner = strip(a->substr(at + box.size(), end - at - box.size()));
  int value = 0;
  const auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), value);
  if (inner.empty() || ec != std::errc() || ptr != inner.data() + inner.size() || value < 0) return std::nullopt;
  return TeacherOutput{std::string(question), value};
}

std::vector<std::vector<std::string>> BridgeStudent::sample(const std::vector<std::string>& prompts, int n,
                                                            double temperature, int max_tokens,
                                                            std::uint64_t seed) {
  ojson p{{"prompts", prompts}, {"n", n}, {"temperature", temperature}, {"max_tokens", max_tokens}, {"seed", seed}};
  const auto r = parse_object(client_.call(BridgeCommand::sample, p.dump()), "payload");
  return field(r, "completions", [](const ojson& v) { return v.get<std::vector<std::vector<std::string>>>(); });
}

double BridgeStudent::greedy_eval(std::span<const Task> questions) {
  ojson list = ojson::array();
  for (const auto& t : questions)
    list.push_back({{"question", render_question(t)}, {"answer", render_answer(t.answer)}, {"task", task_to_ojson(t)}});
  const auto r = parse_object(client_.call(BridgeCommand::greedy_eval, ojson{{"questions", list}}.dump()), "payload");
  return field(r, "accuracy", [](const ojson& v) { return v.get<double>(); });
}

void BridgeStudent::rl_update(std::span<const QAPair> items, int steps, std::uint64_t seed) {
  ojson list = ojson::array();
  for (const auto& qa : items)
    list.push_back({{"question", render_question(qa.task)},
                    {"answer", render_answer(qa.proposed_answer)},
                    {"task", task_to_ojson(qa.task)},
                    {"proposed_answer", qa.proposed_answer}});
  client_.call(BridgeCommand::rl_update, ojson{{"items", list}, {"steps", steps}, {"seed", seed}}.dump());
}

std::string BridgeStudent::snapshot() {
  const auto r = parse_object(client_.call(BridgeCommand::snapshot, "{}"), "payload");
  return field(r, "token", [](const ojson& v) { return v.get<std::string>(); });
}

void BridgeStudent::restore(const std::string& token) {
  client_.call(BridgeCommand::restore, ojson{{"token", token}}.dump());
}

void serve_bridge(std::istream& in, std::ostream& out, BridgeHandler& handler) {
  std::int64_t last_id = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.empty()) continue;
    BridgeResponse response;
    try {
      const auto request = decode_request(line);
      response.id = request.id;
      if (request.id <= last_id)
        throw BridgeError("bad_request", "id " + std::to_string(request.id) + " is not increasing");
      last_id = request.id;
      response.payload = handler.handle(request.cmd, request.payload);
      response.ok = true;
    } catch (const BridgeError& e) {
      response.ok = false;
      response.error_code = e.code();
      const std::string what = e.what();
      response.error_message = what.substr(std::min(what.size(), e.code().size() + 2));
    } catch (const std::exception& e) {
      response.ok = false;
      response.error_code = "internal";
      response.error_message = e.what();
    }
    out << encode_response(response) << '\n';
    out.flush();
  }
}

ToyBridgeWorker::ToyBridgeWorker(EnvProfile env, InnerLoopConfig inner)
    : env_(std::move(env)), inner_(inner), current_(StudentState::fresh(env_)) {}

std::string ToyBridgeWorker::handle(BridgeCommand cmd, const std::string& payload) {
  const auto p = parse_object(payload, "payload");
  switch (cmd) {
    case BridgeCommand::sample: {
      const auto prompts = field(p, "prompts", [](const ojson& v) { return v.get<std::vector<std::string>>(); });
      const int n = field(p, "n", [](const ojson& v) { return v.get<int>(); });
      const auto seed = field(p, "seed", [](const ojson& v) { return v.get<std::uint64_t>(); });
      if (n < 1) throw BridgeError("bad_request", "n must be positive");
      ojson completions = ojson::array();
      for (std::size_t i = 0; i < prompts.size(); ++i) {
        ojson row = ojson::array();
        for (int c = 0; c < n; ++c) {
          Rng rng = make_rng(derive_seed(seed, {i, static_cast<std::uint64_t>(c)}));
          const auto a = static_cast<int>(uniform_index(rng, static_cast<std::size_t>(env_.alphabet)));
          row.push_back("<question>" + prompts[i] + "</question><answer>" + render_answer(a) + "</answer>");
        }
        completions.push_back(std::move(row));
      }
      return ojson{{"completions", completions}}.dump();
    }
    case BridgeCommand::greedy_eval: {
      const auto qs = field(p, "questions", [](const ojson& v) { return v; });
      if (!qs.is_array() || qs.empty()) throw BridgeError("bad_request", "questions must be a nonempty array");
      std::vector<Task> tasks;
      for (const auto& q : qs) tasks.push_back(task_from_ojson(field(q, "task", [](const ojson& v) { return v; })));
      return ojson{{"accuracy", greedy_accuracy(current_, tasks)}}.dump();
    }
    case BridgeCommand::rl_update: {
      const auto items = field(p, "items", [](const ojson& v) { return v; });
      const int steps = field(p, "steps", [](const ojson& v) { return v.get<int>(); });
      const auto seed = field(p, "seed", [](const ojson& v) { return v.get<std::uint64_t>(); });
      if (!items.is_array() || items.empty()) throw BridgeError("bad_request", "items must be a nonempty array");
      if (steps < 1) throw BridgeError("bad_request", "steps must be positive");
      std::vector<QAPair> pairs;
      for (const auto& it : items) {
        QAPair qa;
        qa.task = task_from_ojson(field(it, "task", [](const ojson& v) { return v; }));
        qa.proposed_answer = field(it, "proposed_answer", [](const ojson& v) { return v.get<int>(); });
        pairs.push_back(std::move(qa));
      }
      current_ = rl_update_student_steps(current_, pairs, inner_, env_, steps, seed);
      return ojson{{"steps_run", steps}}.dump();
    }
    case BridgeCommand::snapshot: {
      auto token = "ckpt-" + std::to_string(++minted_);
      snapshots_.emplace(token, current_);
      return ojson{{"token", token}}.dump();
    }
    case BridgeCommand::restore: {
      const auto token = field(p, "token", [](const ojson& v) { return v.get<std::string>(); });
      const auto it = snapshots_.find(token);
      if (it == snapshots_.end()) throw BridgeError("unknown_token", "no checkpoint named " + token);
      current_ = it->second;
      return "{}";
    }
  }
  throw BridgeError("bad_request", "unhandled command");
}

BridgeStepResult run_outer_step_bridge(TeacherState teacher, BridgeLedger ledger, const EnvProfile& env,
                                       std::span<const Task> train_tasks, const OuterLoopConfig& cfg,
                                       const InnerLoopConfig& inner, int step, std::uint64_t run_seed,
                                       BridgeStudent& student) {
  expects(!train_tasks.empty(), "run_outer_step_bridge: empty training set");
  if (cfg.reward != TeacherReward::grounded)
    throw ConfigError("the bridge backend supports the grounded teacher reward only");
  auto batch = generate_step_candidates(teacher, env, cfg, step, run_seed);
  const auto g = static_cast<std::size_t>(cfg.group_size);
  const auto r = static_cast<std::size_t>(cfg.repeats);
  std::vector<double> rewards(g, 0.0);
  std::vector<std::vector<double>> repeat_rewards(g, std::vector<double>(r, 0.0));
  std::vector<std::vector<std::string>> students(g, std::vector<std::string>(r));

  const auto questions = step_reward_questions(train_tasks, cfg, step, run_seed);
  student.restore(ledger.baseline);
  const double before = student.greedy_eval(questions);
  for (std::size_t k = 0; k < g; ++k) {
    for (std::size_t j = 0; j < r; ++j) {
      student.restore(ledger.baseline);
      student.rl_update(batch.datasets[k].items, inner.steps_for_stage(ledger.stage),
                        inner_run_seed(run_seed, step, k, j));
      repeat_rewards[k][j] = student.greedy_eval(questions) - before;
      students[k][j] = student.snapshot();
    }
    rewards[k] = mean(repeat_rewards[k]);
  }
  auto report = conclude_outer_step(teacher, ledger, env, batch, rewards, repeat_rewards, students, cfg, step);
  return {std::move(teacher), std::move(ledger), std::move(report)};
}

}  // namespace soar
