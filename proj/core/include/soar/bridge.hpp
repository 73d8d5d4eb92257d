#pragma once

// Line-delimited JSON protocol ("v1") between the orchestrator and an external
// student worker. Requests carry strictly increasing ids and each one gets
// exactly one response echoing its id.
//
//   {"protocol":"v1","id":3,"cmd":"greedy_eval","payload":{...}}
//   {"protocol":"v1","id":3,"status":"ok","payload":{"accuracy":0.25}}
//   {"protocol":"v1","id":4,"status":"error","error":{"code":"bad_request","message":"..."}}

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "soar/env.hpp"
#include "soar/inner_loop.hpp"
#include "soar/outer_loop.hpp"

namespace soar {

inline constexpr std::string_view kBridgeProtocol = "v1";

enum class BridgeCommand { sample, greedy_eval, rl_update, snapshot, restore };

std::string to_string(BridgeCommand cmd);
BridgeCommand parse_bridge_command(std::string_view name);  // throws BridgeError("bad_request")

class BridgeError : public std::runtime_error {
 public:
  BridgeError(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

struct BridgeRequest {
  std::int64_t id = 0;
  BridgeCommand cmd = BridgeCommand::snapshot;
  std::string payload = "{}";  // JSON object text
};

struct BridgeResponse {
  std::int64_t id = 0;
  bool ok = true;
  std::string payload = "{}";  // JSON object text, ok responses only
  std::string error_code;
  std::string error_message;
};

std::string encode_request(const BridgeRequest& request);
BridgeRequest decode_request(std::string_view line);
std::string encode_response(const BridgeResponse& response);
BridgeResponse decode_response(std::string_view line);

class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void write_line(std::string_view line) = 0;
  /// Throws BridgeError("transport") at end of stream.
  virtual std::string read_line() = 0;
};

class BridgeClient {
 public:
  explicit BridgeClient(std::unique_ptr<LineTransport> transport);

  /// Sends one request and waits for its response; error responses throw BridgeError.
  std::string call(BridgeCommand cmd, const std::string& payload);
  std::int64_t last_id() const noexcept { return next_id_ - 1; }

 private:
  std::unique_ptr<LineTransport> transport_;
  std::int64_t next_id_ = 1;
};

/// Prompt text of a task as shown to a language-model worker.
std::string render_question(const Task& task);
std::string render_answer(int answer);

struct TeacherOutput {
  std::string question;
  int answer = 0;
};

/// Accepts "<question>..</question> .. <answer>..\boxed{N}..</answer>" with a
/// nonempty question and a boxed nonnegative integer; anything else is nullopt.
std::optional<TeacherOutput> parse_teacher_output(std::string_view text);

/// Typed view of a bridge worker acting as the student.
class BridgeStudent {
 public:
  explicit BridgeStudent(BridgeClient& client) : client_(client) {}

  std::vector<std::vector<std::string>> sample(const std::vector<std::string>& prompts, int n,
                                               double temperature, int max_tokens, std::uint64_t seed);
  double greedy_eval(std::span<const Task> questions);
  void rl_update(std::span<const QAPair> items, int steps, std::uint64_t seed);
  std::string snapshot();
  void restore(const std::string& token);

 private:
  BridgeClient& client_;
};

// Worker side ---------------------------------------------------------------

class BridgeHandler {
 public:
  virtual ~BridgeHandler() = default;
  /// Payload of an ok response; throw BridgeError for an error response.
  virtual std::string handle(BridgeCommand cmd, const std::string& payload) = 0;
};

/// Reads requests line by line until end of input and answers each one.
/// Malformed requests get an error response and the session continues.
void serve_bridge(std::istream& in, std::ostream& out, BridgeHandler& handler);

/// Worker that answers with the built-in simulated student. Checkpoint tokens
/// are "ckpt-<n>" in mint order.
class ToyBridgeWorker : public BridgeHandler {
 public:
  ToyBridgeWorker(EnvProfile env, InnerLoopConfig inner);
  std::string handle(BridgeCommand cmd, const std::string& payload) override;

  const StudentState& current() const noexcept { return current_; }

 private:
  EnvProfile env_;
  InnerLoopConfig inner_;
  StudentState current_;
  std::map<std::string, StudentState> snapshots_;
  int minted_ = 0;
};

using BridgeLedger = BasicPromotionLedger<std::string>;

struct BridgeStepResult {
  TeacherState teacher;
  BridgeLedger ledger;
  StepReport report;
};

/// run_outer_step with the student behind a bridge: the ledger holds checkpoint
/// tokens, and the g*r inner runs execute serially on the one worker.
BridgeStepResult run_outer_step_bridge(TeacherState teacher, BridgeLedger ledger, const EnvProfile& env,
                                       std::span<const Task> train_tasks, const OuterLoopConfig& cfg,
                                       const InnerLoopConfig& inner, int step, std::uint64_t run_seed,
                                       BridgeStudent& student);

}  // namespace soar
