#pragma once

#include <string>
#include <sys/types.h>

#include "soar/bridge.hpp"

namespace soar {

/// Runs `command` through /bin/sh -c and talks to it over its stdin/stdout.
/// The child's stderr is inherited. Closing stdin on destruction lets the
/// worker exit; the destructor then reaps it.
class SubprocessTransport : public LineTransport {
 public:
  explicit SubprocessTransport(const std::string& command);
  ~SubprocessTransport() override;
  SubprocessTransport(const SubprocessTransport&) = delete;
  SubprocessTransport& operator=(const SubprocessTransport&) = delete;

  void write_line(std::string_view line) override;
  std::string read_line() override;

 private:
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace soar
