#pragma once

#include <stdexcept>
#include <string>

namespace burstfuse {

// Exit-code contract for the CLI: 0 success, 1 usage, 2 I/O, 3 invariant.
enum class ExitCode : int {
    ok = 0,
    usage = 1,
    io = 2,
    invariant = 3,
};

class Error : public std::runtime_error {
  public:
    Error(ExitCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
    ExitCode code() const { return code_; }

  private:
    ExitCode code_;
};

// Bad flags, bad config keys, out-of-range CLI values.
class UsageError : public Error {
  public:
    explicit UsageError(const std::string& msg) : Error(ExitCode::usage, msg) {}
};

// Missing/unreadable/unparseable files, unsupported file encodings.
class IoError : public Error {
  public:
    explicit IoError(const std::string& msg) : Error(ExitCode::io, msg) {}
};

// Well-formed input that violates a domain rule (odd frame dimensions,
// mismatched burst shapes, zoom out of range, ...).
class InvariantError : public Error {
  public:
    explicit InvariantError(const std::string& msg) : Error(ExitCode::invariant, msg) {}
};

}  // namespace burstfuse
