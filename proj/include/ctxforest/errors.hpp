#pragma once

#include <stdexcept>
#include <string>

namespace ctxforest {

// Error codes cover every failure the public surface can report. The C API
// exposes the same values as integers (see include/ctxforest.h); keep the
// two lists in sync.
enum class Err : int {
  Ok = 0,

  // forest structure
  UnknownTree = 1,
  UnknownParent = 2,
  CrossTreeParent = 3,
  NonRootWithoutParent = 4,
  UnknownNode = 5,
  UnknownBranch = 6,
  MalformedSnapshot = 7,

  // similarity
  DimensionMismatch = 8,
  ZeroVector = 9,
  EmptyTree = 10,

  // summarization
  EmptyContent = 11,
  MissingSummary = 12,

  // policy / decisions
  BackendUnavailable = 13,
  MalformedDecision = 14,
  InvalidAction = 15,
  StalePendingTurn = 16,

  // gateway
  Timeout = 17,
  HttpError = 18,
  ExhaustedRetries = 19,
  DimensionDrift = 20,

  // bench
  ParseError = 21,
  SchemaViolation = 22,
  JudgeUnparsable = 23,
  EmptyInput = 24,
  UnsupportedFormat = 25,
  UnknownStrategy = 26,

  // generic
  InvalidArgument = 27,
  IoError = 28,
  Internal = 29,
};

const char* err_name(Err e);

class Error : public std::runtime_error {
public:
  Error(Err code, const std::string& msg)
      : std::runtime_error(std::string(err_name(code)) + ": " + msg), code_(code) {}

  Err code() const { return code_; }

private:
  Err code_;
};

[[noreturn]] inline void throw_error(Err code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace ctxforest
