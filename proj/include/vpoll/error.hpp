#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vpoll {

enum class Errc {
  // data
  MalformedRow,
  CodeOutOfRange,
  DuplicateRespondentId,
  UnknownQuestion,
  UnresolvableCode,
  Io,
  // backend
  BackendUnreachable,
  AuthMissing,
  ReplayMiss,
  // numerics / statistics
  Unparseable,
  NonConvergence,
  LengthMismatch,
  WeightOutOfRange,
  NoUsableQuestions,
  StateSetMismatch,
  MissingParty,
  AllMissing,
  InsufficientData,
  ZeroVariance,
  EmptyPool,
  NoVotes,
  MissingState,
  ExactTie,
  CycleMismatch,
  OverlapError,
  // configuration
  InvalidConfig,
  Locked,
};

std::string_view errc_name(Errc code) noexcept;

/// Process exit code for an error class: 2 validation, 3 backend, 4 data.
int exit_code_for(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Wraps a module error with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& inner)
      : Error(inner.code(), "[" + stage + "] " + strip_code(inner)), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  static std::string strip_code(const Error& e) {
    std::string msg = e.what();
    const std::string prefix = std::string(errc_name(e.code())) + ": ";
    if (msg.rfind(prefix, 0) == 0) msg.erase(0, prefix.size());
    return msg;
  }

  std::string stage_;
};

}  // namespace vpoll
