#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tabxfer {

enum class ErrorCode {
  MissingTargetColumn,
  MissingColumn,
  EmptyTable,
  UnparseableCell,
  DuplicateCardId,
  InvalidCard,
  InfeasibleSplit,
  DimensionMismatch,
  EmptyIndex,
  AdapterFailure,
  NonFiniteInput,
  SizeMismatch,
  NoFeasibleMapping,
  NumericalUnderflow,
  EmptyWeightedBatch,
  LabelSpaceMismatch,
  DivergedLoss,
  EmptyLibrary,
  NoViableCandidate,
  NotFound,
  InvalidConfig,
  InvalidArgument,
  Io,
};

std::string_view error_code_name(ErrorCode code);

// Every failure the library reports carries a stable code so the CLI can
// print a machine-parseable line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Wraps a failure with the pipeline stage and candidate it happened in.
class StageError : public Error {
 public:
  StageError(ErrorCode code, std::string stage, std::string candidate,
             const std::string& message);

  const std::string& stage() const noexcept { return stage_; }
  const std::string& candidate() const noexcept { return candidate_; }

 private:
  std::string stage_;
  std::string candidate_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

}  // namespace tabxfer
