#include "tabxfer/error.hpp"

namespace tabxfer {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingTargetColumn: return "MissingTargetColumn";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::EmptyTable: return "EmptyTable";
    case ErrorCode::UnparseableCell: return "UnparseableCell";
    case ErrorCode::DuplicateCardId: return "DuplicateCardId";
    case ErrorCode::InvalidCard: return "InvalidCard";
    case ErrorCode::InfeasibleSplit: return "InfeasibleSplit";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::AdapterFailure: return "AdapterFailure";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::NoFeasibleMapping: return "NoFeasibleMapping";
    case ErrorCode::NumericalUnderflow: return "NumericalUnderflow";
    case ErrorCode::EmptyWeightedBatch: return "EmptyWeightedBatch";
    case ErrorCode::LabelSpaceMismatch: return "LabelSpaceMismatch";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::EmptyLibrary: return "EmptyLibrary";
    case ErrorCode::NoViableCandidate: return "NoViableCandidate";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

StageError::StageError(ErrorCode code, std::string stage, std::string candidate,
                       const std::string& message)
    : Error(code, "stage " + stage +
                      (candidate.empty() ? std::string() : " candidate " + candidate) +
                      ": " + message),
      stage_(std::move(stage)),
      candidate_(std::move(candidate)) {}

void raise(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace tabxfer
