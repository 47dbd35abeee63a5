#include "aclear/error.hpp"

namespace aclear {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedDocument: return "MalformedDocument";
    case ErrorCode::NoLlmCalls: return "NoLlmCalls";
    case ErrorCode::MissingTask: return "MissingTask";
    case ErrorCode::InvalidGroundTruth: return "InvalidGroundTruth";
    case ErrorCode::EmptyRecords: return "EmptyRecords";
    case ErrorCode::UnknownAdapter: return "UnknownAdapter";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::TransportError: return "TransportError";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::UnparseableVerdict: return "UnparseableVerdict";
    case ErrorCode::ScoreOutOfRange: return "ScoreOutOfRange";
    case ErrorCode::EmptyRubrics: return "EmptyRubrics";
    case ErrorCode::PipelineError: return "PipelineError";
    case ErrorCode::DegenerateClustering: return "DegenerateClustering";
    case ErrorCode::MissingMode: return "MissingMode";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NoGroundTruth: return "NoGroundTruth";
    case ErrorCode::ConfigParse: return "ConfigParse";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ReferenceError: return "ReferenceError";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptBundle: return "CorruptBundle";
    case ErrorCode::BindError: return "BindError";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
  }
  return "Unknown";
}

}  // namespace aclear
