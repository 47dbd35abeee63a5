#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace aclear {

enum class ErrorCode {
  // ingestion
  MalformedDocument,
  NoLlmCalls,
  MissingTask,
  InvalidGroundTruth,
  EmptyRecords,
  UnknownAdapter,
  EmptyCorpus,
  // judging
  TransportError,
  AuthError,
  ContextOverflow,
  UnparseableVerdict,
  ScoreOutOfRange,
  EmptyRubrics,
  PipelineError,
  // aggregation
  DegenerateClustering,
  // analytics
  MissingMode,
  DegenerateLabels,
  LengthMismatch,
  NoGroundTruth,
  // bundle, config, serving
  ConfigParse,
  ConfigInvalid,
  IoError,
  ReferenceError,
  VersionMismatch,
  CorruptBundle,
  BindError,
  PreconditionViolation,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so that
/// callers (CLI, server, tests) can branch on it without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace aclear
