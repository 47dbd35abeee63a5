#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "aclear/bundle.hpp"
#include "aclear/config.hpp"
#include "aclear/llm_client.hpp"

namespace aclear {

struct RunOptions {
  /// Manifest timestamp; defaults to now.
  std::optional<Timestamp> created_at;
  /// Off for reproducible bundles.
  bool record_timing = true;
  /// Replaces the HTTP client of the llm backends (tests, alternative transports).
  std::shared_ptr<CompletionClient> client;
  std::function<void(std::string_view stage, std::size_t done, std::size_t total)> progress;
};

/// "aclear-results-<corpus_id>.zip"
std::string bundle_file_name(std::string_view corpus_id);

/// load_corpus, evaluate_corpus, aggregate and analytics, without writing.
EvaluationBundle build_bundle(const PipelineConfig& config, const RunOptions& options = {});

struct RunResult {
  std::filesystem::path bundle_path;
  EvaluationBundle bundle;
};

/// build_bundle, then write_bundle into config.output_path.
RunResult run_pipeline(const PipelineConfig& config, const RunOptions& options = {});

}  // namespace aclear
