#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "aclear/insights.hpp"
#include "aclear/judge.hpp"
#include "aclear/trace.hpp"

namespace aclear {

enum class JudgeBackend { Llm, Mock };

struct PipelineConfig {
  struct Input {
    std::filesystem::path path;
    std::string adapter = "langfuse";
  };
  struct Serve {
    std::string bind_address = "127.0.0.1";
    int port = 8080;
  };

  Input input;
  JudgeBackend judge_backend = JudgeBackend::Llm;
  JudgeConfig judge;
  JudgeModes modes;
  AggregatorConfig aggregator;
  std::string ground_truth_key = "success";
  /// Numeric ground truth at or above this counts as success.
  double ground_truth_threshold = 0.5;
  std::filesystem::path output_path = ".";
  Serve serve;

  /// The document as written, for the bundle manifest.
  Json snapshot = Json::object();

  /// Throws Error(ConfigInvalid) listing every violated field.
  void validate() const;
};

/// Parses YAML text. Relative paths resolve against `base_dir`. Throws
/// Error(ConfigParse) for malformed YAML and Error(ConfigInvalid) for unknown
/// keys, wrong types or failed validation.
PipelineConfig parse_config(std::string_view yaml, const std::filesystem::path& base_dir);

PipelineConfig load_config(const std::filesystem::path& path);

/// YAML to JSON with plain scalars typed as null, bool, integer, float or string.
Json yaml_to_json(std::string_view yaml);

}  // namespace aclear
