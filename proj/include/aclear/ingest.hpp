#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "aclear/trace.hpp"

namespace aclear {

struct IngestOptions {
  /// Trace-level metadata key holding the success label or score.
  std::string ground_truth_key = "success";
  /// Observation metadata keys consulted, in order, for the emitting node.
  std::vector<std::string> agent_attribute_keys = {"agent", "agent_name", "langgraph_node", "node",
                                                   "component"};
  std::size_t max_parallel = 4;
};

/// Parses one LangFuse trace export (a trace object with an `observations`
/// array, or `{"trace": {...}, "observations": [...]}`). Only GENERATION
/// observations become steps; every other observation is kept verbatim under
/// `extra["observations"]`.
Trace parse_langfuse_export(const Json& document, const IngestOptions& options = {});
Trace parse_langfuse_export(std::string_view text, const IngestOptions& options = {});

/// Flattens a chat payload (string, message list, or message object) into
/// role-prefixed lines.
std::string flatten_messages(const Json& payload);

struct GenericRecord {
  std::string node_id;
  std::string input_text;
  std::string output_text;
  Json metadata = Json::object();
};

Trace convert_generic(std::string trace_id, std::string task_text, const std::vector<GenericRecord>& records,
                      std::optional<GroundTruth> ground_truth = std::nullopt);

/// File form of the generic adapter:
/// `{"trace_id", "task", "ground_truth"?, "metadata"?, "records": [{"node_id", "input", "output", "metadata"?}]}`
Trace parse_generic_document(const Json& document, const IngestOptions& options = {});

ValidationReport validate_trace(const Trace& trace);

using TraceAdapter = std::function<Trace(const Json& document, const IngestOptions& options)>;

/// Registers a parser under `name` for use by load_corpus. "langfuse" and
/// "generic" are always present.
void register_adapter(std::string name, TraceAdapter adapter);
std::vector<std::string> registered_adapters();

struct LoadFailure {
  std::string file;
  std::string code;
  std::string message;
};

struct LoadSummary {
  std::size_t files_seen = 0;
  std::size_t traces_loaded = 0;
  std::vector<LoadFailure> failures;
  std::vector<ValidationReport> warnings;
};

struct LoadResult {
  TraceCorpus corpus;
  LoadSummary summary;
};

/// Loads every `*.json` document under `path` (recursively) or every JSON
/// member of a `.zip` archive. Unparseable or invalid documents are recorded
/// in the summary and skipped. Traces are ordered by trace_id.
LoadResult load_corpus(const std::filesystem::path& path, std::string_view adapter,
                       const IngestOptions& options = {});

struct StepRef {
  std::string trace_id;
  std::size_t step_index = 0;

  auto operator<=>(const StepRef&) const = default;
};

std::map<std::string, std::vector<StepRef>> group_steps_by_node(const TraceCorpus& corpus);

void to_json(Json& j, const LoadSummary& summary);

}  // namespace aclear
