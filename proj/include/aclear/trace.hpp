#pragma once

#include <chrono>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace aclear {

using Json = nlohmann::json;

/// UTC instant with millisecond precision.
using Timestamp = std::chrono::sys_time<std::chrono::milliseconds>;

std::optional<Timestamp> parse_iso8601(std::string_view text);
std::string format_iso8601(Timestamp ts);

/// One LLM call: the input/output pair and the node that emitted it.
struct TraceStep {
  std::size_t step_index = 0;
  std::string node_id;
  std::string input_text;
  std::string output_text;
  std::optional<Timestamp> started_at;
  std::optional<Timestamp> ended_at;
  std::optional<std::string> model_name;
  Json extra = Json::object();

  bool operator==(const TraceStep&) const = default;
};

/// Either a success/failure label or a score in [0,1].
using GroundTruth = std::variant<bool, double>;

/// Maps a ground truth to {0,1}; numeric scores are split at `threshold`
/// (score >= threshold counts as success).
int binary_label(const GroundTruth& gt, double threshold = 0.5);

struct Trace {
  std::string trace_id;
  std::string task_text;
  std::vector<TraceStep> steps;
  std::optional<GroundTruth> ground_truth;
  std::string source;
  Json extra = Json::object();

  bool operator==(const Trace&) const = default;
};

/// An immutable, validated collection of traces with distinct ids.
class TraceCorpus {
 public:
  TraceCorpus() = default;
  /// Throws Error(PreconditionViolation) on duplicate trace ids.
  TraceCorpus(std::string corpus_id, std::vector<Trace> traces);

  const std::string& corpus_id() const noexcept { return corpus_id_; }
  const std::vector<Trace>& traces() const noexcept { return traces_; }
  const std::set<std::string>& node_catalog() const noexcept { return node_catalog_; }
  bool has_ground_truth() const noexcept { return has_ground_truth_; }
  std::size_t size() const noexcept { return traces_.size(); }
  bool empty() const noexcept { return traces_.empty(); }
  std::size_t total_steps() const noexcept { return total_steps_; }

  const Trace* find(std::string_view trace_id) const;

  bool operator==(const TraceCorpus&) const = default;

 private:
  std::string corpus_id_;
  std::vector<Trace> traces_;
  std::set<std::string> node_catalog_;
  bool has_ground_truth_ = false;
  std::size_t total_steps_ = 0;
};

struct ValidationIssue {
  std::string code;
  std::string message;
  std::optional<std::size_t> step_index;
};

struct ValidationReport {
  std::string trace_id;
  std::vector<ValidationIssue> errors;
  std::vector<ValidationIssue> warnings;

  bool ok() const noexcept { return errors.empty(); }
};

void to_json(Json& j, const TraceStep& step);
void from_json(const Json& j, TraceStep& step);
void to_json(Json& j, const Trace& trace);
void from_json(const Json& j, Trace& trace);
void to_json(Json& j, const ValidationReport& report);

}  // namespace aclear
