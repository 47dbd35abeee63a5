#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aclear/llm_client.hpp"
#include "aclear/trace.hpp"

namespace aclear {

/// Prompt templates for the four judge modes. Placeholders: {task}, {input},
/// {output}, {trace}, {rubrics}, {dimensions}. In step mode {trace} carries the
/// digest of the preceding steps.
struct PromptSet {
  std::string step;
  std::string trace;
  std::string rubric_gen;
  std::string rubric_verify;

  static PromptSet defaults();
};

struct JudgeConfig {
  std::string model_name;
  std::string endpoint;
  PromptSet prompts = PromptSet::defaults();
  std::vector<std::string> step_dimensions = {"correctness", "completeness", "clarity"};
  std::vector<std::string> trace_dimensions = {"execution quality", "final deliverable"};
  std::size_t max_parallel = 4;
  int max_retries = 3;
  double temperature = 0.0;
  std::optional<std::filesystem::path> cache_dir;
  /// Rough prompt budget; rendered traces above it are middle-elided.
  std::size_t context_budget_chars = 48000;
  /// Characters of the previous step's output kept in the step digest.
  std::size_t step_context_chars = 600;
  std::size_t max_rubrics = 12;

  /// Throws Error(ConfigInvalid) listing every violated field.
  void validate() const;
};

struct StepCritique {
  std::string trace_id;
  std::size_t step_index = 0;
  std::string node_id;
  std::string justification;
  double score = 0.0;
  std::map<std::string, double> dimension_scores;
  std::string raw_response;

  bool operator==(const StepCritique&) const = default;
};

struct TraceCritique {
  std::string trace_id;
  std::string justification;
  double score = 0.0;
  std::map<std::string, double> dimension_scores;
  std::string raw_response;

  bool operator==(const TraceCritique&) const = default;
};

struct Rubric {
  std::string rubric_id;
  std::string criterion_text;

  bool operator==(const Rubric&) const = default;
};

struct RubricSet {
  std::string trace_id;
  std::vector<Rubric> rubrics;
  std::string generated_by;

  bool operator==(const RubricSet&) const = default;
};

struct RubricVerdict {
  std::string rubric_id;
  bool fulfilled = false;
  std::string reasoning;

  bool operator==(const RubricVerdict&) const = default;
};

struct RubricVerdicts {
  std::string trace_id;
  std::vector<RubricVerdict> verdicts;
  double fraction_fulfilled = 0.0;
  std::vector<std::string> warnings;

  bool operator==(const RubricVerdicts&) const = default;
};

/// A judge call that failed; the record keeps going without it.
struct EvaluationGap {
  std::string mode;
  std::optional<std::size_t> step_index;
  std::string error_code;
  std::string message;

  bool operator==(const EvaluationGap&) const = default;
};

struct EvaluationTiming {
  std::optional<Timestamp> started_at;
  std::int64_t elapsed_ms = 0;
  std::size_t judge_calls = 0;

  bool operator==(const EvaluationTiming&) const = default;
};

struct TraceEvaluationRecord {
  std::string trace_id;
  std::vector<StepCritique> step_critiques;
  std::optional<TraceCritique> trace_critique;
  std::optional<RubricSet> rubric_set;
  std::optional<RubricVerdicts> rubric_verdicts;
  std::string judge_model;
  std::vector<EvaluationGap> gaps;
  EvaluationTiming timing;

  bool operator==(const TraceEvaluationRecord&) const = default;
};

// ---------------------------------------------------------------------------
// Response parsing

struct ScoredResponse {
  std::string justification;
  int score = 0;
  /// Raw 1..10 values for dimensions found in the response.
  std::map<std::string, int> dimension_scores;
};

struct VerdictResponse {
  std::string justification;
  bool fulfilled = false;
};

/// Reads "<justification>\nScore: N". The last labeled score line wins and
/// the justification is everything before it (minus a leading
/// "Justification:" label). Dimension lines "- <name>: N" are picked up for
/// the names given.
ScoredResponse parse_judge_response(std::string_view raw, std::span<const std::string> dimensions = {});

/// Reads "<reasoning>\nVerdict: YES|NO". The last verdict line wins.
VerdictResponse parse_verdict_response(std::string_view raw);

/// Splits a batched verification answer into per-rubric sections keyed by
/// the "[R<k>]" header lines.
std::map<std::string, std::string> split_verdict_sections(std::string_view raw);

/// Numbered criteria ("1. ...", "Rubric 2: ...") in order, duplicates dropped.
std::vector<std::string> parse_rubric_list(std::string_view raw);

/// Maps the 1..10 judge scale onto [0,1]: (s - 1) / 9.
double normalize_score(int raw);

// ---------------------------------------------------------------------------
// Prompt rendering

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values);

/// Keeps the head and tail of `text`, replacing the middle with a marker, so
/// the result is at most about `max_chars` long.
std::string middle_truncate(std::string_view text, std::size_t max_chars);

/// Node sequence of the steps before `step_index` plus the truncated output
/// of the immediately preceding step.
std::string step_context_digest(const Trace& trace, std::size_t step_index, std::size_t max_output_chars);

inline constexpr std::string_view kElisionMarker = "[... intermediate steps elided ...]";

/// Renders all steps; when over `budget_chars`, drops steps from the middle
/// (always keeping the first and last) and inserts kElisionMarker.
std::string render_trace(const Trace& trace, std::size_t budget_chars);

std::string render_rubrics(const RubricSet& rubrics);

// ---------------------------------------------------------------------------
// Judges

/// The four judge modes. Implementations must be thread-safe.
class Judge {
 public:
  virtual ~Judge() = default;

  virtual std::string identity() const = 0;
  virtual StepCritique evaluate_step(const Trace& trace, std::size_t step_index) = 0;
  virtual TraceCritique evaluate_trace(const Trace& trace) = 0;
  virtual RubricSet generate_rubrics(const std::string& trace_id, const std::string& task_text) = 0;
  virtual RubricVerdicts verify_rubrics(const Trace& trace, const RubricSet& rubrics) = 0;
};

/// Prompt-driven judge over any CompletionClient.
class LlmJudge : public Judge {
 public:
  LlmJudge(JudgeConfig config, std::shared_ptr<CompletionClient> client);

  std::string identity() const override;
  StepCritique evaluate_step(const Trace& trace, std::size_t step_index) override;
  TraceCritique evaluate_trace(const Trace& trace) override;
  RubricSet generate_rubrics(const std::string& trace_id, const std::string& task_text) override;
  RubricVerdicts verify_rubrics(const Trace& trace, const RubricSet& rubrics) override;

  /// Lower-level form: the caller supplies the prior-steps digest.
  StepCritique evaluate_step(const std::string& trace_id, const std::string& task_text, const TraceStep& step,
                             const std::string& context);

  /// Prompt sent for trace mode at the configured budget.
  std::string trace_prompt(const Trace& trace, std::size_t budget_chars) const;

  const JudgeConfig& config() const noexcept { return config_; }

 private:
  std::string call(const std::string& prompt);

  JudgeConfig config_;
  std::shared_ptr<CompletionClient> client_;
};

/// One keyword trigger of the mock judge.
struct StepRule {
  std::string marker;
  int raw_score = 1;
  std::string issue;
};

/// Deterministic keyword rulebook used for offline runs and tests.
///
/// Step: every rule whose marker occurs in the step output contributes its
/// issue; the score is the lowest raw score among them (clean_step_score
/// when nothing fires). Trace: completion_marker in the last step output
/// scores 10, anything else scores 2 with a fixed list of findings.
/// Rubrics: canned lists by exact task text, otherwise the task split into
/// clauses. Verification: a criterion is fulfilled iff its text appears
/// verbatim in some step output.
struct MockRulebook {
  std::vector<StepRule> step_rules = {
      {"ERROR", 1, "unhandled ERROR in step output"},
      {"MALFORMED", 3, "produced malformed JSON output"},
      {"REPEAT", 4, "repeated an identical tool call"},
  };
  int clean_step_score = 9;
  std::string clean_step_justification = "Step output addresses its input without visible problems.";
  std::string completion_marker = "TASK COMPLETE";
  std::map<std::string, std::vector<std::string>> canned_rubrics = {
      {"T1", {"locate the target record", "apply the requested change", "report the final result"}},
  };
};

class MockJudge : public Judge {
 public:
  explicit MockJudge(MockRulebook rulebook = {}, std::vector<std::string> step_dimensions = {"correctness", "completeness", "clarity"},
                     std::vector<std::string> trace_dimensions = {"execution quality", "final deliverable"},
                     std::size_t max_rubrics = 12);

  std::string identity() const override { return "mock:rulebook-v1"; }
  StepCritique evaluate_step(const Trace& trace, std::size_t step_index) override;
  TraceCritique evaluate_trace(const Trace& trace) override;
  RubricSet generate_rubrics(const std::string& trace_id, const std::string& task_text) override;
  RubricVerdicts verify_rubrics(const Trace& trace, const RubricSet& rubrics) override;

 private:
  MockRulebook rules_;
  std::vector<std::string> step_dimensions_;
  std::vector<std::string> trace_dimensions_;
  std::size_t max_rubrics_;
};

// ---------------------------------------------------------------------------
// Corpus evaluation

struct JudgeModes {
  bool step = true;
  bool trace = true;
  bool rubric = true;

  bool any() const noexcept { return step || trace || rubric; }
};

struct EvaluationOptions {
  JudgeModes modes;
  std::size_t max_parallel = 4;
  bool record_timing = true;
  std::function<void(std::size_t done, std::size_t total)> progress;
};

struct TraceFailure {
  std::string trace_id;
  std::string message;
};

struct CorpusEvaluation {
  /// One record per successfully evaluated trace, in corpus order.
  std::vector<TraceEvaluationRecord> records;
  std::vector<TraceFailure> failures;
};

/// Runs every enabled mode over every trace. Individual judge calls that fail
/// become gaps in their record; a trace whose every call failed is reported
/// in `failures` and skipped. Throws Error(PipelineError) when all traces fail.
CorpusEvaluation evaluate_corpus(const TraceCorpus& corpus, Judge& judge, const EvaluationOptions& options);

void to_json(Json& j, const StepCritique& c);
void from_json(const Json& j, StepCritique& c);
void to_json(Json& j, const TraceCritique& c);
void from_json(const Json& j, TraceCritique& c);
void to_json(Json& j, const RubricSet& r);
void from_json(const Json& j, RubricSet& r);
void to_json(Json& j, const RubricVerdicts& v);
void from_json(const Json& j, RubricVerdicts& v);
void to_json(Json& j, const TraceEvaluationRecord& r);
void from_json(const Json& j, TraceEvaluationRecord& r);

}  // namespace aclear
