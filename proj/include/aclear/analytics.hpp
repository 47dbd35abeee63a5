#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "aclear/insights.hpp"
#include "aclear/judge.hpp"
#include "aclear/trace.hpp"

namespace aclear {

enum class PredictionMethod { Trace, Rubric, Stepwise };

std::string to_string(PredictionMethod method);
PredictionMethod prediction_method_from_string(std::string_view name);
inline constexpr std::array<PredictionMethod, 3> kAllMethods = {PredictionMethod::Stepwise, PredictionMethod::Trace,
                                                                  PredictionMethod::Rubric};

struct ScorePrediction {
  std::string trace_id;
  PredictionMethod method = PredictionMethod::Trace;
  double score = 0.0;

  bool operator==(const ScorePrediction&) const = default;
};

/// trace: the trace critique score; rubric: fraction of rubrics fulfilled;
/// stepwise: mean step score. Throws MissingMode when the record lacks the
/// needed critiques.
ScorePrediction predict_trace_score(const TraceEvaluationRecord& record, PredictionMethod method);

/// Mann-Whitney AUC; tied (positive, negative) pairs count one half.
/// Labels must be 0 or 1.
double compute_auc(std::span<const double> scores, std::span<const int> labels);

struct ReliabilityReport {
  /// Keyed by method name; only methods predicted on every labeled trace.
  std::map<std::string, double> auc;
  std::size_t n_traces = 0;
  std::size_t n_positive = 0;
  double threshold = 0.5;
  std::vector<ScorePrediction> predictions;
  std::vector<std::string> notes;

  bool operator==(const ReliabilityReport&) const = default;
};

/// Numeric ground truth is binarized at `threshold`.
ReliabilityReport judge_reliability_report(const std::vector<TraceEvaluationRecord>& records,
                                           const TraceCorpus& corpus, double threshold = 0.5);

struct TopologyNode {
  std::string node_id;
  std::size_t step_count = 0;

  bool operator==(const TopologyNode&) const = default;
};

struct TopologyEdge {
  std::string from;
  std::string to;
  std::size_t transition_count = 0;

  bool operator==(const TopologyEdge&) const = default;
};

struct TopologyGraph {
  std::vector<TopologyNode> nodes;
  /// Sorted by (from, to).
  std::vector<TopologyEdge> edges;
  std::map<std::string, std::size_t> entry_counts;
  std::map<std::string, std::size_t> exit_counts;

  bool operator==(const TopologyGraph&) const = default;
};

/// Edges count adjacent steps within a trace; traces never connect.
TopologyGraph build_topology(const TraceCorpus& corpus);

inline constexpr std::size_t kHistogramBins = 10;

struct NodeStats {
  std::string node_id;
  std::size_t step_count = 0;
  std::size_t scored_steps = 0;
  std::optional<double> mean_score;
  std::optional<double> min_score;
  std::optional<double> max_score;
  std::array<std::size_t, kHistogramBins> histogram{};
  std::map<std::string, std::size_t> issue_counts;
  /// Mean step score on traces labeled successful / failed, when labels exist.
  std::optional<double> mean_score_success;
  std::optional<double> mean_score_failure;

  bool operator==(const NodeStats&) const = default;
};

/// Bin of a unit-interval score; the last bin is closed on the right.
std::size_t histogram_bin(double score);

std::map<std::string, NodeStats> node_usage_stats(const TraceCorpus& corpus,
                                                  const std::vector<TraceEvaluationRecord>& records,
                                                  const std::map<std::string, InsightSet>& node_insights,
                                                  double threshold = 0.5);

/// Corpus-wide means of the three prediction methods, over the records that
/// support each.
struct GlobalScores {
  std::optional<double> mean_trace_score;
  std::optional<double> mean_step_score;
  std::optional<double> mean_rubric_fraction;
  std::size_t evaluated_traces = 0;

  bool operator==(const GlobalScores&) const = default;
};

GlobalScores global_scores(const std::vector<TraceEvaluationRecord>& records);

void to_json(Json& j, const ReliabilityReport& r);
void from_json(const Json& j, ReliabilityReport& r);
void to_json(Json& j, const TopologyGraph& g);
void from_json(const Json& j, TopologyGraph& g);
void to_json(Json& j, const NodeStats& s);
void from_json(const Json& j, NodeStats& s);
void to_json(Json& j, const GlobalScores& s);

}  // namespace aclear
