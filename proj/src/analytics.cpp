#include "aclear/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aclear/error.hpp"

namespace aclear {

std::string to_string(PredictionMethod method) {
  switch (method) {
    case PredictionMethod::Trace: return "trace";
    case PredictionMethod::Rubric: return "rubric";
    case PredictionMethod::Stepwise: return "stepwise";
  }
  return "unknown";
}

PredictionMethod prediction_method_from_string(std::string_view name) {
  if (name == "trace") return PredictionMethod::Trace;
  if (name == "rubric") return PredictionMethod::Rubric;
  if (name == "stepwise") return PredictionMethod::Stepwise;
  throw Error(ErrorCode::PreconditionViolation, "unknown prediction method '" + std::string(name) + "'");
}

ScorePrediction predict_trace_score(const TraceEvaluationRecord& record, PredictionMethod method) {
  ScorePrediction p{record.trace_id, method, 0.0};
  switch (method) {
    case PredictionMethod::Trace:
      if (!record.trace_critique)
        throw Error(ErrorCode::MissingMode, "trace " + record.trace_id + " has no trace critique");
      p.score = record.trace_critique->score;
      break;
    case PredictionMethod::Rubric: {
      if (!record.rubric_verdicts || record.rubric_verdicts->verdicts.empty())
        throw Error(ErrorCode::MissingMode, "trace " + record.trace_id + " has no rubric verdicts");
      const auto& v = record.rubric_verdicts->verdicts;
      auto fulfilled = std::count_if(v.begin(), v.end(), [](const RubricVerdict& x) { return x.fulfilled; });
      p.score = static_cast<double>(fulfilled) / static_cast<double>(v.size());
      break;
    }
    case PredictionMethod::Stepwise: {
      if (record.step_critiques.empty())
        throw Error(ErrorCode::MissingMode, "trace " + record.trace_id + " has no step critiques");
      double sum = 0.0;
      for (const auto& c : record.step_critiques) sum += c.score;
      p.score = sum / static_cast<double>(record.step_critiques.size());
      break;
    }
  }
  return p;
}

double compute_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::LengthMismatch,
                std::to_string(scores.size()) + " scores vs " + std::to_string(labels.size()) + " labels");
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != 0 && labels[i] != 1)
      throw Error(ErrorCode::PreconditionViolation, "label " + std::to_string(labels[i]) + " is not 0 or 1");
    if (std::isnan(scores[i])) throw Error(ErrorCode::PreconditionViolation, "score is NaN");
    n_pos += static_cast<std::size_t>(labels[i]);
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw Error(ErrorCode::DegenerateLabels, "AUC needs both classes; got " + std::to_string(n_pos) + " positive, " +
                                                 std::to_string(n_neg) + " negative");

  // Rank formulation with averaged ranks for ties.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
    i = j;
  }
  const double p = static_cast<double>(n_pos);
  const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(n_neg));
}

ReliabilityReport judge_reliability_report(const std::vector<TraceEvaluationRecord>& records,
                                           const TraceCorpus& corpus, double threshold) {
  if (!corpus.has_ground_truth())
    throw Error(ErrorCode::NoGroundTruth, "corpus " + corpus.corpus_id() + " is not fully labeled");
  ReliabilityReport report;
  report.threshold = threshold;
  report.n_traces = corpus.size();

  std::map<std::string, const TraceEvaluationRecord*> by_id;
  for (const auto& r : records) by_id[r.trace_id] = &r;

  std::vector<int> labels;
  for (const auto& t : corpus.traces()) {
    labels.push_back(binary_label(*t.ground_truth, threshold));
    report.n_positive += static_cast<std::size_t>(labels.back());
  }
  const bool degenerate = report.n_positive == 0 || report.n_positive == report.n_traces;
  if (degenerate)
    report.notes.push_back("degenerate labels: " + std::to_string(report.n_positive) + " of " +
                           std::to_string(report.n_traces) + " traces successful; AUC omitted");

  for (PredictionMethod method : kAllMethods) {
    std::vector<double> scores;
    std::size_t missing = 0;
    for (const auto& t : corpus.traces()) {
      auto it = by_id.find(t.trace_id);
      try {
        if (it == by_id.end()) throw Error(ErrorCode::MissingMode, "no record");
        auto p = predict_trace_score(*it->second, method);
        scores.push_back(p.score);
        report.predictions.push_back(std::move(p));
      } catch (const Error& e) {
        if (e.code() != ErrorCode::MissingMode) throw;
        ++missing;
      }
    }
    if (missing > 0) {
      if (missing < corpus.size())
        report.notes.push_back(to_string(method) + ": no prediction for " + std::to_string(missing) +
                               " trace(s); AUC omitted");
      continue;
    }
    if (!degenerate) report.auc[to_string(method)] = compute_auc(scores, labels);
  }
  return report;
}

TopologyGraph build_topology(const TraceCorpus& corpus) {
  if (corpus.empty()) throw Error(ErrorCode::PreconditionViolation, "topology of an empty corpus");
  TopologyGraph g;
  std::map<std::string, std::size_t> steps;
  std::map<std::pair<std::string, std::string>, std::size_t> edges;
  for (const auto& node : corpus.node_catalog()) {
    steps[node] = 0;
    g.entry_counts[node] = 0;
    g.exit_counts[node] = 0;
  }
  for (const auto& t : corpus.traces()) {
    if (t.steps.empty()) continue;
    ++g.entry_counts[t.steps.front().node_id];
    ++g.exit_counts[t.steps.back().node_id];
    for (std::size_t i = 0; i < t.steps.size(); ++i) {
      ++steps[t.steps[i].node_id];
      if (i + 1 < t.steps.size()) ++edges[{t.steps[i].node_id, t.steps[i + 1].node_id}];
    }
  }
  for (const auto& [node, count] : steps) g.nodes.push_back({node, count});
  for (const auto& [key, count] : edges) g.edges.push_back({key.first, key.second, count});
  return g;
}

std::size_t histogram_bin(double score) {
  if (!(score > 0.0)) return 0;
  return std::min<std::size_t>(static_cast<std::size_t>(std::floor(score * kHistogramBins)), kHistogramBins - 1);
}

std::map<std::string, NodeStats> node_usage_stats(const TraceCorpus& corpus,
                                                  const std::vector<TraceEvaluationRecord>& records,
                                                  const std::map<std::string, InsightSet>& node_insights,
                                                  double threshold) {
  std::map<std::string, NodeStats> stats;
  for (const auto& node : corpus.node_catalog()) stats[node].node_id = node;
  for (const auto& t : corpus.traces())
    for (const auto& s : t.steps) ++stats[s.node_id].step_count;

  struct Sums {
    double success = 0.0, failure = 0.0;
    std::size_t n_success = 0, n_failure = 0;
  };
  std::map<std::string, double> totals;
  std::map<std::string, Sums> split;
  for (const auto& r : records) {
    const Trace* trace = corpus.find(r.trace_id);
    std::optional<int> label;
    if (trace && trace->ground_truth) label = binary_label(*trace->ground_truth, threshold);
    for (const auto& c : r.step_critiques) {
      NodeStats& s = stats[c.node_id];
      s.node_id = c.node_id;
      ++s.scored_steps;
      totals[c.node_id] += c.score;
      s.min_score = s.min_score ? std::min(*s.min_score, c.score) : c.score;
      s.max_score = s.max_score ? std::max(*s.max_score, c.score) : c.score;
      ++s.histogram[histogram_bin(c.score)];
      if (label) {
        Sums& sums = split[c.node_id];
        if (*label == 1) {
          sums.success += c.score;
          ++sums.n_success;
        } else {
          sums.failure += c.score;
          ++sums.n_failure;
        }
      }
    }
  }
  for (auto& [node, s] : stats) {
    if (s.scored_steps > 0) s.mean_score = totals[node] / static_cast<double>(s.scored_steps);
    if (auto it = split.find(node); it != split.end()) {
      if (it->second.n_success) s.mean_score_success = it->second.success / static_cast<double>(it->second.n_success);
      if (it->second.n_failure) s.mean_score_failure = it->second.failure / static_cast<double>(it->second.n_failure);
    }
    if (auto it = node_insights.find(node); it != node_insights.end())
      for (const auto& ins : it->second.insights) s.issue_counts[ins.insight_id] = ins.instance_refs.size();
  }
  return stats;
}

GlobalScores global_scores(const std::vector<TraceEvaluationRecord>& records) {
  GlobalScores g;
  g.evaluated_traces = records.size();
  double sums[3] = {0, 0, 0};
  std::size_t counts[3] = {0, 0, 0};
  for (const auto& r : records) {
    for (std::size_t m = 0; m < kAllMethods.size(); ++m) {
      try {
        sums[m] += predict_trace_score(r, kAllMethods[m]).score;
        ++counts[m];
      } catch (const Error&) {
      }
    }
  }
  auto mean = [&](std::size_t m) -> std::optional<double> {
    if (counts[m] == 0) return std::nullopt;
    return sums[m] / static_cast<double>(counts[m]);
  };
  g.mean_step_score = mean(0);
  g.mean_trace_score = mean(1);
  g.mean_rubric_fraction = mean(2);
  return g;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> opt_double(const Json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

void to_json(Json& j, const ReliabilityReport& r) {
  Json preds = Json::array();
  for (const auto& p : r.predictions)
    preds.push_back({{"trace_id", p.trace_id}, {"method", to_string(p.method)}, {"score", p.score}});
  j = Json{{"auc", r.auc},         {"n_traces", r.n_traces}, {"n_positive", r.n_positive},
           {"threshold", r.threshold}, {"predictions", preds}, {"notes", r.notes}};
}

void from_json(const Json& j, ReliabilityReport& r) {
  r.auc = j.at("auc").get<std::map<std::string, double>>();
  r.n_traces = j.at("n_traces").get<std::size_t>();
  r.n_positive = j.at("n_positive").get<std::size_t>();
  r.threshold = j.value("threshold", 0.5);
  r.predictions.clear();
  for (const auto& p : j.value("predictions", Json::array()))
    r.predictions.push_back({p.at("trace_id").get<std::string>(),
                             prediction_method_from_string(p.at("method").get<std::string>()),
                             p.at("score").get<double>()});
  r.notes = j.value("notes", std::vector<std::string>{});
}

void to_json(Json& j, const TopologyGraph& g) {
  Json nodes = Json::array(), edges = Json::array();
  for (const auto& n : g.nodes) nodes.push_back({{"node_id", n.node_id}, {"step_count", n.step_count}});
  for (const auto& e : g.edges)
    edges.push_back({{"from", e.from}, {"to", e.to}, {"transition_count", e.transition_count}});
  j = Json{{"nodes", nodes}, {"edges", edges}, {"entry_counts", g.entry_counts}, {"exit_counts", g.exit_counts}};
}

void from_json(const Json& j, TopologyGraph& g) {
  g.nodes.clear();
  g.edges.clear();
  for (const auto& n : j.at("nodes"))
    g.nodes.push_back({n.at("node_id").get<std::string>(), n.at("step_count").get<std::size_t>()});
  for (const auto& e : j.at("edges"))
    g.edges.push_back({e.at("from").get<std::string>(), e.at("to").get<std::string>(),
                       e.at("transition_count").get<std::size_t>()});
  g.entry_counts = j.at("entry_counts").get<std::map<std::string, std::size_t>>();
  g.exit_counts = j.at("exit_counts").get<std::map<std::string, std::size_t>>();
}

void to_json(Json& j, const NodeStats& s) {
  j = Json{{"node_id", s.node_id},
           {"step_count", s.step_count},
           {"scored_steps", s.scored_steps},
           {"mean_score", opt(s.mean_score)},
           {"min_score", opt(s.min_score)},
           {"max_score", opt(s.max_score)},
           {"histogram", s.histogram},
           {"issue_counts", s.issue_counts},
           {"mean_score_success", opt(s.mean_score_success)},
           {"mean_score_failure", opt(s.mean_score_failure)}};
}

void from_json(const Json& j, NodeStats& s) {
  s.node_id = j.at("node_id").get<std::string>();
  s.step_count = j.at("step_count").get<std::size_t>();
  s.scored_steps = j.at("scored_steps").get<std::size_t>();
  s.mean_score = opt_double(j, "mean_score");
  s.min_score = opt_double(j, "min_score");
  s.max_score = opt_double(j, "max_score");
  const auto& hist = j.at("histogram");
  if (!hist.is_array() || hist.size() != kHistogramBins)
    throw Error(ErrorCode::CorruptBundle, "histogram of node " + s.node_id + " must have 10 bins");
  for (std::size_t i = 0; i < kHistogramBins; ++i) s.histogram[i] = hist[i].get<std::size_t>();
  s.issue_counts = j.at("issue_counts").get<std::map<std::string, std::size_t>>();
  s.mean_score_success = opt_double(j, "mean_score_success");
  s.mean_score_failure = opt_double(j, "mean_score_failure");
}

void to_json(Json& j, const GlobalScores& s) {
  j = Json{{"mean_trace_score", opt(s.mean_trace_score)},
           {"mean_step_score", opt(s.mean_step_score)},
           {"mean_rubric_fraction", opt(s.mean_rubric_fraction)},
           {"evaluated_traces", s.evaluated_traces}};
}

}  // namespace aclear
