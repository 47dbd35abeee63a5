#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aclear/analytics.hpp"
#include "aclear/ingest.hpp"
#include "aclear/insights.hpp"
#include "aclear/judge.hpp"
#include "aclear/trace.hpp"
#include "aclear/zip.hpp"

namespace aclear {

inline constexpr int kBundleFormatVersion = 1;

struct Manifest {
  int format_version = kBundleFormatVersion;
  Timestamp created_at{};
  /// The configuration the run used, as written by the user.
  Json config = Json::object();
  /// corpus_id, counts, node catalog, ingestion summary.
  Json corpus_summary = Json::object();
  std::string judge_identity;
  /// Traces the judge could not evaluate at all.
  std::vector<TraceFailure> failures;
  std::vector<std::string> notes;

  bool operator==(const Manifest&) const;
};

struct EvaluationBundle {
  Manifest manifest;
  TraceCorpus corpus;
  /// Sorted by trace_id.
  std::vector<TraceEvaluationRecord> evaluations;
  std::optional<InsightSet> system_insights;
  std::map<std::string, InsightSet> node_insights;
  TopologyGraph topology;
  std::map<std::string, NodeStats> node_stats;
  std::optional<ReliabilityReport> reliability;

  bool operator==(const EvaluationBundle&) const;
};

/// corpus_id, trace/step counts, node catalog, ground-truth flag and, when
/// given, the ingestion summary.
Json summarize_corpus(const TraceCorpus& corpus, const LoadSummary* load = nullptr);

/// Throws Error(ReferenceError) naming the first id that does not resolve.
void check_references(const EvaluationBundle& bundle);

/// `corpus/<trace_id>.json` etc.; characters outside [A-Za-z0-9._-] (and a
/// leading '.') are percent-escaped.
std::string member_name_component(std::string_view id);

/// Archive members in their fixed order.
std::vector<ZipEntry> bundle_entries(const EvaluationBundle& bundle);
std::string bundle_bytes(const EvaluationBundle& bundle);
void write_bundle(const EvaluationBundle& bundle, const std::filesystem::path& path);

EvaluationBundle parse_bundle(std::string_view bytes);
EvaluationBundle read_bundle(const std::filesystem::path& path);

void to_json(Json& j, const Manifest& m);
void from_json(const Json& j, Manifest& m);

}  // namespace aclear
