#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "aclear/judge.hpp"
#include "aclear/llm_client.hpp"
#include "aclear/trace.hpp"

namespace aclear {

/// Points at the step, trace, or rubric verdict a critique came from.
struct SourceRef {
  std::string trace_id;
  std::optional<std::size_t> step_index;
  std::optional<std::string> rubric_id;

  auto operator<=>(const SourceRef&) const = default;
};

enum class ItemKind { Step, Trace, Rubric };

struct PoolItem {
  SourceRef ref;
  ItemKind kind = ItemKind::Step;
  std::string critique_text;
  double score = 0.0;
};

/// A node pool (node_id set) or the system pool.
struct PoolScope {
  std::optional<std::string> node_id;

  bool is_system() const noexcept { return !node_id.has_value(); }
  std::string label() const { return node_id ? "node:" + *node_id : "system"; }

  auto operator<=>(const PoolScope&) const = default;
};

struct FeedbackPool {
  PoolScope scope;
  std::vector<PoolItem> items;
};

struct Insight {
  std::string insight_id;
  std::string title;
  std::string description;
  std::size_t frequency = 0;
  std::vector<SourceRef> instance_refs;
  PoolScope scope;

  bool operator==(const Insight&) const = default;
};

struct InsightSet {
  PoolScope scope;
  /// Descending frequency, then title.
  std::vector<Insight> insights;
  double coverage = 0.0;
  std::size_t pool_size = 0;
  std::size_t assigned_items = 0;
  std::optional<std::string> note;
  std::vector<std::string> warnings;

  bool operator==(const InsightSet&) const = default;
};

struct AggregatorConfig {
  enum class Backend { Llm, Mock };
  Backend backend = Backend::Mock;
  /// Critiques scoring at or above this are treated as praise.
  double praise_threshold = 0.7;
  std::size_t min_support = 2;
  std::size_t max_insights = 20;
  /// Pools smaller than this get an empty set flagged "insufficient data".
  std::size_t min_pool_size = 2;
  std::size_t batch_size = 10;
  std::size_t max_parallel = 4;
};

struct Pools {
  FeedbackPool system;
  std::map<std::string, FeedbackPool> nodes;
};

/// Step critiques go to the pool of their node; trace critiques and the
/// reasoning of unfulfilled rubrics go to the system pool. Every node of the
/// corpus gets a pool, possibly empty.
Pools build_pools(const std::vector<TraceEvaluationRecord>& records, const TraceCorpus& corpus);

/// An atomic issue statement and the pool item it came from.
struct Candidate {
  std::string statement;
  std::size_t item_index = 0;
};

struct Cluster {
  std::string title;
  std::string description;
  /// Indexes into the candidate list.
  std::vector<std::size_t> members;
};

/// The three phases behind the aggregator. Implementations must be
/// thread-safe; pools are processed concurrently.
class AggregatorBackend {
 public:
  virtual ~AggregatorBackend() = default;

  /// Issue statements for each item of the batch, in batch order. Throws
  /// Error(UnparseableVerdict) when the batch answer cannot be read.
  virtual std::vector<std::vector<std::string>> extract(std::span<const PoolItem> batch) = 0;

  virtual std::vector<Cluster> cluster(std::span<const Candidate> candidates) = 0;

  /// Extra insight matches (indexes into `insights`) per item of the batch,
  /// beyond the provenance links the caller already has.
  virtual std::vector<std::vector<std::size_t>> match(std::span<const PoolItem> batch,
                                                      std::span<const Insight> insights) = 0;
};

/// Splits critiques on ';', sentence breaks, " and " and " but "; groups
/// statements that are equal after lower-casing and stripping punctuation;
/// adds no matches beyond provenance.
class MockAggregatorBackend : public AggregatorBackend {
 public:
  std::vector<std::vector<std::string>> extract(std::span<const PoolItem> batch) override;
  std::vector<Cluster> cluster(std::span<const Candidate> candidates) override;
  std::vector<std::vector<std::size_t>> match(std::span<const PoolItem> batch,
                                              std::span<const Insight> insights) override;
};

class LlmAggregatorBackend : public AggregatorBackend {
 public:
  LlmAggregatorBackend(std::shared_ptr<CompletionClient> client, std::string model_name, double temperature = 0.0);

  std::vector<std::vector<std::string>> extract(std::span<const PoolItem> batch) override;
  std::vector<Cluster> cluster(std::span<const Candidate> candidates) override;
  std::vector<std::vector<std::size_t>> match(std::span<const PoolItem> batch,
                                              std::span<const Insight> insights) override;

 private:
  std::string call(const std::string& prompt);

  std::shared_ptr<CompletionClient> client_;
  std::string model_name_;
  double temperature_;
};

/// Lower-case, punctuation to spaces, whitespace collapsed.
std::string normalize_statement(std::string_view text);

std::vector<Candidate> extract_issue_statements(const FeedbackPool& pool, AggregatorBackend& backend,
                                                const AggregatorConfig& config,
                                                std::vector<std::string>* warnings = nullptr);

struct ClusterResult {
  /// Insights carry frequency = distinct source items and no refs yet; the
  /// list is filtered by min_support but not capped.
  InsightSet insights;
  /// Per insight, the pool items whose candidates landed in it.
  std::vector<std::set<std::size_t>> source_items;
};

ClusterResult cluster_issues(const std::vector<Candidate>& candidates, AggregatorBackend& backend,
                             const AggregatorConfig& config, const PoolScope& scope);

InsightSet assign_instances(const ClusterResult& clusters, const FeedbackPool& pool, AggregatorBackend& backend,
                            const AggregatorConfig& config);

struct AggregationResult {
  InsightSet system;
  std::map<std::string, InsightSet> nodes;
};

AggregationResult aggregate(const std::vector<TraceEvaluationRecord>& records, const TraceCorpus& corpus,
                            AggregatorBackend& backend, const AggregatorConfig& config);

/// Runs extract, cluster and assign on one pool.
InsightSet aggregate_pool(const FeedbackPool& pool, AggregatorBackend& backend, const AggregatorConfig& config);

void to_json(Json& j, const SourceRef& ref);
void from_json(const Json& j, SourceRef& ref);
void to_json(Json& j, const InsightSet& set);
void from_json(const Json& j, InsightSet& set);

}  // namespace aclear
