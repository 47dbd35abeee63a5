#include <gtest/gtest.h>

#include "aclear/insights.hpp"
#include "properties.hpp"
#include "support.hpp"

using namespace aclear;
using testsupport::ScriptedClient;
using testsupport::throws_code;

namespace {

PoolItem item(std::string trace, std::size_t step, std::string text, double score = 0.2) {
  return {{std::move(trace), step, std::nullopt}, ItemKind::Step, std::move(text), score};
}

FeedbackPool node_pool(std::vector<PoolItem> items) {
  FeedbackPool p;
  p.scope.node_id = "n";
  p.items = std::move(items);
  return p;
}

/// Lumps every candidate into one cluster.
class LumpingBackend : public MockAggregatorBackend {
 public:
  std::vector<Cluster> cluster(std::span<const Candidate> c) override {
    Cluster all{"everything", "all of it", {}};
    for (std::size_t i = 0; i < c.size(); ++i) all.members.push_back(i);
    return {all};
  }
};

}  // namespace

TEST(NormalizeStatement, CaseAndPunctuation) {
  EXPECT_EQ(normalize_statement("  Called the WRONG tool!! "), "called the wrong tool");
  EXPECT_EQ(normalize_statement("file-path,  missing"), "file path missing");
}

TEST(MockBackend, SplitsCompoundCritiques) {
  MockAggregatorBackend mock;
  std::vector<PoolItem> batch{item("t", 0, "Called the wrong tool; ignored the error. Output was empty and unclear but polite.")};
  auto out = mock.extract(batch);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0], (std::vector<std::string>{"Called the wrong tool", "ignored the error", "Output was empty", "unclear",
                                              "polite"}));
}

TEST(BuildPools, RoutesCritiquesByKind) {
  TraceCorpus corpus("c", {testsupport::make_trace("a", {"x", "y"}, std::nullopt, {"ERROR", "ok"}, "T1"),
                           testsupport::make_trace("b", {"z"})});
  MockJudge judge;
  auto records = evaluate_corpus(corpus, judge, {}).records;
  Pools pools = build_pools(records, corpus);
  EXPECT_EQ(pools.nodes.size(), 3u);
  EXPECT_EQ(pools.nodes["x"].items.size(), 1u);
  EXPECT_EQ(pools.nodes["x"].items[0].ref.step_index, 0u);
  // 2 trace critiques + unfulfilled rubrics of "a" (3) and "b" (1).
  std::size_t rubric_items = 0;
  for (const auto& i : pools.system.items) rubric_items += i.kind == ItemKind::Rubric;
  EXPECT_EQ(pools.system.items.size(), 2u + rubric_items);
  EXPECT_EQ(rubric_items, 4u);
  for (const auto& i : pools.system.items) {
    if (i.kind == ItemKind::Rubric) {
      EXPECT_TRUE(i.ref.rubric_id);
    }
  }
  EXPECT_TRUE(throws_code([&] { build_pools({}, corpus); }, ErrorCode::PreconditionViolation));
}

TEST(Aggregate, PraiseIsIgnored) {
  auto pool = node_pool({item("a", 0, "called the wrong tool", 0.9), item("b", 0, "called the wrong tool", 0.95)});
  MockAggregatorBackend mock;
  auto set = aggregate_pool(pool, mock, {});
  EXPECT_TRUE(set.insights.empty());
  EXPECT_EQ(set.pool_size, 2u);
  EXPECT_DOUBLE_EQ(set.coverage, 0.0);
}

TEST(Aggregate, MinSupportAndOrdering) {
  auto pool = node_pool({item("a", 0, "called the wrong tool; output was truncated"), item("b", 0, "Called the wrong tool."),
                         item("c", 0, "output was truncated"), item("d", 0, "called the wrong tool"),
                         item("e", 0, "rare problem")});
  MockAggregatorBackend mock;
  AggregatorConfig cfg;
  auto set = aggregate_pool(pool, mock, cfg);
  ASSERT_EQ(set.insights.size(), 2u);
  EXPECT_EQ(set.insights[0].insight_id, "I1");
  EXPECT_EQ(set.insights[0].title, "Called the wrong tool");
  EXPECT_EQ(set.insights[0].frequency, 3u);
  EXPECT_EQ(set.insights[1].title, "output was truncated");
  EXPECT_EQ(set.insights[1].frequency, 2u);
  EXPECT_EQ(set.assigned_items, 4u);
  EXPECT_DOUBLE_EQ(set.coverage, 4.0 / 5.0);
  cfg.min_support = 3;
  EXPECT_EQ(aggregate_pool(pool, mock, cfg).insights.size(), 1u);
  cfg.min_support = 1;
  cfg.max_insights = 2;
  EXPECT_EQ(aggregate_pool(pool, mock, cfg).insights.size(), 2u);
}

TEST(Aggregate, SmallAndEmptyPoolsAreFlagged) {
  MockAggregatorBackend mock;
  AggregatorConfig cfg;
  cfg.min_pool_size = 3;
  auto small = aggregate_pool(node_pool({item("a", 0, "x y z"), item("b", 0, "x y z")}), mock, cfg);
  EXPECT_TRUE(small.insights.empty());
  EXPECT_EQ(small.note, "insufficient data");
  auto empty = aggregate_pool(node_pool({}), mock, cfg);
  EXPECT_EQ(empty.note, "empty pool");
}

TEST(Aggregate, SystemIdsAreScoped) {
  FeedbackPool sys;
  sys.items = {{{"a", std::nullopt, std::nullopt}, ItemKind::Trace, "gave up early", 0.1},
               {{"b", std::nullopt, std::nullopt}, ItemKind::Trace, "gave up early", 0.1}};
  MockAggregatorBackend mock;
  auto set = aggregate_pool(sys, mock, {});
  ASSERT_EQ(set.insights.size(), 1u);
  EXPECT_EQ(set.insights[0].insight_id, "S1");
  EXPECT_TRUE(set.insights[0].scope.is_system());
}

TEST(ClusterIssues, DegenerateLumpingIsRejected) {
  std::vector<Candidate> unrelated{{"called the wrong tool", 0}, {"output was truncated", 1},
                                   {"hallucinated a file path", 2}, {"answered in spanish", 3}};
  LumpingBackend lump;
  EXPECT_TRUE(throws_code([&] { cluster_issues(unrelated, lump, {}, PoolScope{}); }, ErrorCode::DegenerateClustering));
  // Paraphrases may legitimately share one cluster.
  std::vector<Candidate> paraphrases{{"repeated the tool call", 0}, {"repeated tool call twice", 1},
                                     {"the tool call was repeated", 2}, {"tool call repeated again", 3}};
  auto r = cluster_issues(paraphrases, lump, {}, PoolScope{});
  ASSERT_EQ(r.insights.insights.size(), 1u);
  EXPECT_EQ(r.insights.insights[0].frequency, 4u);
}

TEST(ClusterIssues, OutOfRangeAndRepeatedMembersAreDropped) {
  class Sloppy : public MockAggregatorBackend {
   public:
    std::vector<Cluster> cluster(std::span<const Candidate>) override {
      return {{"first", "", {0, 1, 1, 99}}, {"second", "", {1, 2}}};
    }
  } sloppy;
  std::vector<Candidate> c{{"a", 0}, {"b", 1}, {"c", 2}};
  auto r = cluster_issues(c, sloppy, {}, PoolScope{});
  ASSERT_EQ(r.insights.insights.size(), 1u);  // "second" keeps only candidate 2
  EXPECT_EQ(r.insights.insights[0].title, "first");
  EXPECT_EQ(r.insights.insights[0].frequency, 2u);
  EXPECT_EQ(r.insights.insights[0].description, "Recurring finding: first.");
}

TEST(Aggregate, PoolFailureDoesNotAbortOthers) {
  class Exploding : public MockAggregatorBackend {
   public:
    std::vector<std::vector<std::string>> extract(std::span<const PoolItem> batch) override {
      if (batch[0].ref.trace_id == "boom") throw Error(ErrorCode::TransportError, "endpoint down");
      return MockAggregatorBackend::extract(batch);
    }
  } backend;
  TraceCorpus corpus("c", {testsupport::make_trace("boom", {"x"}, std::nullopt, {"ERROR"}),
                           testsupport::make_trace("fine", {"y", "y"}, std::nullopt, {"ERROR", "ERROR"})});
  MockJudge judge;
  EvaluationOptions opts;
  opts.modes = {true, false, false};
  auto records = evaluate_corpus(corpus, judge, opts).records;
  AggregatorConfig cfg;
  cfg.min_pool_size = 1;
  auto result = aggregate(records, corpus, backend, cfg);
  EXPECT_EQ(result.nodes["x"].note, "aggregation failed");
  EXPECT_FALSE(result.nodes["x"].warnings.empty());
  EXPECT_EQ(result.nodes["y"].insights.size(), 1u);
  EXPECT_EQ(result.system.note, "empty pool");
}

TEST(LlmBackend, ParsesAllThreePhases) {
  auto client = std::make_shared<ScriptedClient>([](const CompletionRequest& req, std::size_t) -> std::string {
    const auto& p = req.prompt;
    if (p.find("list the distinct, concrete problems") != std::string::npos)
      return "[1] Used the wrong API | Did not check the result\n[2] used the wrong api endpoint\n[3] NONE\n";
    if (p.find("Group the statements") != std::string::npos)
      return "ISSUE: Wrong API used\nDESCRIPTION: The agent calls an unsuitable API.\nMEMBERS: 1, 3\n"
             "ISSUE: Unchecked results\nDESCRIPTION: Results are not verified.\nMEMBERS: 2\n";
    if (p.find("Known recurring issues") != std::string::npos) return "[1] 1\n[2] 1\n[3] 2\n";
    return "?";
  });
  LlmAggregatorBackend backend(client, "m");
  auto pool = node_pool({item("a", 0, "wrong API and no check"), item("b", 0, "wrong endpoint"),
                         item("c", 0, "seems fine but slow")});
  AggregatorConfig cfg;
  cfg.min_support = 1;
  auto set = aggregate_pool(pool, backend, cfg);
  ASSERT_EQ(set.insights.size(), 2u);
  // Equal frequencies order by title. The matcher adds item c to
  // "Unchecked results" on top of provenance (a).
  EXPECT_EQ(set.insights[0].title, "Unchecked results");
  EXPECT_EQ(set.insights[0].frequency, 2u);
  EXPECT_EQ(set.insights[1].title, "Wrong API used");
  EXPECT_EQ(set.insights[1].frequency, 2u);
  EXPECT_DOUBLE_EQ(set.coverage, 1.0);
}

TEST(LlmBackend, UnparseableAnswersDegradeGracefully) {
  auto client = std::make_shared<ScriptedClient>([](const CompletionRequest& req, std::size_t) -> std::string {
    if (req.prompt.find("list the distinct, concrete problems") != std::string::npos)
      return "[1] slow response\n[2] slow response\n";
    return "I'd rather not.";
  });
  LlmAggregatorBackend backend(client, "m");
  auto pool = node_pool({item("a", 0, "slow"), item("b", 0, "very slow")});
  auto set = aggregate_pool(pool, backend, {});
  // Clustering falls back to text grouping; matching keeps provenance links.
  ASSERT_EQ(set.insights.size(), 1u);
  EXPECT_EQ(set.insights[0].frequency, 2u);
  EXPECT_GE(set.warnings.size(), 2u);
}

TEST(InsightSetJson, RoundTrip) {
  auto pool = node_pool({item("a", 0, "x broke"), item("b", 1, "x broke")});
  MockAggregatorBackend mock;
  auto set = aggregate_pool(pool, mock, {});
  set.warnings.push_back("w");
  Json j = set;
  EXPECT_EQ(j.get<InsightSet>(), set);
}

// --- randomized laws --------------------------------------------------------------

TEST(AggregationLaws, RandomizedPools) {
  std::mt19937_64 rng(20240611);
  for (int i = 0; i < 500; ++i) {
    std::vector<std::set<std::string>> planted;
    auto pool = testsupport::random_pool(rng, 40, &planted);
    AggregatorConfig cfg;
    cfg.min_support = 1 + rng() % 4;
    cfg.max_insights = 3 + rng() % 10;
    cfg.batch_size = 1 + rng() % 12;
    ASSERT_TRUE(testsupport::check_aggregation_laws(pool, planted, cfg)) << "case " << i;
    ASSERT_TRUE(testsupport::check_duplication_law(pool, cfg)) << "case " << i;
  }
}
