#pragma once

// Hand-derived expectations for the mock run over tests/fixtures/fixture_corpus.
// Worked out from the fixture texts and the mock rulebook, not from pipeline
// output: t02/t04/t06/t08/t10 never say TASK COMPLETE; ERROR appears in
// t02 steps 1-2, t06 steps 1-2 and t10 step 1; repeated tool calls in t03,
// t06 and t08 step 2; malformed JSON in t04 and t09 step 0.

#include <gtest/gtest.h>

#include <tuple>

#include "aclear/bundle.hpp"

namespace testsupport {

struct ExpectedInsight {
  std::string id;
  std::string title;
  std::vector<aclear::SourceRef> refs;
};

inline aclear::SourceRef tref(std::string t) { return {std::move(t), std::nullopt, std::nullopt}; }
inline aclear::SourceRef sref(std::string t, std::size_t i) { return {std::move(t), i, std::nullopt}; }
inline aclear::SourceRef rref(std::string t, std::string r) { return {std::move(t), std::nullopt, std::move(r)}; }

inline std::vector<ExpectedInsight> expected_system_insights() {
  return {
      {"S1", "workflow ended without a final deliverable", {tref("t02"), tref("t04"), tref("t06"), tref("t08"), tref("t10")}},
      {"S2", "did not recover from a tool error", {tref("t02"), tref("t06"), tref("t10")}},
      {"S3", "no step output contains 'refund the customer'", {rref("t06", "R2"), rref("t08", "R2"), rref("t10", "R2")}},
      {"S4", "no step output contains 'Find the invoice'", {rref("t06", "R1"), rref("t10", "R1")}},
      {"S5", "no step output contains 'apply the requested change'", {rref("t02", "R2"), rref("t04", "R2")}},
      {"S6", "no step output contains 'report the final result'", {rref("t02", "R3"), rref("t04", "R3")}},
      {"S7", "wasted effort on redundant tool calls", {tref("t06"), tref("t08")}},
  };
}

inline std::map<std::string, std::vector<ExpectedInsight>> expected_node_insights() {
  return {
      {"executor",
       {{"I1", "unhandled ERROR in step output", {sref("t02", 1), sref("t02", 2), sref("t06", 1), sref("t06", 2), sref("t10", 1)}},
        {"I2", "repeated an identical tool call", {sref("t03", 2), sref("t06", 2), sref("t08", 2)}}}},
      {"planner", {{"I1", "produced malformed JSON output", {sref("t04", 0), sref("t09", 0)}}}},
      {"reporter", {}},
  };
}

inline ::testing::AssertionResult same_insights(const aclear::InsightSet& got, const std::vector<ExpectedInsight>& want) {
  if (got.insights.size() != want.size())
    return ::testing::AssertionFailure() << got.scope.label() << ": " << got.insights.size() << " insights, expected "
                                         << want.size();
  for (std::size_t i = 0; i < want.size(); ++i) {
    const auto& g = got.insights[i];
    auto refs = g.instance_refs;
    auto wrefs = want[i].refs;
    std::sort(refs.begin(), refs.end());
    std::sort(wrefs.begin(), wrefs.end());
    if (g.insight_id != want[i].id || g.title != want[i].title || g.frequency != wrefs.size() || refs != wrefs)
      return ::testing::AssertionFailure() << got.scope.label() << " insight " << i << ": got " << g.insight_id << " '"
                                           << g.title << "' x" << g.frequency << ", expected " << want[i].id << " '"
                                           << want[i].title << "' x" << wrefs.size();
  }
  return ::testing::AssertionSuccess();
}

/// Insights, coverage, topology and AUCs of the mock run.
inline ::testing::AssertionResult matches_hand_derivation(const aclear::EvaluationBundle& b) {
  if (!b.system_insights) return ::testing::AssertionFailure() << "no system insights";
  if (auto r = same_insights(*b.system_insights, expected_system_insights()); !r) return r;
  // 5 + 5 trace critiques failing, 10 unfulfilled rubrics; 14 of 20 assigned.
  if (b.system_insights->pool_size != 20 || b.system_insights->assigned_items != 14)
    return ::testing::AssertionFailure() << "system pool " << b.system_insights->pool_size << "/"
                                         << b.system_insights->assigned_items;
  for (const auto& [node, want] : expected_node_insights()) {
    auto it = b.node_insights.find(node);
    if (it == b.node_insights.end()) return ::testing::AssertionFailure() << "no insights for " << node;
    if (auto r = same_insights(it->second, want); !r) return r;
  }
  const std::map<std::string, std::pair<std::size_t, std::size_t>> pools{
      {"executor", {19, 7}}, {"planner", {10, 2}}, {"reporter", {10, 0}}};
  for (const auto& [node, sizes] : pools) {
    const auto& set = b.node_insights.at(node);
    if (set.pool_size != sizes.first || set.assigned_items != sizes.second)
      return ::testing::AssertionFailure() << node << " pool " << set.pool_size << "/" << set.assigned_items;
  }
  const std::vector<aclear::TopologyEdge> edges{
      {"executor", "executor", 9}, {"executor", "reporter", 10}, {"planner", "executor", 10}};
  if (b.topology.edges != edges) return ::testing::AssertionFailure() << "topology edges differ";
  if (!b.reliability) return ::testing::AssertionFailure() << "no reliability report";
  // Positives t01 t03 t05 t07 t09. Trace and rubric scores separate the classes
  // perfectly; stepwise loses 2 of 25 pairs (t03 and t09 carry a low step).
  const std::map<std::string, double> auc{{"rubric", 1.0}, {"stepwise", 23.0 / 25.0}, {"trace", 1.0}};
  for (const auto& [m, v] : auc) {
    auto it = b.reliability->auc.find(m);
    if (it == b.reliability->auc.end() || std::abs(it->second - v) > 1e-12)
      return ::testing::AssertionFailure() << "AUC " << m;
  }
  return ::testing::AssertionSuccess();
}

}  // namespace testsupport
