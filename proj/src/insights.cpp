#include "aclear/insights.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <unordered_map>

#include "aclear/error.hpp"
#include "aclear/parallel.hpp"

namespace aclear {

namespace {

constexpr std::size_t kMaxTitleChars = 120;

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string clean_statement(std::string_view s) {
  std::string t = trim(s);
  while (!t.empty() && (t.front() == '-' || t.front() == '*')) t = trim(t.substr(1));
  // A clause cut at a sentence break may still open with its conjunction.
  for (std::string_view lead : {"and ", "but "})
    if (t.size() > lead.size() && normalize_statement(t.substr(0, lead.size())) + " " == lead)
      t = trim(t.substr(lead.size()));
  while (!t.empty() && std::string_view(".!?,:;").find(t.back()) != std::string_view::npos) t.pop_back();
  return trim(t);
}

std::vector<std::string> split_on(const std::vector<std::string>& parts, std::string_view sep) {
  std::vector<std::string> out;
  for (const auto& p : parts) {
    std::size_t start = 0;
    while (true) {
      std::size_t at = p.find(sep, start);
      out.push_back(p.substr(start, at == std::string::npos ? std::string::npos : at - start));
      if (at == std::string::npos) break;
      start = at + sep.size();
    }
  }
  return out;
}

std::vector<std::string> split_lines(std::string_view raw) { return split_on({std::string(raw)}, "\n"); }

std::string truncate_title(std::string title) {
  if (title.size() > kMaxTitleChars) {
    title.resize(kMaxTitleChars - 3);
    title += "...";
  }
  return title;
}

std::set<std::string> word_set(std::string_view text) {
  std::set<std::string> words;
  std::string norm = normalize_statement(text);
  for (const auto& w : split_on({norm}, " "))
    if (!w.empty()) words.insert(w);
  return words;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& w : a) common += b.count(w);
  return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

InsightSet empty_set(const FeedbackPool& pool, std::optional<std::string> note) {
  InsightSet set;
  set.scope = pool.scope;
  set.pool_size = pool.items.size();
  set.note = std::move(note);
  return set;
}

}  // namespace

std::string normalize_statement(std::string_view text) {
  std::string out;
  bool space = false;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      if (space && !out.empty()) out.push_back(' ');
      space = false;
      out.push_back(static_cast<char>(std::tolower(c)));
    } else {
      space = true;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pools

Pools build_pools(const std::vector<TraceEvaluationRecord>& records, const TraceCorpus& corpus) {
  if (records.empty()) throw Error(ErrorCode::PreconditionViolation, "no evaluation records to pool");
  Pools pools;
  for (const auto& node : corpus.node_catalog()) pools.nodes[node].scope.node_id = node;
  for (const auto& record : records) {
    for (const auto& c : record.step_critiques) {
      FeedbackPool& pool = pools.nodes[c.node_id];
      pool.scope.node_id = c.node_id;
      pool.items.push_back({{c.trace_id, c.step_index, std::nullopt}, ItemKind::Step, c.justification, c.score});
    }
    if (record.trace_critique) {
      const auto& c = *record.trace_critique;
      pools.system.items.push_back({{c.trace_id, std::nullopt, std::nullopt}, ItemKind::Trace, c.justification, c.score});
    }
    if (record.rubric_verdicts) {
      for (const auto& v : record.rubric_verdicts->verdicts) {
        if (v.fulfilled) continue;
        pools.system.items.push_back(
            {{record.trace_id, std::nullopt, v.rubric_id}, ItemKind::Rubric, v.reasoning, 0.0});
      }
    }
  }
  return pools;
}

// ---------------------------------------------------------------------------
// Mock backend

std::vector<std::vector<std::string>> MockAggregatorBackend::extract(std::span<const PoolItem> batch) {
  std::vector<std::vector<std::string>> out;
  for (const auto& item : batch) {
    std::vector<std::string> parts = split_lines(item.critique_text);
    for (std::string_view sep : {";", ". ", "! ", "? ", " and ", " but "}) parts = split_on(parts, sep);
    std::vector<std::string> statements;
    for (const auto& p : parts) {
      std::string s = clean_statement(p);
      if (s.size() >= 3) statements.push_back(std::move(s));
    }
    out.push_back(std::move(statements));
  }
  return out;
}

std::vector<Cluster> MockAggregatorBackend::cluster(std::span<const Candidate> candidates) {
  std::vector<Cluster> clusters;
  std::unordered_map<std::string, std::size_t> by_key;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    std::string key = normalize_statement(candidates[i].statement);
    if (key.empty()) continue;
    auto [it, inserted] = by_key.emplace(key, clusters.size());
    std::string title = clean_statement(candidates[i].statement);
    if (inserted) {
      clusters.push_back({title, {}, {}});
    } else if (title < clusters[it->second].title) {
      clusters[it->second].title = title;
    }
    clusters[it->second].members.push_back(i);
  }
  for (auto& c : clusters) c.description = "Recurring finding: " + c.title + ".";
  return clusters;
}

std::vector<std::vector<std::size_t>> MockAggregatorBackend::match(std::span<const PoolItem> batch,
                                                                   std::span<const Insight>) {
  return std::vector<std::vector<std::size_t>>(batch.size());
}

// ---------------------------------------------------------------------------
// LLM backend

namespace {

constexpr const char* kExtractPrompt = R"(You are analysing critiques that an evaluator wrote about the behaviour of an AI agent. For each numbered critique, list the distinct, concrete problems it reports. Write every problem as a short self-contained statement (at most 15 words) that makes sense without the critique. Ignore praise. If a critique reports no problem, answer NONE for it.

Critiques:
{items}
Answer with exactly one line per critique, problems separated by " | ":
[1] <problem> | <problem>
[2] NONE
)";

constexpr const char* kClusterPrompt = R"(Below are short problem statements extracted from many critiques of an AI agent. Group the statements that describe the same underlying issue. Give every group a concise issue title (at most 12 words) and a description of one or two sentences. A statement belongs to at most one group; leave out statements that fit no group.

Statements:
{items}
Answer with one block per group in exactly this format:
ISSUE: <title>
DESCRIPTION: <description>
MEMBERS: <comma-separated statement numbers>
)";

constexpr const char* kMatchPrompt = R"(Known recurring issues of an AI agent:
{insights}
Critiques:
{items}
For every critique, list the numbers of the known issues it clearly exhibits, or NONE. Answer with exactly one line per critique:
[1] 2, 3
[2] NONE
)";

constexpr const char* kRetryReminder = "\nReminder: follow the answer format exactly.\n";

std::map<std::size_t, std::string> numbered_lines(std::string_view raw) {
  static const std::regex line_re(R"(^\s*\[(\d+)\]\s*(.*?)\s*$)");
  std::map<std::size_t, std::string> out;
  for (const auto& line : split_lines(raw)) {
    std::smatch m;
    if (std::regex_match(line, m, line_re)) out[std::stoul(m[1].str())] = m[2].str();
  }
  return out;
}

std::string fill(const char* tmpl, std::initializer_list<std::pair<std::string, std::string>> values) {
  std::map<std::string, std::string> map(values.begin(), values.end());
  return render_template(tmpl, map);
}

bool is_none(const std::string& s) {
  std::string t = normalize_statement(s);
  return t.empty() || t == "none";
}

}  // namespace

LlmAggregatorBackend::LlmAggregatorBackend(std::shared_ptr<CompletionClient> client, std::string model_name,
                                           double temperature)
    : client_(std::move(client)), model_name_(std::move(model_name)), temperature_(temperature) {
  if (!client_) throw Error(ErrorCode::PreconditionViolation, "LlmAggregatorBackend needs a completion client");
}

std::string LlmAggregatorBackend::call(const std::string& prompt) {
  return client_->complete({model_name_, prompt, temperature_});
}

std::vector<std::vector<std::string>> LlmAggregatorBackend::extract(std::span<const PoolItem> batch) {
  std::string items;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    char score[16];
    std::snprintf(score, sizeof(score), "%.2f", batch[i].score);
    items += "[" + std::to_string(i + 1) + "] (score " + score + ") " + batch[i].critique_text + "\n";
  }
  const std::string prompt = fill(kExtractPrompt, {{"items", items}});
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto lines = numbered_lines(call(attempt == 0 ? prompt : prompt + kRetryReminder));
    if (lines.empty()) continue;
    std::vector<std::vector<std::string>> out(batch.size());
    for (const auto& [index, text] : lines) {
      if (index < 1 || index > batch.size() || is_none(text)) continue;
      for (const auto& piece : split_on({text}, "|")) {
        std::string s = clean_statement(piece);
        if (!s.empty()) out[index - 1].push_back(std::move(s));
      }
    }
    return out;
  }
  throw Error(ErrorCode::UnparseableVerdict, "issue extraction answer has no numbered lines");
}

std::vector<Cluster> LlmAggregatorBackend::cluster(std::span<const Candidate> candidates) {
  std::string items;
  for (std::size_t i = 0; i < candidates.size(); ++i)
    items += "[" + std::to_string(i + 1) + "] " + candidates[i].statement + "\n";
  const std::string prompt = fill(kClusterPrompt, {{"items", items}});
  static const std::regex issue_re(R"(^\s*[*_#]*\s*ISSUE\s*[*_]*\s*:\s*(.*?)\s*$)", std::regex::icase);
  static const std::regex desc_re(R"(^\s*[*_#]*\s*DESCRIPTION\s*[*_]*\s*:\s*(.*?)\s*$)", std::regex::icase);
  static const std::regex members_re(R"(^\s*[*_#]*\s*MEMBERS\s*[*_]*\s*:\s*(.*?)\s*$)", std::regex::icase);
  static const std::regex number_re(R"(\d+)");
  for (int attempt = 0; attempt < 2; ++attempt) {
    std::vector<Cluster> clusters;
    for (const auto& line : split_lines(call(attempt == 0 ? prompt : prompt + kRetryReminder))) {
      std::smatch m;
      if (std::regex_match(line, m, issue_re)) {
        clusters.push_back({m[1].str(), {}, {}});
      } else if (!clusters.empty() && std::regex_match(line, m, desc_re)) {
        clusters.back().description = m[1].str();
      } else if (!clusters.empty() && std::regex_match(line, m, members_re)) {
        std::string list = m[1].str();
        for (std::sregex_iterator it(list.begin(), list.end(), number_re), end; it != end; ++it) {
          std::size_t n = std::stoul(it->str());
          if (n >= 1 && n <= candidates.size()) clusters.back().members.push_back(n - 1);
        }
      }
    }
    if (!clusters.empty()) return clusters;
  }
  throw Error(ErrorCode::UnparseableVerdict, "clustering answer has no ISSUE blocks");
}

std::vector<std::vector<std::size_t>> LlmAggregatorBackend::match(std::span<const PoolItem> batch,
                                                                  std::span<const Insight> insights) {
  std::string insight_list;
  for (std::size_t i = 0; i < insights.size(); ++i)
    insight_list += "[" + std::to_string(i + 1) + "] " + insights[i].title + "\n";
  std::string items;
  for (std::size_t i = 0; i < batch.size(); ++i)
    items += "[" + std::to_string(i + 1) + "] " + batch[i].critique_text + "\n";
  const std::string prompt = fill(kMatchPrompt, {{"insights", insight_list}, {"items", items}});
  static const std::regex number_re(R"(\d+)");
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto lines = numbered_lines(call(attempt == 0 ? prompt : prompt + kRetryReminder));
    if (lines.empty()) continue;
    std::vector<std::vector<std::size_t>> out(batch.size());
    for (const auto& [index, text] : lines) {
      if (index < 1 || index > batch.size() || is_none(text)) continue;
      for (std::sregex_iterator it(text.begin(), text.end(), number_re), end; it != end; ++it) {
        std::size_t n = std::stoul(it->str());
        if (n >= 1 && n <= insights.size()) out[index - 1].push_back(n - 1);
      }
    }
    return out;
  }
  throw Error(ErrorCode::UnparseableVerdict, "matching answer has no numbered lines");
}

// ---------------------------------------------------------------------------
// Phases

std::vector<Candidate> extract_issue_statements(const FeedbackPool& pool, AggregatorBackend& backend,
                                                const AggregatorConfig& config, std::vector<std::string>* warnings) {
  if (pool.items.empty()) throw Error(ErrorCode::PreconditionViolation, "cannot extract issues from an empty pool");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < pool.items.size(); ++i)
    if (pool.items[i].score < config.praise_threshold) eligible.push_back(i);

  std::vector<Candidate> candidates;
  const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);
  for (std::size_t start = 0; start < eligible.size(); start += batch_size) {
    const std::size_t end = std::min(eligible.size(), start + batch_size);
    std::vector<PoolItem> batch;
    for (std::size_t i = start; i < end; ++i) batch.push_back(pool.items[eligible[i]]);
    std::vector<std::vector<std::string>> statements;
    try {
      statements = backend.extract(batch);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparseableVerdict) throw;
      if (warnings) warnings->push_back("skipped unparseable extraction batch at item " + std::to_string(eligible[start]));
      continue;
    }
    if (statements.size() != batch.size()) {
      if (warnings) warnings->push_back("extraction batch size mismatch at item " + std::to_string(eligible[start]));
      continue;
    }
    for (std::size_t b = 0; b < batch.size(); ++b) {
      for (auto& s : statements[b]) {
        std::string cleaned = clean_statement(s);
        if (!cleaned.empty()) candidates.push_back({std::move(cleaned), eligible[start + b]});
      }
    }
  }
  return candidates;
}

ClusterResult cluster_issues(const std::vector<Candidate>& candidates, AggregatorBackend& backend,
                             const AggregatorConfig& config, const PoolScope& scope) {
  if (candidates.empty()) throw Error(ErrorCode::PreconditionViolation, "cannot cluster zero candidates");
  ClusterResult result;
  result.insights.scope = scope;

  std::vector<Cluster> clusters;
  try {
    clusters = backend.cluster(candidates);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::UnparseableVerdict) throw;
    result.insights.warnings.push_back("clustering answer unparseable; grouped by normalized text instead");
    clusters = MockAggregatorBackend().cluster(candidates);
  }

  // Each candidate counts toward at most one cluster.
  std::vector<bool> taken(candidates.size(), false);
  std::vector<Cluster> valid;
  for (auto& c : clusters) {
    std::vector<std::size_t> members;
    for (std::size_t m : c.members)
      if (m < candidates.size() && !taken[m]) {
        taken[m] = true;
        members.push_back(m);
      }
    if (members.empty()) continue;
    c.members = std::move(members);
    valid.push_back(std::move(c));
  }

  // A consolidation model that lumps pairwise-unrelated statements into one
  // bucket is misbehaving.
  if (candidates.size() >= 4 && valid.size() == 1 && valid.front().members.size() == candidates.size()) {
    std::vector<std::set<std::string>> words;
    for (const auto& c : candidates) words.push_back(word_set(c.statement));
    bool pairwise_distinct = true;
    for (std::size_t a = 0; a < words.size() && pairwise_distinct; ++a)
      for (std::size_t b = a + 1; b < words.size(); ++b)
        if (jaccard(words[a], words[b]) >= 0.2) {
          pairwise_distinct = false;
          break;
        }
    if (pairwise_distinct)
      throw Error(ErrorCode::DegenerateClustering, std::to_string(candidates.size()) +
                                                       " unrelated statements were merged into a single issue");
  }

  struct Entry {
    Insight insight;
    std::set<std::size_t> items;
  };
  std::vector<Entry> entries;
  // Support counts distinct pool items: one critique repeating a statement is
  // still one observation.
  for (auto& c : valid) {
    Entry e;
    for (std::size_t m : c.members) e.items.insert(candidates[m].item_index);
    if (e.items.size() < config.min_support) continue;
    e.insight.scope = scope;
    e.insight.title = truncate_title(clean_statement(c.title).empty() ? candidates[c.members.front()].statement
                                                                      : clean_statement(c.title));
    e.insight.description = trim(c.description).empty() ? "Recurring finding: " + e.insight.title + "."
                                                         : trim(c.description);
    e.insight.frequency = e.items.size();
    entries.push_back(std::move(e));
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.insight.frequency != b.insight.frequency) return a.insight.frequency > b.insight.frequency;
    return a.insight.title < b.insight.title;
  });
  // No cap here: matching can still change frequencies, so max_insights is
  // applied to the final counts in assign_instances.
  for (std::size_t i = 0; i < entries.size(); ++i) {
    entries[i].insight.insight_id = "C" + std::to_string(i + 1);
    result.insights.insights.push_back(std::move(entries[i].insight));
    result.source_items.push_back(std::move(entries[i].items));
  }
  return result;
}

InsightSet assign_instances(const ClusterResult& clusters, const FeedbackPool& pool, AggregatorBackend& backend,
                            const AggregatorConfig& config) {
  const auto& insights = clusters.insights.insights;
  InsightSet out;
  out.scope = pool.scope;
  out.pool_size = pool.items.size();
  out.warnings = clusters.insights.warnings;

  std::vector<std::set<std::size_t>> per_item(pool.items.size());
  for (std::size_t i = 0; i < insights.size() && i < clusters.source_items.size(); ++i)
    for (std::size_t item : clusters.source_items[i])
      if (item < per_item.size()) per_item[item].insert(i);

  if (!insights.empty()) {
    std::vector<std::size_t> eligible;
    for (std::size_t i = 0; i < pool.items.size(); ++i)
      if (pool.items[i].score < config.praise_threshold) eligible.push_back(i);
    const std::size_t batch_size = std::max<std::size_t>(1, config.batch_size);
    for (std::size_t start = 0; start < eligible.size(); start += batch_size) {
      const std::size_t end = std::min(eligible.size(), start + batch_size);
      std::vector<PoolItem> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(pool.items[eligible[i]]);
      try {
        auto matches = backend.match(batch, insights);
        for (std::size_t b = 0; b < matches.size() && b < batch.size(); ++b)
          for (std::size_t ins : matches[b])
            if (ins < insights.size()) per_item[eligible[start + b]].insert(ins);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::UnparseableVerdict) throw;
        out.warnings.push_back("matching batch at item " + std::to_string(eligible[start]) +
                               " unparseable; kept provenance links only");
      }
    }
  }

  std::vector<Insight> assigned(insights.begin(), insights.end());
  for (auto& ins : assigned) ins.instance_refs.clear();
  for (std::size_t item = 0; item < per_item.size(); ++item)
    for (std::size_t ins : per_item[item]) assigned[ins].instance_refs.push_back(pool.items[item].ref);

  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < assigned.size(); ++i) {
    assigned[i].frequency = assigned[i].instance_refs.size();
    if (assigned[i].frequency >= config.min_support) keep.push_back(i);
  }
  std::stable_sort(keep.begin(), keep.end(), [&](std::size_t a, std::size_t b) {
    if (assigned[a].frequency != assigned[b].frequency) return assigned[a].frequency > assigned[b].frequency;
    return assigned[a].title < assigned[b].title;
  });
  if (keep.size() > config.max_insights) keep.resize(config.max_insights);

  const std::string prefix = pool.scope.is_system() ? "S" : "I";
  std::vector<Insight> final_set;
  std::set<std::size_t> surviving(keep.begin(), keep.end());
  for (std::size_t i : keep) {
    final_set.push_back(assigned[i]);
    final_set.back().insight_id = prefix + std::to_string(final_set.size());
    final_set.back().scope = pool.scope;
  }

  std::size_t assigned_items = 0;
  for (const auto& links : per_item)
    if (std::any_of(links.begin(), links.end(), [&](std::size_t ins) { return surviving.count(ins) > 0; }))
      ++assigned_items;
  out.insights = std::move(final_set);
  out.assigned_items = assigned_items;
  out.coverage = out.pool_size == 0 ? 0.0 : static_cast<double>(assigned_items) / static_cast<double>(out.pool_size);
  return out;
}

InsightSet aggregate_pool(const FeedbackPool& pool, AggregatorBackend& backend, const AggregatorConfig& config) {
  if (pool.items.empty()) return empty_set(pool, "empty pool");
  if (pool.items.size() < config.min_pool_size) return empty_set(pool, "insufficient data");
  std::vector<std::string> warnings;
  auto candidates = extract_issue_statements(pool, backend, config, &warnings);
  if (candidates.empty()) {
    InsightSet set = empty_set(pool, "no failure findings");
    set.warnings = std::move(warnings);
    return set;
  }
  ClusterResult clusters = cluster_issues(candidates, backend, config, pool.scope);
  InsightSet set = assign_instances(clusters, pool, backend, config);
  warnings.insert(warnings.end(), set.warnings.begin(), set.warnings.end());
  set.warnings = std::move(warnings);
  return set;
}

AggregationResult aggregate(const std::vector<TraceEvaluationRecord>& records, const TraceCorpus& corpus,
                            AggregatorBackend& backend, const AggregatorConfig& config) {
  Pools pools = build_pools(records, corpus);
  std::vector<const FeedbackPool*> order{&pools.system};
  for (const auto& [node, pool] : pools.nodes) order.push_back(&pool);

  std::vector<InsightSet> sets(order.size());
  parallel_for(order.size(), config.max_parallel, [&](std::size_t i) {
    try {
      sets[i] = aggregate_pool(*order[i], backend, config);
    } catch (const std::exception& e) {
      sets[i] = empty_set(*order[i], "aggregation failed");
      sets[i].warnings.push_back(e.what());
    }
  });

  AggregationResult result;
  result.system = std::move(sets[0]);
  for (std::size_t i = 1; i < order.size(); ++i) result.nodes[*order[i]->scope.node_id] = std::move(sets[i]);
  return result;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(Json& j, const SourceRef& ref) {
  j = Json{{"trace_id", ref.trace_id}};
  j["step_index"] = ref.step_index ? Json(*ref.step_index) : Json(nullptr);
  j["rubric_id"] = ref.rubric_id ? Json(*ref.rubric_id) : Json(nullptr);
}

void from_json(const Json& j, SourceRef& ref) {
  ref.trace_id = j.at("trace_id").get<std::string>();
  auto step = j.value("step_index", Json(nullptr));
  ref.step_index = step.is_null() ? std::nullopt : std::optional<std::size_t>(step.get<std::size_t>());
  auto rubric = j.value("rubric_id", Json(nullptr));
  ref.rubric_id = rubric.is_null() ? std::nullopt : std::optional<std::string>(rubric.get<std::string>());
}

void to_json(Json& j, const InsightSet& set) {
  Json insights = Json::array();
  for (const auto& ins : set.insights) {
    insights.push_back({{"insight_id", ins.insight_id},
                        {"title", ins.title},
                        {"description", ins.description},
                        {"frequency", ins.frequency},
                        {"instance_refs", ins.instance_refs}});
  }
  j = Json{{"scope", {{"node_id", set.scope.node_id ? Json(*set.scope.node_id) : Json(nullptr)}}},
           {"insights", insights},
           {"coverage", set.coverage},
           {"pool_size", set.pool_size},
           {"assigned_items", set.assigned_items},
           {"note", set.note ? Json(*set.note) : Json(nullptr)},
           {"warnings", set.warnings}};
}

void from_json(const Json& j, InsightSet& set) {
  const Json scope = j.at("scope");
  set.scope.node_id = scope.at("node_id").is_null() ? std::nullopt
                                                    : std::optional<std::string>(scope.at("node_id").get<std::string>());
  set.insights.clear();
  for (const auto& item : j.at("insights")) {
    Insight ins;
    ins.insight_id = item.at("insight_id").get<std::string>();
    ins.title = item.at("title").get<std::string>();
    ins.description = item.at("description").get<std::string>();
    ins.frequency = item.at("frequency").get<std::size_t>();
    ins.instance_refs = item.at("instance_refs").get<std::vector<SourceRef>>();
    ins.scope = set.scope;
    set.insights.push_back(std::move(ins));
  }
  set.coverage = j.at("coverage").get<double>();
  set.pool_size = j.at("pool_size").get<std::size_t>();
  set.assigned_items = j.at("assigned_items").get<std::size_t>();
  set.note = j.at("note").is_null() ? std::nullopt : std::optional<std::string>(j.at("note").get<std::string>());
  set.warnings = j.value("warnings", std::vector<std::string>{});
}

}  // namespace aclear
