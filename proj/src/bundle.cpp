#include "aclear/bundle.hpp"

#include <cctype>
#include <set>

#include "aclear/error.hpp"

namespace aclear {

namespace {

constexpr std::string_view kManifest = "manifest.json";
constexpr std::string_view kCorpusDir = "corpus/";
constexpr std::string_view kEvaluationsDir = "evaluations/";
constexpr std::string_view kSystemInsights = "insights/system.json";
constexpr std::string_view kNodeInsightsDir = "insights/nodes/";
constexpr std::string_view kTopology = "analytics/topology.json";
constexpr std::string_view kNodeStats = "analytics/node_stats.json";
constexpr std::string_view kReliability = "analytics/reliability.json";

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json parse_member(const ZipEntry& entry) {
  try {
    return Json::parse(entry.data);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::CorruptBundle, std::string(entry.name) + " is not valid JSON: " + e.what());
  }
}

template <typename T>
T decode(const ZipEntry& entry) {
  try {
    return parse_member(entry).get<T>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::CorruptBundle, entry.name + " has an unexpected shape: " + e.what());
  }
}

[[noreturn]] void dangling(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::ReferenceError, where + ": " + what + " does not resolve");
}

void check_ref(const SourceRef& ref, const EvaluationBundle& b,
               const std::map<std::string, const TraceEvaluationRecord*>& records, const std::string& where,
               const std::optional<std::string>& node) {
  const Trace* trace = b.corpus.find(ref.trace_id);
  if (!trace) dangling(where, "trace '" + ref.trace_id + "'");
  if (ref.step_index) {
    if (*ref.step_index >= trace->steps.size())
      dangling(where, "step " + std::to_string(*ref.step_index) + " of trace '" + ref.trace_id + "'");
    if (node && trace->steps[*ref.step_index].node_id != *node)
      dangling(where, "step " + std::to_string(*ref.step_index) + " of trace '" + ref.trace_id + "' in node '" +
                          *node + "'");
  }
  if (ref.rubric_id) {
    auto it = records.find(ref.trace_id);
    bool found = false;
    if (it != records.end() && it->second->rubric_set)
      for (const auto& r : it->second->rubric_set->rubrics) found = found || r.rubric_id == *ref.rubric_id;
    if (!found) dangling(where, "rubric '" + *ref.rubric_id + "' of trace '" + ref.trace_id + "'");
  }
}

void check_insight_set(const InsightSet& set, const EvaluationBundle& b,
                       const std::map<std::string, const TraceEvaluationRecord*>& records, const std::string& where) {
  std::set<std::string> ids;
  for (const auto& ins : set.insights) {
    if (!ids.insert(ins.insight_id).second)
      throw Error(ErrorCode::ReferenceError, where + ": duplicate insight id '" + ins.insight_id + "'");
    if (ins.frequency != ins.instance_refs.size())
      throw Error(ErrorCode::ReferenceError, where + ": insight '" + ins.insight_id + "' frequency " +
                                                 std::to_string(ins.frequency) + " disagrees with " +
                                                 std::to_string(ins.instance_refs.size()) + " instance refs");
    for (const auto& ref : ins.instance_refs)
      check_ref(ref, b, records, where + " insight '" + ins.insight_id + "'", set.scope.node_id);
  }
}

}  // namespace

bool Manifest::operator==(const Manifest& o) const {
  auto same_failures = failures.size() == o.failures.size() &&
                       std::equal(failures.begin(), failures.end(), o.failures.begin(), [](const auto& a, const auto& b) {
                         return a.trace_id == b.trace_id && a.message == b.message;
                       });
  return format_version == o.format_version && created_at == o.created_at && config == o.config &&
         corpus_summary == o.corpus_summary && judge_identity == o.judge_identity && same_failures &&
         notes == o.notes;
}

bool EvaluationBundle::operator==(const EvaluationBundle& o) const {
  return manifest == o.manifest && corpus.corpus_id() == o.corpus.corpus_id() &&
         corpus.traces() == o.corpus.traces() && evaluations == o.evaluations &&
         system_insights == o.system_insights && node_insights == o.node_insights && topology == o.topology &&
         node_stats == o.node_stats && reliability == o.reliability;
}

Json summarize_corpus(const TraceCorpus& corpus, const LoadSummary* load) {
  Json j{{"corpus_id", corpus.corpus_id()},
         {"trace_count", corpus.size()},
         {"step_count", corpus.total_steps()},
         {"nodes", corpus.node_catalog()},
         {"has_ground_truth", corpus.has_ground_truth()}};
  if (load) j["ingestion"] = *load;
  return j;
}

std::string member_name_component(std::string_view id) {
  static constexpr char hex[] = "0123456789ABCDEF";
  std::string out;
  for (std::size_t i = 0; i < id.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(id[i]);
    bool plain = std::isalnum(c) || c == '-' || c == '_' || (c == '.' && i > 0);
    if (plain) {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xF]);
    }
  }
  return out;
}

void check_references(const EvaluationBundle& b) {
  const auto& catalog = b.corpus.node_catalog();
  std::map<std::string, const TraceEvaluationRecord*> records;
  for (const auto& r : b.evaluations) {
    const Trace* trace = b.corpus.find(r.trace_id);
    if (!trace) dangling("evaluations", "trace '" + r.trace_id + "'");
    if (!records.emplace(r.trace_id, &r).second)
      throw Error(ErrorCode::ReferenceError, "evaluations: trace '" + r.trace_id + "' evaluated twice");
    for (const auto& c : r.step_critiques) {
      if (c.trace_id != r.trace_id) dangling("evaluation of '" + r.trace_id + "'", "critique trace '" + c.trace_id + "'");
      if (c.step_index >= trace->steps.size() || trace->steps[c.step_index].node_id != c.node_id)
        dangling("evaluation of '" + r.trace_id + "'",
                 "step " + std::to_string(c.step_index) + " at node '" + c.node_id + "'");
    }
    if (r.rubric_verdicts) {
      std::set<std::string> rubric_ids;
      if (r.rubric_set)
        for (const auto& rb : r.rubric_set->rubrics) rubric_ids.insert(rb.rubric_id);
      for (const auto& v : r.rubric_verdicts->verdicts)
        if (!rubric_ids.count(v.rubric_id)) dangling("evaluation of '" + r.trace_id + "'", "rubric '" + v.rubric_id + "'");
    }
  }
  for (const auto& f : b.manifest.failures)
    if (!b.corpus.find(f.trace_id)) dangling("manifest failures", "trace '" + f.trace_id + "'");

  if (b.system_insights) {
    if (!b.system_insights->scope.is_system())
      throw Error(ErrorCode::ReferenceError, "system insights carry a node scope");
    check_insight_set(*b.system_insights, b, records, "system insights");
  }
  for (const auto& [node, set] : b.node_insights) {
    if (!catalog.count(node)) dangling("node insights", "node '" + node + "'");
    if (set.scope.node_id != node)
      throw Error(ErrorCode::ReferenceError, "insights of node '" + node + "' carry a different scope");
    check_insight_set(set, b, records, "insights of node '" + node + "'");
  }
  for (const auto& n : b.topology.nodes)
    if (!catalog.count(n.node_id)) dangling("topology", "node '" + n.node_id + "'");
  for (const auto& e : b.topology.edges)
    if (!catalog.count(e.from) || !catalog.count(e.to)) dangling("topology", "edge " + e.from + "->" + e.to);
  for (const auto& [node, stats] : b.node_stats) {
    if (!catalog.count(node) || stats.node_id != node) dangling("node stats", "node '" + node + "'");
    auto it = b.node_insights.find(node);
    for (const auto& [insight_id, count] : stats.issue_counts) {
      bool found = it != b.node_insights.end() &&
                   std::any_of(it->second.insights.begin(), it->second.insights.end(),
                               [&](const Insight& ins) { return ins.insight_id == insight_id; });
      if (!found) dangling("node stats of '" + node + "'", "insight '" + insight_id + "'");
    }
  }
  if (b.reliability)
    for (const auto& p : b.reliability->predictions)
      if (!b.corpus.find(p.trace_id)) dangling("reliability report", "trace '" + p.trace_id + "'");
}

std::vector<ZipEntry> bundle_entries(const EvaluationBundle& b) {
  check_references(b);
  std::vector<ZipEntry> entries;
  entries.push_back({std::string(kManifest), dump(b.manifest)});
  for (const auto& t : b.corpus.traces())
    entries.push_back({std::string(kCorpusDir) + member_name_component(t.trace_id) + ".json", dump(t)});
  std::vector<const TraceEvaluationRecord*> records;
  for (const auto& r : b.evaluations) records.push_back(&r);
  std::sort(records.begin(), records.end(), [](auto* a, auto* c) { return a->trace_id < c->trace_id; });
  for (const auto* r : records)
    entries.push_back({std::string(kEvaluationsDir) + member_name_component(r->trace_id) + ".json", dump(*r)});
  if (b.system_insights) entries.push_back({std::string(kSystemInsights), dump(*b.system_insights)});
  for (const auto& [node, set] : b.node_insights)
    entries.push_back({std::string(kNodeInsightsDir) + member_name_component(node) + ".json", dump(set)});
  entries.push_back({std::string(kTopology), dump(b.topology)});
  Json stats = Json::object();
  for (const auto& [node, s] : b.node_stats) stats[node] = s;
  entries.push_back({std::string(kNodeStats), dump(stats)});
  if (b.reliability) entries.push_back({std::string(kReliability), dump(*b.reliability)});
  return entries;
}

std::string bundle_bytes(const EvaluationBundle& bundle) { return build_zip(bundle_entries(bundle)); }

void write_bundle(const EvaluationBundle& bundle, const std::filesystem::path& path) {
  write_file_bytes(path, bundle_bytes(bundle));
}

EvaluationBundle parse_bundle(std::string_view bytes) {
  std::vector<ZipEntry> entries = parse_zip(bytes);
  auto starts_with = [](const std::string& s, std::string_view p) { return s.compare(0, p.size(), p) == 0; };

  const ZipEntry* manifest_entry = nullptr;
  for (const auto& e : entries)
    if (e.name == kManifest) manifest_entry = &e;
  if (!manifest_entry) throw Error(ErrorCode::CorruptBundle, "archive has no manifest.json");

  Json manifest_json = parse_member(*manifest_entry);
  if (!manifest_json.is_object() || !manifest_json.contains("format_version") ||
      !manifest_json.at("format_version").is_number_integer())
    throw Error(ErrorCode::CorruptBundle, "manifest.json lacks an integer format_version");
  const int version = manifest_json.at("format_version").get<int>();
  if (version != kBundleFormatVersion)
    throw Error(ErrorCode::VersionMismatch, "bundle format_version " + std::to_string(version) +
                                                " is not readable by this reader (format_version " +
                                                std::to_string(kBundleFormatVersion) + ")");

  EvaluationBundle b;
  b.manifest = decode<Manifest>(*manifest_entry);
  std::vector<Trace> traces;
  bool have_topology = false, have_stats = false;
  for (const auto& e : entries) {
    if (e.name == kManifest) continue;
    if (starts_with(e.name, kCorpusDir)) {
      traces.push_back(decode<Trace>(e));
    } else if (starts_with(e.name, kEvaluationsDir)) {
      b.evaluations.push_back(decode<TraceEvaluationRecord>(e));
    } else if (e.name == kSystemInsights) {
      b.system_insights = decode<InsightSet>(e);
    } else if (starts_with(e.name, kNodeInsightsDir)) {
      auto set = decode<InsightSet>(e);
      if (!set.scope.node_id) throw Error(ErrorCode::CorruptBundle, e.name + " has no node scope");
      std::string node = *set.scope.node_id;
      b.node_insights[node] = std::move(set);
    } else if (e.name == kTopology) {
      b.topology = decode<TopologyGraph>(e);
      have_topology = true;
    } else if (e.name == kNodeStats) {
      b.node_stats = decode<std::map<std::string, NodeStats>>(e);
      have_stats = true;
    } else if (e.name == kReliability) {
      b.reliability = decode<ReliabilityReport>(e);
    }
  }
  if (!have_topology || !have_stats)
    throw Error(ErrorCode::CorruptBundle, "archive lacks analytics/topology.json or analytics/node_stats.json");

  std::sort(traces.begin(), traces.end(), [](const Trace& a, const Trace& c) { return a.trace_id < c.trace_id; });
  std::string corpus_id = b.manifest.corpus_summary.value("corpus_id", std::string());
  try {
    b.corpus = TraceCorpus(corpus_id, std::move(traces));
  } catch (const Error& e) {
    throw Error(ErrorCode::CorruptBundle, e.detail());
  }
  std::sort(b.evaluations.begin(), b.evaluations.end(),
            [](const auto& a, const auto& c) { return a.trace_id < c.trace_id; });
  check_references(b);
  return b;
}

EvaluationBundle read_bundle(const std::filesystem::path& path) { return parse_bundle(read_file_bytes(path)); }

void to_json(Json& j, const Manifest& m) {
  Json failures = Json::array();
  for (const auto& f : m.failures) failures.push_back({{"trace_id", f.trace_id}, {"message", f.message}});
  j = Json{{"format_version", m.format_version},
           {"created_at", format_iso8601(m.created_at)},
           {"config", m.config},
           {"corpus", m.corpus_summary},
           {"judge", {{"identity", m.judge_identity}}},
           {"failures", failures},
           {"notes", m.notes}};
}

void from_json(const Json& j, Manifest& m) {
  m.format_version = j.at("format_version").get<int>();
  auto created = parse_iso8601(j.at("created_at").get<std::string>());
  if (!created) throw Error(ErrorCode::CorruptBundle, "manifest created_at is not an ISO-8601 timestamp");
  m.created_at = *created;
  m.config = j.value("config", Json::object());
  m.corpus_summary = j.value("corpus", Json::object());
  m.judge_identity = j.at("judge").value("identity", std::string());
  m.failures.clear();
  for (const auto& f : j.value("failures", Json::array()))
    m.failures.push_back({f.at("trace_id").get<std::string>(), f.at("message").get<std::string>()});
  m.notes = j.value("notes", std::vector<std::string>{});
}

}  // namespace aclear
