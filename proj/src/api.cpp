#include "aclear/api.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "aclear/analytics.hpp"
#include "aclear/error.hpp"

namespace aclear {

namespace {

struct BadRequest {
  std::string message;
};

ApiResponse respond(int status, Json body) {
  body["format_version"] = kBundleFormatVersion;
  return {status, std::move(body)};
}

ApiResponse error_response(int status, std::string code, std::string message) {
  return respond(status, Json{{"error", {{"code", std::move(code)}, {"message", std::move(message)}}}});
}

std::optional<std::string> param(const std::multimap<std::string, std::string>& query, const std::string& key) {
  auto it = query.find(key);
  if (it == query.end()) return std::nullopt;
  return it->second;
}

std::optional<double> number_param(const std::multimap<std::string, std::string>& query, const std::string& key) {
  auto text = param(query, key);
  if (!text) return std::nullopt;
  double v = 0.0;
  auto [p, ec] = std::from_chars(text->data(), text->data() + text->size(), v);
  if (ec != std::errc() || p != text->data() + text->size() || std::isnan(v))
    throw BadRequest{key + " must be a number, got '" + *text + "'"};
  return v;
}

std::size_t count_param(const std::multimap<std::string, std::string>& query, const std::string& key,
                        std::size_t fallback, std::size_t max) {
  auto text = param(query, key);
  if (!text) return fallback;
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(text->data(), text->data() + text->size(), v);
  if (ec != std::errc() || p != text->data() + text->size() || text->empty())
    throw BadRequest{key + " must be a non-negative integer, got '" + *text + "'"};
  if (v > max) throw BadRequest{key + " must be at most " + std::to_string(max)};
  return v;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

Json opt(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json ground_truth_json(const std::optional<GroundTruth>& gt) {
  if (!gt) return nullptr;
  if (std::holds_alternative<bool>(*gt)) return std::get<bool>(*gt);
  return std::get<double>(*gt);
}

template <typename T>
Json page(const std::vector<T>& items, std::size_t limit, std::size_t offset) {
  Json arr = Json::array();
  for (std::size_t i = offset; i < items.size() && i < offset + limit; ++i) arr.push_back(items[i]);
  return arr;
}

}  // namespace

BundleApi::BundleApi(std::shared_ptr<const EvaluationBundle> bundle) : bundle_(std::move(bundle)) {
  if (!bundle_) throw Error(ErrorCode::PreconditionViolation, "BundleApi needs a bundle");
  for (const auto& r : bundle_->evaluations) records_[r.trace_id] = &r;
}

ApiResponse BundleApi::handle(std::string_view path, const std::multimap<std::string, std::string>& query) const {
  while (path.size() > 1 && path.back() == '/') path.remove_suffix(1);
  try {
    if (path == "/api/meta") return meta();
    if (path == "/api/system") return system();
    if (path == "/api/nodes") return nodes();
    if (path == "/api/traces") return traces(query);
    constexpr std::string_view nodes_prefix = "/api/nodes/";
    constexpr std::string_view traces_prefix = "/api/traces/";
    if (path.substr(0, nodes_prefix.size()) == nodes_prefix)
      return node(std::string(path.substr(nodes_prefix.size())), query);
    if (path.substr(0, traces_prefix.size()) == traces_prefix)
      return trace(std::string(path.substr(traces_prefix.size())));
  } catch (const BadRequest& e) {
    return error_response(400, "BadRequest", e.message);
  }
  return error_response(404, "NotFound", "no endpoint at '" + std::string(path) + "'");
}

ApiResponse BundleApi::meta() const {
  const auto& b = *bundle_;
  Json trace_ids = Json::array();
  for (const auto& t : b.corpus.traces()) trace_ids.push_back(t.trace_id);
  Json node_insight_ids = Json::object();
  for (const auto& [node, set] : b.node_insights) {
    Json ids = Json::array();
    for (const auto& ins : set.insights) ids.push_back(ins.insight_id);
    node_insight_ids[node] = ids;
  }
  Json system_ids = Json::array();
  if (b.system_insights)
    for (const auto& ins : b.system_insights->insights) system_ids.push_back(ins.insight_id);
  return respond(200, Json{{"manifest", b.manifest},
                           {"nodes", b.corpus.node_catalog()},
                           {"trace_ids", trace_ids},
                           {"insight_ids", {{"system", system_ids}, {"nodes", node_insight_ids}}}});
}

ApiResponse BundleApi::system() const {
  const auto& b = *bundle_;
  return respond(200, Json{{"topology", b.topology},
                           {"scores", global_scores(b.evaluations)},
                           {"insights", b.system_insights ? Json(*b.system_insights) : Json(nullptr)},
                           {"reliability", b.reliability ? Json(*b.reliability) : Json(nullptr)},
                           {"trace_count", b.corpus.size()},
                           {"failures", Json(b.manifest)["failures"]}});
}

ApiResponse BundleApi::nodes() const {
  const auto& b = *bundle_;
  Json list = Json::array();
  for (const auto& node : b.corpus.node_catalog()) {
    Json entry{{"node_id", node}};
    auto st = b.node_stats.find(node);
    entry["step_count"] = st != b.node_stats.end() ? st->second.step_count : 0;
    entry["scored_steps"] = st != b.node_stats.end() ? st->second.scored_steps : 0;
    entry["mean_score"] = st != b.node_stats.end() ? opt(st->second.mean_score) : Json(nullptr);
    auto ins = b.node_insights.find(node);
    entry["insight_count"] = ins != b.node_insights.end() ? ins->second.insights.size() : 0;
    list.push_back(entry);
  }
  return respond(200, Json{{"nodes", list}});
}

ApiResponse BundleApi::node(const std::string& node_id, const std::multimap<std::string, std::string>& query) const {
  const auto& b = *bundle_;
  if (!b.corpus.node_catalog().count(node_id))
    return error_response(404, "UnknownNode", "no node '" + node_id + "' in this bundle");

  const auto min_score = number_param(query, "min_score");
  const auto max_score = number_param(query, "max_score");
  if (min_score && max_score && *min_score > *max_score) throw BadRequest{"min_score exceeds max_score"};
  const auto insight = param(query, "insight");
  const std::size_t limit = count_param(query, "limit", kDefaultPageSize, kMaxPageSize);
  const std::size_t offset = count_param(query, "offset", 0, std::numeric_limits<std::size_t>::max() / 2);

  const InsightSet* set = nullptr;
  if (auto it = b.node_insights.find(node_id); it != b.node_insights.end()) set = &it->second;

  // (trace_id, step_index) -> insight ids of this node.
  std::map<std::pair<std::string, std::size_t>, std::vector<std::string>> links;
  if (set)
    for (const auto& ins : set->insights)
      for (const auto& ref : ins.instance_refs)
        if (ref.step_index) links[{ref.trace_id, *ref.step_index}].push_back(ins.insight_id);
  if (insight && (!set || std::none_of(set->insights.begin(), set->insights.end(),
                                       [&](const Insight& i) { return i.insight_id == *insight; })))
    throw BadRequest{"node '" + node_id + "' has no insight '" + *insight + "'"};

  std::vector<Json> steps;
  for (const auto& t : b.corpus.traces()) {
    const TraceEvaluationRecord* record = nullptr;
    if (auto it = records_.find(t.trace_id); it != records_.end()) record = it->second;
    for (const auto& step : t.steps) {
      if (step.node_id != node_id) continue;
      const StepCritique* critique = nullptr;
      if (record)
        for (const auto& c : record->step_critiques)
          if (c.step_index == step.step_index) critique = &c;
      if ((min_score || max_score) && !critique) continue;
      if (min_score && critique->score < *min_score) continue;
      if (max_score && critique->score > *max_score) continue;
      auto link = links.find({t.trace_id, step.step_index});
      std::vector<std::string> ids = link != links.end() ? link->second : std::vector<std::string>{};
      if (insight && std::find(ids.begin(), ids.end(), *insight) == ids.end()) continue;
      Json entry{{"trace_id", t.trace_id}, {"step_index", step.step_index}, {"insight_ids", ids}};
      entry["score"] = critique ? Json(critique->score) : Json(nullptr);
      entry["justification"] = critique ? Json(critique->justification) : Json(nullptr);
      entry["dimension_scores"] = critique ? Json(critique->dimension_scores) : Json(nullptr);
      steps.push_back(std::move(entry));
    }
  }
  Json stats = nullptr;
  if (auto it = b.node_stats.find(node_id); it != b.node_stats.end()) stats = it->second;
  return respond(200, Json{{"node_id", node_id},
                           {"stats", stats},
                           {"insights", set ? Json(*set) : Json(nullptr)},
                           {"steps", page(steps, limit, offset)},
                           {"total", steps.size()},
                           {"limit", limit},
                           {"offset", offset}});
}

ApiResponse BundleApi::traces(const std::multimap<std::string, std::string>& query) const {
  const auto& b = *bundle_;
  const std::string search = lower(param(query, "search").value_or(""));
  const std::size_t limit = count_param(query, "limit", kDefaultPageSize, kMaxPageSize);
  const std::size_t offset = count_param(query, "offset", 0, std::numeric_limits<std::size_t>::max() / 2);

  std::vector<Json> rows;
  for (const auto& t : b.corpus.traces()) {
    if (!search.empty() && lower(t.trace_id).find(search) == std::string::npos &&
        lower(t.task_text).find(search) == std::string::npos)
      continue;
    Json row{{"trace_id", t.trace_id},
             {"task_text", t.task_text},
             {"step_count", t.steps.size()},
             {"ground_truth", ground_truth_json(t.ground_truth)}};
    auto it = records_.find(t.trace_id);
    row["evaluated"] = it != records_.end();
    for (PredictionMethod m : kAllMethods) {
      Json score = nullptr;
      if (it != records_.end()) {
        try {
          score = predict_trace_score(*it->second, m).score;
        } catch (const Error&) {
        }
      }
      row[to_string(m) + "_score"] = score;
    }
    rows.push_back(std::move(row));
  }
  return respond(200, Json{{"traces", page(rows, limit, offset)}, {"total", rows.size()}, {"limit", limit}, {"offset", offset}});
}

ApiResponse BundleApi::trace(const std::string& trace_id) const {
  const auto& b = *bundle_;
  const Trace* t = b.corpus.find(trace_id);
  if (!t) return error_response(404, "UnknownTrace", "no trace '" + trace_id + "' in this bundle");

  Json failure = nullptr;
  for (const auto& f : b.manifest.failures)
    if (f.trace_id == trace_id) failure = f.message;
  Json insight_ids = Json::array();
  auto collect = [&](const InsightSet& set) {
    Json scope{{"node_id", set.scope.node_id ? Json(*set.scope.node_id) : Json(nullptr)}};
    for (const auto& ins : set.insights)
      if (std::any_of(ins.instance_refs.begin(), ins.instance_refs.end(),
                      [&](const SourceRef& r) { return r.trace_id == trace_id; }))
        insight_ids.push_back({{"scope", scope}, {"insight_id", ins.insight_id}, {"title", ins.title}});
  };
  if (b.system_insights) collect(*b.system_insights);
  for (const auto& [node, set] : b.node_insights) collect(set);

  auto it = records_.find(trace_id);
  return respond(200, Json{{"trace", *t},
                           {"evaluation", it != records_.end() ? Json(*it->second) : Json(nullptr)},
                           {"failure", failure},
                           {"insights", insight_ids}});
}

}  // namespace aclear
