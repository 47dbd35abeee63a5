#include "aclear/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "aclear/error.hpp"
#include "aclear/parallel.hpp"
#include "aclear/zip.hpp"

namespace aclear {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string content_text(const Json& content) {
  if (content.is_null()) return {};
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string out;
    for (const auto& part : content) {
      std::string piece;
      if (part.is_string()) {
        piece = part.get<std::string>();
      } else if (part.is_object() && part.contains("text") && part["text"].is_string()) {
        piece = part["text"].get<std::string>();
      } else if (part.is_object() && part.contains("type")) {
        piece = "[" + part["type"].dump() + "]";
      } else {
        piece = part.dump();
      }
      if (!out.empty()) out += "\n";
      out += piece;
    }
    return out;
  }
  return content.dump();
}

std::string render_message(const Json& message) {
  std::string role = message.value("role", std::string("message"));
  std::string out = role + ": " + content_text(message.value("content", Json(nullptr)));
  if (auto it = message.find("tool_calls"); it != message.end() && it->is_array()) {
    for (const auto& call : *it) {
      const Json& fn = call.value("function", Json::object());
      out += "\n" + role + ": [tool_call] " + fn.value("name", std::string("?")) + "(" +
             content_text(fn.value("arguments", Json(nullptr))) + ")";
    }
  }
  return out;
}

bool looks_like_message(const Json& j) { return j.is_object() && j.contains("role"); }

std::optional<GroundTruth> ground_truth_from(const Json& value, const std::string& key) {
  if (value.is_null()) return std::nullopt;
  if (value.is_boolean()) return value.get<bool>();
  if (value.is_number()) {
    double v = value.get<double>();
    if (!(v >= 0.0 && v <= 1.0))
      throw Error(ErrorCode::InvalidGroundTruth, "ground truth '" + key + "' = " + value.dump() + " outside [0,1]");
    return v;
  }
  if (value.is_string()) {
    std::string s = lower(value.get<std::string>());
    if (s == "success" || s == "true" || s == "pass" || s == "yes" || s == "1") return true;
    if (s == "failure" || s == "false" || s == "fail" || s == "no" || s == "0") return false;
  }
  throw Error(ErrorCode::InvalidGroundTruth, "unrecognized ground truth '" + key + "' = " + value.dump());
}

std::string render_task(const Json& input) {
  if (input.is_string()) return input.get<std::string>();
  if (input.is_object()) {
    for (const char* key : {"task", "input", "question", "query", "prompt"}) {
      if (auto it = input.find(key); it != input.end() && it->is_string()) return it->get<std::string>();
    }
  }
  if (input.is_null()) return {};
  return flatten_messages(input);
}

std::optional<Timestamp> timestamp_of(const Json& obs, const char* key) {
  auto it = obs.find(key);
  if (it == obs.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(ErrorCode::MalformedDocument, std::string("non-string ") + key);
  auto ts = parse_iso8601(it->get<std::string>());
  if (!ts) throw Error(ErrorCode::MalformedDocument, std::string("bad ") + key + " '" + it->get<std::string>() + "'");
  return ts;
}

std::string string_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it != j.end() && it->is_string()) return it->get<std::string>();
  return {};
}

}  // namespace

std::string flatten_messages(const Json& payload) {
  if (payload.is_null()) return {};
  if (payload.is_string()) return payload.get<std::string>();
  if (payload.is_array()) {
    bool all_messages = !payload.empty() && std::all_of(payload.begin(), payload.end(), looks_like_message);
    if (!all_messages) return payload.dump();
    std::string out;
    for (const auto& message : payload) {
      if (!out.empty()) out += "\n";
      out += render_message(message);
    }
    return out;
  }
  if (payload.is_object()) {
    if (auto it = payload.find("messages"); it != payload.end() && it->is_array()) return flatten_messages(*it);
    if (looks_like_message(payload)) return render_message(payload);
    if (auto it = payload.find("content"); it != payload.end() && payload.size() == 1) return content_text(*it);
  }
  return payload.dump();
}

Trace parse_langfuse_export(const Json& document, const IngestOptions& options) {
  if (!document.is_object()) throw Error(ErrorCode::MalformedDocument, "export root is not an object");
  const Json& root = (document.contains("trace") && document["trace"].is_object()) ? document["trace"] : document;
  const Json* observations = nullptr;
  if (auto it = document.find("observations"); it != document.end())
    observations = &*it;
  else if (auto jt = root.find("observations"); jt != root.end())
    observations = &*jt;
  if (observations && !observations->is_array())
    throw Error(ErrorCode::MalformedDocument, "'observations' is not an array");

  Trace trace;
  trace.source = "langfuse";
  trace.trace_id = string_field(root, "id");
  if (trace.trace_id.empty()) throw Error(ErrorCode::MalformedDocument, "trace has no 'id'");

  const Json empty_list = Json::array();
  const Json& obs_list = observations ? *observations : empty_list;
  std::unordered_map<std::string, const Json*> by_id;
  for (const auto& obs : obs_list) {
    if (!obs.is_object()) throw Error(ErrorCode::MalformedDocument, "observation is not an object");
    std::string id = string_field(obs, "id");
    if (!id.empty()) by_id.emplace(std::move(id), &obs);
  }

  auto node_for = [&](const Json& obs) -> std::string {
    if (auto md = obs.find("metadata"); md != obs.end() && md->is_object()) {
      for (const auto& key : options.agent_attribute_keys) {
        if (auto it = md->find(key); it != md->end() && it->is_string() && !it->get<std::string>().empty())
          return it->get<std::string>();
      }
    }
    // Enclosing span: nearest non-generation ancestor with a name.
    std::unordered_set<std::string> visited;
    std::string parent = string_field(obs, "parentObservationId");
    while (!parent.empty() && visited.insert(parent).second) {
      auto it = by_id.find(parent);
      if (it == by_id.end()) break;
      const Json& p = *it->second;
      std::string name = string_field(p, "name");
      if (string_field(p, "type") != "GENERATION" && !name.empty()) return name;
      parent = string_field(p, "parentObservationId");
    }
    return "default";
  };

  struct Pending {
    std::optional<Timestamp> start;
    std::size_t order;
    TraceStep step;
  };
  std::vector<Pending> pending;
  Json other = Json::array();
  for (const auto& obs : obs_list) {
    if (string_field(obs, "type") != "GENERATION") {
      other.push_back(obs);
      continue;
    }
    TraceStep step;
    step.node_id = node_for(obs);
    step.input_text = flatten_messages(obs.value("input", Json(nullptr)));
    step.output_text = flatten_messages(obs.value("output", Json(nullptr)));
    step.started_at = timestamp_of(obs, "startTime");
    step.ended_at = timestamp_of(obs, "endTime");
    if (std::string model = string_field(obs, "model"); !model.empty()) step.model_name = model;
    step.extra = Json::object();
    step.extra["observation_id"] = obs.value("id", Json(nullptr));
    step.extra["name"] = obs.value("name", Json(nullptr));
    for (const char* key : {"metadata", "usage", "usageDetails", "modelParameters", "level", "statusMessage"}) {
      if (auto it = obs.find(key); it != obs.end() && !it->is_null()) step.extra[key] = *it;
    }
    pending.push_back({step.started_at, pending.size(), std::move(step)});
  }
  if (pending.empty()) throw Error(ErrorCode::NoLlmCalls, "trace '" + trace.trace_id + "' has no generations");

  // Missing start times sort last; ties keep document order.
  std::stable_sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
    if (a.start && b.start) return *a.start < *b.start;
    return a.start.has_value() && !b.start.has_value();
  });
  for (std::size_t i = 0; i < pending.size(); ++i) {
    pending[i].step.step_index = i;
    trace.steps.push_back(std::move(pending[i].step));
  }

  trace.task_text = render_task(root.value("input", Json(nullptr)));
  if (trace.task_text.empty())
    throw Error(ErrorCode::MissingTask, "trace '" + trace.trace_id + "' has no task input");

  const Json metadata = root.value("metadata", Json(nullptr));
  if (metadata.is_object() && metadata.contains(options.ground_truth_key)) {
    trace.ground_truth = ground_truth_from(metadata[options.ground_truth_key], options.ground_truth_key);
  } else if (auto scores = root.find("scores"); scores != root.end() && scores->is_array()) {
    for (const auto& score : *scores) {
      if (score.is_object() && string_field(score, "name") == options.ground_truth_key)
        trace.ground_truth = ground_truth_from(score.value("value", Json(nullptr)), options.ground_truth_key);
    }
  }

  trace.extra = Json::object();
  for (const char* key : {"name", "metadata", "tags", "output", "sessionId", "userId", "timestamp"}) {
    if (auto it = root.find(key); it != root.end() && !it->is_null()) trace.extra[key] = *it;
  }
  if (!other.empty()) trace.extra["observations"] = std::move(other);
  return trace;
}

Trace parse_langfuse_export(std::string_view text, const IngestOptions& options) {
  Json document = Json::parse(text, nullptr, false);
  if (document.is_discarded()) throw Error(ErrorCode::MalformedDocument, "document is not valid JSON");
  return parse_langfuse_export(document, options);
}

Trace convert_generic(std::string trace_id, std::string task_text, const std::vector<GenericRecord>& records,
                      std::optional<GroundTruth> ground_truth) {
  if (records.empty()) throw Error(ErrorCode::EmptyRecords, "trace '" + trace_id + "' has no records");
  Trace trace;
  trace.trace_id = std::move(trace_id);
  trace.task_text = std::move(task_text);
  trace.ground_truth = ground_truth;
  trace.source = "generic";
  for (std::size_t i = 0; i < records.size(); ++i) {
    TraceStep step;
    step.step_index = i;
    step.node_id = records[i].node_id.empty() ? "default" : records[i].node_id;
    step.input_text = records[i].input_text;
    step.output_text = records[i].output_text;
    step.extra = records[i].metadata.is_null() ? Json::object() : records[i].metadata;
    trace.steps.push_back(std::move(step));
  }
  return trace;
}

Trace parse_generic_document(const Json& document, const IngestOptions& options) {
  if (!document.is_object()) throw Error(ErrorCode::MalformedDocument, "generic document root is not an object");
  std::string trace_id = string_field(document, "trace_id");
  if (trace_id.empty()) throw Error(ErrorCode::MalformedDocument, "generic document has no 'trace_id'");
  std::string task = string_field(document, "task");
  if (task.empty()) throw Error(ErrorCode::MissingTask, "trace '" + trace_id + "' has no 'task'");
  auto records_it = document.find("records");
  if (records_it == document.end() || !records_it->is_array())
    throw Error(ErrorCode::MalformedDocument, "generic document has no 'records' array");

  std::vector<GenericRecord> records;
  for (const auto& r : *records_it) {
    if (!r.is_object()) throw Error(ErrorCode::MalformedDocument, "record is not an object");
    records.push_back({string_field(r, "node_id"), flatten_messages(r.value("input", Json(nullptr))),
                       flatten_messages(r.value("output", Json(nullptr))), r.value("metadata", Json::object())});
  }
  std::optional<GroundTruth> gt;
  const Json metadata = document.value("metadata", Json::object());
  if (auto it = document.find("ground_truth"); it != document.end())
    gt = ground_truth_from(*it, "ground_truth");
  else if (metadata.is_object() && metadata.contains(options.ground_truth_key))
    gt = ground_truth_from(metadata[options.ground_truth_key], options.ground_truth_key);

  Trace trace = convert_generic(std::move(trace_id), std::move(task), records, gt);
  if (metadata.is_object() && !metadata.empty()) trace.extra["metadata"] = metadata;
  return trace;
}

ValidationReport validate_trace(const Trace& trace) {
  ValidationReport report;
  report.trace_id = trace.trace_id;
  auto error = [&](std::string code, std::string message, std::optional<std::size_t> step = std::nullopt) {
    report.errors.push_back({std::move(code), std::move(message), step});
  };
  auto warn = [&](std::string code, std::string message, std::optional<std::size_t> step = std::nullopt) {
    report.warnings.push_back({std::move(code), std::move(message), step});
  };

  if (trace.trace_id.empty()) error("EMPTY_TRACE_ID", "trace_id is empty");
  if (trace.task_text.empty()) error("EMPTY_TASK", "task_text is empty");
  if (trace.steps.empty()) error("NO_STEPS", "trace has no steps");
  if (trace.ground_truth) {
    if (const double* score = std::get_if<double>(&*trace.ground_truth); score && !(*score >= 0.0 && *score <= 1.0))
      error("GROUND_TRUTH_OUT_OF_RANGE", "ground truth score outside [0,1]");
  }
  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    const TraceStep& step = trace.steps[i];
    if (step.step_index != i) {
      error("NON_CONSECUTIVE_STEPS",
            "expected step_index " + std::to_string(i) + ", found " + std::to_string(step.step_index), i);
    }
    if (step.node_id.empty()) error("EMPTY_NODE_ID", "node_id is empty", i);
    if (step.started_at && step.ended_at && *step.ended_at < *step.started_at)
      error("TIME_REVERSED", "ended_at precedes started_at", i);
    if (step.output_text.empty()) warn("EMPTY_OUTPUT", "output_text is empty", i);
    if (step.input_text.empty()) warn("EMPTY_INPUT", "input_text is empty", i);
  }
  return report;
}

namespace {

std::mutex& registry_mutex() {
  static std::mutex m;
  return m;
}

std::map<std::string, TraceAdapter>& registry() {
  static std::map<std::string, TraceAdapter> adapters = {
      {"langfuse", [](const Json& doc, const IngestOptions& o) { return parse_langfuse_export(doc, o); }},
      {"generic", [](const Json& doc, const IngestOptions& o) { return parse_generic_document(doc, o); }},
  };
  return adapters;
}

TraceAdapter find_adapter(std::string_view name) {
  std::lock_guard lock(registry_mutex());
  auto it = registry().find(std::string(name));
  if (it == registry().end()) throw Error(ErrorCode::UnknownAdapter, "no adapter named '" + std::string(name) + "'");
  return it->second;
}

struct Document {
  std::string origin;
  std::string text;
};

}  // namespace

void register_adapter(std::string name, TraceAdapter adapter) {
  std::lock_guard lock(registry_mutex());
  registry()[std::move(name)] = std::move(adapter);
}

std::vector<std::string> registered_adapters() {
  std::lock_guard lock(registry_mutex());
  std::vector<std::string> names;
  for (const auto& [name, _] : registry()) names.push_back(name);
  return names;
}

LoadResult load_corpus(const std::filesystem::path& path, std::string_view adapter_name,
                       const IngestOptions& options) {
  namespace fs = std::filesystem;
  TraceAdapter adapter = find_adapter(adapter_name);

  std::vector<Document> documents;
  std::string corpus_id;
  std::error_code ec;
  if (fs::is_directory(path, ec)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(path)) {
      if (entry.is_regular_file() && lower(entry.path().extension().string()) == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files)
      documents.push_back({fs::relative(file, path).generic_string(), read_file_bytes(file)});
    corpus_id = fs::absolute(path).lexically_normal().filename().string();
    if (corpus_id.empty()) corpus_id = fs::absolute(path).lexically_normal().parent_path().filename().string();
  } else if (fs::is_regular_file(path, ec) && lower(path.extension().string()) == ".zip") {
    std::vector<ZipEntry> members;
    try {
      members = parse_zip(read_file_bytes(path));
    } catch (const Error& e) {
      throw Error(ErrorCode::MalformedDocument, "archive " + path.string() + ": " + e.what());
    }
    std::sort(members.begin(), members.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    for (auto& m : members) {
      if (lower(fs::path(m.name).extension().string()) == ".json") documents.push_back({m.name, std::move(m.data)});
    }
    corpus_id = path.stem().string();
  } else {
    throw Error(ErrorCode::IoError, "input path " + path.string() + " is neither a directory nor a .zip archive");
  }

  struct Outcome {
    std::optional<Trace> trace;
    std::optional<LoadFailure> failure;
    ValidationReport report;
  };
  std::vector<Outcome> outcomes(documents.size());
  parallel_for(documents.size(), options.max_parallel, [&](std::size_t i) {
    const Document& doc = documents[i];
    Outcome& out = outcomes[i];
    Json parsed = Json::parse(doc.text, nullptr, false);
    if (parsed.is_discarded()) {
      out.failure = LoadFailure{doc.origin, std::string(to_string(ErrorCode::MalformedDocument)), "invalid JSON"};
      return;
    }
    try {
      Trace trace = adapter(parsed, options);
      out.report = validate_trace(trace);
      if (!out.report.ok()) {
        std::string message;
        for (const auto& issue : out.report.errors) message += (message.empty() ? "" : "; ") + issue.code;
        out.failure = LoadFailure{doc.origin, "InvalidTrace", message};
        return;
      }
      out.trace = std::move(trace);
    } catch (const Error& e) {
      out.failure = LoadFailure{doc.origin, std::string(to_string(e.code())), e.what()};
    } catch (const Json::exception& e) {
      out.failure = LoadFailure{doc.origin, std::string(to_string(ErrorCode::MalformedDocument)), e.what()};
    }
  });

  LoadSummary summary;
  summary.files_seen = documents.size();
  std::vector<std::pair<std::size_t, Trace>> traces;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].failure) {
      summary.failures.push_back(*outcomes[i].failure);
      continue;
    }
    if (!outcomes[i].report.warnings.empty()) summary.warnings.push_back(outcomes[i].report);
    traces.emplace_back(i, std::move(*outcomes[i].trace));
  }
  std::stable_sort(traces.begin(), traces.end(),
                   [](const auto& a, const auto& b) { return a.second.trace_id < b.second.trace_id; });
  std::vector<Trace> unique;
  for (auto& [i, trace] : traces) {
    if (!unique.empty() && unique.back().trace_id == trace.trace_id) {
      summary.failures.push_back({documents[i].origin, "DuplicateTraceId", "trace_id '" + trace.trace_id + "' already loaded"});
      continue;
    }
    unique.push_back(std::move(trace));
  }
  if (unique.empty()) {
    throw Error(ErrorCode::EmptyCorpus, "no valid traces under " + path.string() + " (" +
                                            std::to_string(documents.size()) + " documents, " +
                                            std::to_string(summary.failures.size()) + " failures)");
  }
  summary.traces_loaded = unique.size();
  return LoadResult{TraceCorpus(corpus_id, std::move(unique)), std::move(summary)};
}

std::map<std::string, std::vector<StepRef>> group_steps_by_node(const TraceCorpus& corpus) {
  std::map<std::string, std::vector<StepRef>> groups;
  for (const auto& trace : corpus.traces())
    for (const auto& step : trace.steps) groups[step.node_id].push_back({trace.trace_id, step.step_index});
  return groups;
}

void to_json(Json& j, const LoadSummary& summary) {
  Json failures = Json::array();
  for (const auto& f : summary.failures) failures.push_back({{"file", f.file}, {"code", f.code}, {"message", f.message}});
  Json warnings = Json::array();
  for (const auto& w : summary.warnings) warnings.push_back(w);
  j = Json{{"files_seen", summary.files_seen},
           {"traces_loaded", summary.traces_loaded},
           {"failures", failures},
           {"warnings", warnings}};
}

}  // namespace aclear
