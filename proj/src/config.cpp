#include "aclear/config.hpp"

#include <unistd.h>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "aclear/error.hpp"
#include "aclear/ingest.hpp"

namespace aclear {

namespace {

namespace fs = std::filesystem;

Json scalar_to_json(const YAML::Node& node) {
  const std::string& text = node.Scalar();
  if (node.Tag() == "!") return text;  // quoted
  if (text.empty() || text == "~" || text == "null" || text == "Null" || text == "NULL") return nullptr;
  if (text == "true" || text == "True" || text == "TRUE") return true;
  if (text == "false" || text == "False" || text == "FALSE") return false;
  std::int64_t i = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), i);
  if (ec == std::errc() && p == text.data() + text.size()) return i;
  double d = 0.0;
  auto [q, ec2] = std::from_chars(text.data(), text.data() + text.size(), d);
  if (ec2 == std::errc() && q == text.data() + text.size()) return d;
  return text;
}

Json node_to_json(const YAML::Node& node) {
  switch (node.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar:
      return scalar_to_json(node);
    case YAML::NodeType::Sequence: {
      Json arr = Json::array();
      for (const auto& child : node) arr.push_back(node_to_json(child));
      return arr;
    }
    case YAML::NodeType::Map: {
      Json obj = Json::object();
      for (const auto& kv : node) obj[kv.first.as<std::string>()] = node_to_json(kv.second);
      return obj;
    }
  }
  return nullptr;
}

/// Collects field-level problems so one run reports all of them.
class Reader {
 public:
  std::vector<std::string> problems;

  void allow(const Json& section, const std::string& prefix, std::initializer_list<const char*> keys) {
    if (!section.is_object()) return;
    std::set<std::string> allowed(keys.begin(), keys.end());
    for (const auto& [key, value] : section.items())
      if (!allowed.count(key)) problems.push_back("unknown key '" + prefix + key + "'");
  }

  const Json* section(const Json& parent, const char* key, const std::string& path) {
    if (!parent.is_object() || !parent.contains(key) || parent.at(key).is_null()) return nullptr;
    if (!parent.at(key).is_object()) {
      problems.push_back(path + ": expected a mapping");
      return nullptr;
    }
    return &parent.at(key);
  }

  void str(const Json* s, const char* key, const std::string& path, std::string& out) {
    if (!s || !s->contains(key) || s->at(key).is_null()) return;
    const Json& v = s->at(key);
    if (v.is_string()) out = v.get<std::string>();
    else if (v.is_number() || v.is_boolean()) out = v.dump();
    else problems.push_back(path + ": expected a string");
  }

  void boolean(const Json* s, const char* key, const std::string& path, bool& out) {
    if (!s || !s->contains(key) || s->at(key).is_null()) return;
    if (s->at(key).is_boolean()) out = s->at(key).get<bool>();
    else problems.push_back(path + ": expected true or false");
  }

  template <typename T>
  void integer(const Json* s, const char* key, const std::string& path, T& out, std::int64_t min,
               std::int64_t max) {
    if (!s || !s->contains(key) || s->at(key).is_null()) return;
    const Json& v = s->at(key);
    if (!v.is_number_integer()) {
      problems.push_back(path + ": expected an integer");
      return;
    }
    std::int64_t n = v.get<std::int64_t>();
    if (n < min || n > max) {
      problems.push_back(path + ": must be between " + std::to_string(min) + " and " + std::to_string(max));
      return;
    }
    out = static_cast<T>(n);
  }

  void number(const Json* s, const char* key, const std::string& path, double& out, double min, double max) {
    if (!s || !s->contains(key) || s->at(key).is_null()) return;
    const Json& v = s->at(key);
    if (!v.is_number()) {
      problems.push_back(path + ": expected a number");
      return;
    }
    double d = v.get<double>();
    if (!(d >= min && d <= max)) {
      std::ostringstream os;
      os << path << ": must be between " << min << " and " << max;
      problems.push_back(os.str());
      return;
    }
    out = d;
  }

  void strings(const Json* s, const char* key, const std::string& path, std::vector<std::string>& out) {
    if (!s || !s->contains(key) || s->at(key).is_null()) return;
    const Json& v = s->at(key);
    if (!v.is_array() || !std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_string(); })) {
      problems.push_back(path + ": expected a list of strings");
      return;
    }
    out = v.get<std::vector<std::string>>();
  }
};

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::optional<std::string> read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool writable_location(const fs::path& path) {
  std::error_code ec;
  fs::path probe = path;
  while (!probe.empty() && !fs::exists(probe, ec)) {
    fs::path parent = probe.parent_path();
    if (parent == probe) break;
    probe = parent;
  }
  if (probe.empty()) probe = ".";
  return fs::is_directory(probe, ec) && ::access(probe.c_str(), W_OK) == 0;
}

}  // namespace

Json yaml_to_json(std::string_view yaml) {
  try {
    return node_to_json(YAML::Load(std::string(yaml)));
  } catch (const YAML::Exception& e) {
    throw Error(ErrorCode::ConfigParse, e.what());
  }
}

void PipelineConfig::validate() const {
  std::vector<std::string> problems;
  if (input.path.empty()) problems.push_back("input.path is required");
  auto adapters = registered_adapters();
  if (std::find(adapters.begin(), adapters.end(), input.adapter) == adapters.end())
    problems.push_back("input.adapter: unknown adapter '" + input.adapter + "'");
  if (judge_backend == JudgeBackend::Llm) {
    if (judge.model_name.empty()) problems.push_back("judge.model_name is required for the llm backend");
    if (judge.endpoint.empty()) problems.push_back("judge.endpoint is required for the llm backend");
  }
  try {
    judge.validate();
  } catch (const Error& e) {
    problems.push_back(e.detail());
  }
  if (!modes.any()) problems.push_back("modes: at least one of step, trace, rubric must be enabled");
  if (aggregator.min_support < 1) problems.push_back("aggregator.min_support must be >= 1");
  if (aggregator.max_insights < 1) problems.push_back("aggregator.max_insights must be >= 1");
  if (aggregator.batch_size < 1) problems.push_back("aggregator.batch_size must be >= 1");
  if (aggregator.praise_threshold < 0.0 || aggregator.praise_threshold > 1.0)
    problems.push_back("aggregator.praise_threshold must lie in [0, 1]");
  if (ground_truth_key.empty()) problems.push_back("ground_truth_key must not be empty");
  if (ground_truth_threshold < 0.0 || ground_truth_threshold > 1.0)
    problems.push_back("ground_truth_threshold must lie in [0, 1]");
  if (output_path.empty() || !writable_location(output_path))
    problems.push_back("output_path '" + output_path.string() + "' is not a writable directory");
  if (serve.port < 0 || serve.port > 65535) problems.push_back("serve.port must lie in [0, 65535]");
  if (!problems.empty()) {
    std::string msg;
    for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
    throw Error(ErrorCode::ConfigInvalid, msg);
  }
}

PipelineConfig parse_config(std::string_view yaml, const fs::path& base_dir) {
  Json doc = yaml_to_json(yaml);
  if (doc.is_null()) doc = Json::object();
  if (!doc.is_object()) throw Error(ErrorCode::ConfigInvalid, "top level must be a mapping");

  PipelineConfig cfg;
  cfg.snapshot = doc;
  Reader r;
  r.allow(doc, "", {"input", "judge", "modes", "aggregator", "ground_truth_key", "ground_truth_threshold",
                    "output_path", "serve"});

  if (const Json* in = r.section(doc, "input", "input")) {
    r.allow(*in, "input.", {"path", "adapter"});
    std::string path;
    r.str(in, "path", "input.path", path);
    if (!path.empty()) cfg.input.path = resolve(base_dir, path);
    r.str(in, "adapter", "input.adapter", cfg.input.adapter);
  }

  std::string aggregator_backend;
  if (const Json* j = r.section(doc, "judge", "judge")) {
    r.allow(*j, "judge.", {"backend", "model_name", "endpoint", "temperature", "max_parallel", "max_retries",
                           "cache_dir", "dimensions", "prompts", "context_budget_chars", "step_context_chars",
                           "max_rubrics"});
    std::string backend = "llm";
    r.str(j, "backend", "judge.backend", backend);
    if (backend == "mock") cfg.judge_backend = JudgeBackend::Mock;
    else if (backend != "llm") r.problems.push_back("judge.backend: expected 'llm' or 'mock'");
    r.str(j, "model_name", "judge.model_name", cfg.judge.model_name);
    r.str(j, "endpoint", "judge.endpoint", cfg.judge.endpoint);
    r.number(j, "temperature", "judge.temperature", cfg.judge.temperature, 0.0, 2.0);
    r.integer(j, "max_parallel", "judge.max_parallel", cfg.judge.max_parallel, 1, 256);
    r.integer(j, "max_retries", "judge.max_retries", cfg.judge.max_retries, 0, 20);
    std::string cache;
    r.str(j, "cache_dir", "judge.cache_dir", cache);
    if (!cache.empty()) cfg.judge.cache_dir = resolve(base_dir, cache);
    r.integer(j, "context_budget_chars", "judge.context_budget_chars", cfg.judge.context_budget_chars, 1000,
              100000000);
    r.integer(j, "step_context_chars", "judge.step_context_chars", cfg.judge.step_context_chars, 0, 1000000);
    r.integer(j, "max_rubrics", "judge.max_rubrics", cfg.judge.max_rubrics, 1, 12);
    if (const Json* dims = r.section(*j, "dimensions", "judge.dimensions")) {
      r.allow(*dims, "judge.dimensions.", {"step", "trace"});
      r.strings(dims, "step", "judge.dimensions.step", cfg.judge.step_dimensions);
      r.strings(dims, "trace", "judge.dimensions.trace", cfg.judge.trace_dimensions);
    }
    if (const Json* prompts = r.section(*j, "prompts", "judge.prompts")) {
      r.allow(*prompts, "judge.prompts.", {"step", "trace", "rubric_gen", "rubric_verify"});
      for (auto [key, slot] : {std::pair{"step", &cfg.judge.prompts.step}, std::pair{"trace", &cfg.judge.prompts.trace},
                               std::pair{"rubric_gen", &cfg.judge.prompts.rubric_gen},
                               std::pair{"rubric_verify", &cfg.judge.prompts.rubric_verify}}) {
        std::string file;
        r.str(prompts, key, std::string("judge.prompts.") + key, file);
        if (file.empty()) continue;
        auto text = read_text(resolve(base_dir, file));
        if (!text) r.problems.push_back(std::string("judge.prompts.") + key + ": cannot read '" + file + "'");
        else *slot = *text;
      }
    }
  }

  if (const Json* m = r.section(doc, "modes", "modes")) {
    r.allow(*m, "modes.", {"step", "trace", "rubric"});
    r.boolean(m, "step", "modes.step", cfg.modes.step);
    r.boolean(m, "trace", "modes.trace", cfg.modes.trace);
    r.boolean(m, "rubric", "modes.rubric", cfg.modes.rubric);
  }

  cfg.aggregator.backend =
      cfg.judge_backend == JudgeBackend::Mock ? AggregatorConfig::Backend::Mock : AggregatorConfig::Backend::Llm;
  cfg.aggregator.max_parallel = cfg.judge.max_parallel;
  if (const Json* a = r.section(doc, "aggregator", "aggregator")) {
    r.allow(*a, "aggregator.", {"backend", "min_support", "max_insights", "praise_threshold", "min_pool_size",
                                "batch_size"});
    r.str(a, "backend", "aggregator.backend", aggregator_backend);
    if (aggregator_backend == "mock") cfg.aggregator.backend = AggregatorConfig::Backend::Mock;
    else if (aggregator_backend == "llm") cfg.aggregator.backend = AggregatorConfig::Backend::Llm;
    else if (!aggregator_backend.empty()) r.problems.push_back("aggregator.backend: expected 'llm' or 'mock'");
    r.integer(a, "min_support", "aggregator.min_support", cfg.aggregator.min_support, 1, 1000000);
    r.integer(a, "max_insights", "aggregator.max_insights", cfg.aggregator.max_insights, 1, 1000000);
    r.number(a, "praise_threshold", "aggregator.praise_threshold", cfg.aggregator.praise_threshold, 0.0, 1.0);
    r.integer(a, "min_pool_size", "aggregator.min_pool_size", cfg.aggregator.min_pool_size, 0, 1000000);
    r.integer(a, "batch_size", "aggregator.batch_size", cfg.aggregator.batch_size, 1, 1000);
  }
  if (cfg.aggregator.backend == AggregatorConfig::Backend::Llm && cfg.judge_backend == JudgeBackend::Mock)
    r.problems.push_back("aggregator.backend: 'llm' needs judge.backend 'llm' for its model and endpoint");

  r.str(&doc, "ground_truth_key", "ground_truth_key", cfg.ground_truth_key);
  r.number(&doc, "ground_truth_threshold", "ground_truth_threshold", cfg.ground_truth_threshold, 0.0, 1.0);
  std::string output;
  r.str(&doc, "output_path", "output_path", output);
  cfg.output_path = output.empty() ? base_dir : resolve(base_dir, output);

  if (const Json* s = r.section(doc, "serve", "serve")) {
    r.allow(*s, "serve.", {"bind_address", "port"});
    r.str(s, "bind_address", "serve.bind_address", cfg.serve.bind_address);
    r.integer(s, "port", "serve.port", cfg.serve.port, 0, 65535);
  }

  if (!r.problems.empty()) {
    std::string msg;
    for (const auto& p : r.problems) msg += (msg.empty() ? "" : "; ") + p;
    throw Error(ErrorCode::ConfigInvalid, msg);
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  auto text = read_text(path);
  if (!text) throw Error(ErrorCode::ConfigParse, "cannot read config file '" + path.string() + "'");
  fs::path base = fs::absolute(path).parent_path();
  return parse_config(*text, base);
}

}  // namespace aclear
