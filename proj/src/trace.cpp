#include "aclear/trace.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>
#include <unordered_set>

#include "aclear/error.hpp"

namespace aclear {

namespace {

bool read_int(std::string_view text, std::size_t& pos, std::size_t digits, int& out) {
  if (pos + digits > text.size()) return false;
  int value = 0;
  for (std::size_t i = 0; i < digits; ++i) {
    char c = text[pos + i];
    if (!std::isdigit(static_cast<unsigned char>(c))) return false;
    value = value * 10 + (c - '0');
  }
  pos += digits;
  out = value;
  return true;
}

bool expect(std::string_view text, std::size_t& pos, char c) {
  if (pos < text.size() && text[pos] == c) {
    ++pos;
    return true;
  }
  return false;
}

}  // namespace

std::optional<Timestamp> parse_iso8601(std::string_view text) {
  using namespace std::chrono;
  std::size_t pos = 0;
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, s = 0;
  if (!read_int(text, pos, 4, y) || !expect(text, pos, '-') || !read_int(text, pos, 2, mo) ||
      !expect(text, pos, '-') || !read_int(text, pos, 2, d))
    return std::nullopt;
  if (pos < text.size() && (text[pos] == 'T' || text[pos] == 't' || text[pos] == ' ')) {
    ++pos;
    if (!read_int(text, pos, 2, h) || !expect(text, pos, ':') || !read_int(text, pos, 2, mi))
      return std::nullopt;
    if (expect(text, pos, ':') && !read_int(text, pos, 2, s)) return std::nullopt;
  }
  int millis = 0;
  if (expect(text, pos, '.')) {
    // Fractional seconds of any length; keep millisecond precision.
    int scale = 100;
    std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
      if (scale > 0) millis += (text[pos] - '0') * scale;
      scale /= 10;
      ++pos;
    }
    if (pos == start) return std::nullopt;
  }
  minutes offset{0};
  if (pos < text.size()) {
    char c = text[pos];
    if (c == 'Z' || c == 'z') {
      ++pos;
    } else if (c == '+' || c == '-') {
      ++pos;
      int oh = 0, om = 0;
      if (!read_int(text, pos, 2, oh)) return std::nullopt;
      expect(text, pos, ':');
      if (!read_int(text, pos, 2, om)) return std::nullopt;
      offset = hours(oh) + minutes(om);
      if (c == '-') offset = -offset;
    }
  }
  if (pos != text.size()) return std::nullopt;
  year_month_day ymd{year(y), month(static_cast<unsigned>(mo)), day(static_cast<unsigned>(d))};
  if (!ymd.ok() || h > 23 || mi > 59 || s > 60) return std::nullopt;
  auto tp = sys_days(ymd) + hours(h) + minutes(mi) + seconds(s) + milliseconds(millis) - offset;
  return time_point_cast<milliseconds>(tp);
}

std::string format_iso8601(Timestamp ts) {
  using namespace std::chrono;
  auto days = floor<std::chrono::days>(ts);
  year_month_day ymd{days};
  hh_mm_ss<milliseconds> tod{ts - days};
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()), static_cast<int>(tod.subseconds().count()));
  return buf;
}

int binary_label(const GroundTruth& gt, double threshold) {
  if (const bool* b = std::get_if<bool>(&gt)) return *b ? 1 : 0;
  return std::get<double>(gt) >= threshold ? 1 : 0;
}

TraceCorpus::TraceCorpus(std::string corpus_id, std::vector<Trace> traces)
    : corpus_id_(std::move(corpus_id)), traces_(std::move(traces)) {
  std::unordered_set<std::string> seen;
  has_ground_truth_ = !traces_.empty();
  for (const auto& trace : traces_) {
    if (!seen.insert(trace.trace_id).second)
      throw Error(ErrorCode::PreconditionViolation, "duplicate trace_id '" + trace.trace_id + "'");
    for (const auto& step : trace.steps) node_catalog_.insert(step.node_id);
    total_steps_ += trace.steps.size();
    if (!trace.ground_truth) has_ground_truth_ = false;
  }
}

const Trace* TraceCorpus::find(std::string_view trace_id) const {
  for (const auto& trace : traces_)
    if (trace.trace_id == trace_id) return &trace;
  return nullptr;
}

void to_json(Json& j, const TraceStep& step) {
  j = Json{{"step_index", step.step_index},
           {"node_id", step.node_id},
           {"input_text", step.input_text},
           {"output_text", step.output_text},
           {"extra", step.extra}};
  j["started_at"] = step.started_at ? Json(format_iso8601(*step.started_at)) : Json(nullptr);
  j["ended_at"] = step.ended_at ? Json(format_iso8601(*step.ended_at)) : Json(nullptr);
  j["model_name"] = step.model_name ? Json(*step.model_name) : Json(nullptr);
}

namespace {

std::optional<Timestamp> timestamp_field(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  auto ts = parse_iso8601(it->get<std::string>());
  if (!ts) throw Error(ErrorCode::MalformedDocument, std::string("bad timestamp in '") + key + "'");
  return ts;
}

}  // namespace

void from_json(const Json& j, TraceStep& step) {
  step.step_index = j.at("step_index").get<std::size_t>();
  step.node_id = j.at("node_id").get<std::string>();
  step.input_text = j.at("input_text").get<std::string>();
  step.output_text = j.at("output_text").get<std::string>();
  step.started_at = timestamp_field(j, "started_at");
  step.ended_at = timestamp_field(j, "ended_at");
  if (auto it = j.find("model_name"); it != j.end() && !it->is_null())
    step.model_name = it->get<std::string>();
  else
    step.model_name.reset();
  step.extra = j.value("extra", Json::object());
}

void to_json(Json& j, const Trace& trace) {
  j = Json{{"trace_id", trace.trace_id},
           {"task_text", trace.task_text},
           {"steps", trace.steps},
           {"source", trace.source},
           {"extra", trace.extra}};
  if (!trace.ground_truth)
    j["ground_truth"] = nullptr;
  else if (const bool* b = std::get_if<bool>(&*trace.ground_truth))
    j["ground_truth"] = *b;
  else
    j["ground_truth"] = std::get<double>(*trace.ground_truth);
}

void from_json(const Json& j, Trace& trace) {
  trace.trace_id = j.at("trace_id").get<std::string>();
  trace.task_text = j.at("task_text").get<std::string>();
  trace.steps = j.at("steps").get<std::vector<TraceStep>>();
  trace.source = j.value("source", std::string{});
  trace.extra = j.value("extra", Json::object());
  const Json& gt = j.value("ground_truth", Json(nullptr));
  if (gt.is_boolean())
    trace.ground_truth = gt.get<bool>();
  else if (gt.is_number())
    trace.ground_truth = gt.get<double>();
  else
    trace.ground_truth.reset();
}

void to_json(Json& j, const ValidationReport& report) {
  auto issues = [](const std::vector<ValidationIssue>& list) {
    Json arr = Json::array();
    for (const auto& issue : list) {
      Json item{{"code", issue.code}, {"message", issue.message}};
      item["step_index"] = issue.step_index ? Json(*issue.step_index) : Json(nullptr);
      arr.push_back(std::move(item));
    }
    return arr;
  };
  j = Json{{"trace_id", report.trace_id},
           {"errors", issues(report.errors)},
           {"warnings", issues(report.warnings)}};
}

}  // namespace aclear
