#include "aclear/judge.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <mutex>
#include <regex>
#include <sstream>

#include "aclear/error.hpp"
#include "aclear/parallel.hpp"

namespace aclear {

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::vector<std::string> split_lines(std::string_view raw) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= raw.size()) {
    std::size_t end = raw.find('\n', start);
    if (end == std::string_view::npos) end = raw.size();
    std::string line(raw.substr(start, end - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

std::string join_lines(const std::vector<std::string>& lines, std::size_t from, std::size_t to) {
  std::string out;
  for (std::size_t i = from; i < to; ++i) {
    if (i > from) out += "\n";
    out += lines[i];
  }
  return out;
}

std::string regex_escape(std::string_view s) {
  static const std::string special = R"(\^$.|?*+()[]{}/)";
  std::string out;
  for (char c : s) {
    if (special.find(c) != std::string::npos) out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

const std::regex& score_line_re() {
  static const std::regex re(
      R"(^\s*[*_#]*\s*(?:final\s+|overall\s+)?score\s*[*_]*\s*[:=]\s*[*_]*\s*([+-]?\d+)\s*(?:/\s*10)?\s*[*_.]*\s*$)",
      std::regex::icase);
  return re;
}

const std::regex& verdict_line_re() {
  static const std::regex re(R"(^\s*[*_#]*\s*(?:final\s+)?verdict\s*[*_]*\s*[:=]\s*[*_]*\s*(.*?)\s*[*_.]*\s*$)",
                             std::regex::icase);
  return re;
}

/// Drops everything up to and including the first "<label>:" line prefix.
std::string strip_label(const std::vector<std::string>& lines, std::size_t end,
                        std::initializer_list<const char*> labels) {
  for (std::size_t i = 0; i < end; ++i) {
    for (const char* label : labels) {
      std::regex re(std::string(R"(^\s*[*_#]*\s*)") + label + R"(\s*[*_]*\s*:\s*(.*)$)", std::regex::icase);
      std::smatch m;
      if (std::regex_match(lines[i], m, re)) {
        std::string rest = m[1].str();
        std::string tail = join_lines(lines, i + 1, end);
        return trim(tail.empty() ? rest : rest + "\n" + tail);
      }
    }
  }
  return trim(join_lines(lines, 0, end));
}

std::optional<bool> classify_verdict(std::string value) {
  value = lower(trim(value));
  while (!value.empty() && (value.back() == '.' || value.back() == '*')) value.pop_back();
  for (const char* yes : {"yes", "fulfilled", "met", "true", "pass", "satisfied", "y"})
    if (value == yes) return true;
  for (const char* no : {"no", "not fulfilled", "unfulfilled", "not met", "unmet", "false", "fail", "not satisfied", "n"})
    if (value == no) return false;
  return std::nullopt;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string render_step_block(const TraceStep& step, std::size_t max_text_chars) {
  std::string out = "[Step " + std::to_string(step.step_index + 1) + "] node: " + step.node_id + "\nInput:\n";
  out += max_text_chars ? middle_truncate(step.input_text, max_text_chars) : step.input_text;
  out += "\nOutput:\n";
  out += max_text_chars ? middle_truncate(step.output_text, max_text_chars) : step.output_text;
  out += "\n";
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Parsing

double normalize_score(int raw) {
  if (raw < 1 || raw > 10) throw Error(ErrorCode::ScoreOutOfRange, "score " + std::to_string(raw) + " outside 1..10");
  return static_cast<double>(raw - 1) / 9.0;
}

ScoredResponse parse_judge_response(std::string_view raw, std::span<const std::string> dimensions) {
  const auto lines = split_lines(raw);
  std::optional<std::size_t> score_line;
  long long value = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::smatch m;
    if (std::regex_match(lines[i], m, score_line_re())) {
      score_line = i;
      try {
        value = std::stoll(m[1].str());
      } catch (const std::out_of_range&) {
        value = 1000;
      }
    }
  }
  if (!score_line) throw Error(ErrorCode::UnparseableVerdict, "no labeled 'Score:' line in judge response");
  if (value < 1 || value > 10)
    throw Error(ErrorCode::ScoreOutOfRange, "score " + std::to_string(value) + " outside 1..10");

  ScoredResponse out;
  out.score = static_cast<int>(value);
  out.justification = strip_label(lines, *score_line, {"justification"});
  if (out.justification.empty()) throw Error(ErrorCode::UnparseableVerdict, "judge response has no justification");

  for (const auto& dim : dimensions) {
    std::regex re(R"(^\s*[-*•]?\s*[*_]*\s*)" + regex_escape(dim) + R"(\s*[*_]*\s*[:=]\s*[*_]*\s*([+-]?\d+))",
                  std::regex::icase);
    for (std::size_t i = 0; i < *score_line; ++i) {
      std::smatch m;
      if (std::regex_search(lines[i], m, re)) {
        long long v = std::stoll(m[1].str());
        if (v < 1 || v > 10)
          throw Error(ErrorCode::ScoreOutOfRange, "dimension '" + dim + "' score " + std::to_string(v) + " outside 1..10");
        out.dimension_scores[dim] = static_cast<int>(v);
      }
    }
  }
  return out;
}

VerdictResponse parse_verdict_response(std::string_view raw) {
  const auto lines = split_lines(raw);
  std::optional<std::size_t> verdict_line;
  bool fulfilled = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::smatch m;
    if (std::regex_match(lines[i], m, verdict_line_re())) {
      if (auto v = classify_verdict(m[1].str())) {
        verdict_line = i;
        fulfilled = *v;
      }
    }
  }
  if (!verdict_line) throw Error(ErrorCode::UnparseableVerdict, "no labeled 'Verdict:' line in judge response");
  VerdictResponse out;
  out.fulfilled = fulfilled;
  out.justification = strip_label(lines, *verdict_line, {"reasoning", "justification"});
  return out;
}

std::map<std::string, std::string> split_verdict_sections(std::string_view raw) {
  static const std::regex header(R"(^\s*[*_#]*\s*\[?\s*(R\d+)\s*\]?\s*[*_:]*\s*$)", std::regex::icase);
  std::map<std::string, std::string> sections;
  const auto lines = split_lines(raw);
  std::optional<std::string> current;
  std::size_t begin = 0;
  auto flush = [&](std::size_t end) {
    if (current) sections[*current] = join_lines(lines, begin, end);
  };
  for (std::size_t i = 0; i < lines.size(); ++i) {
    std::smatch m;
    if (std::regex_match(lines[i], m, header)) {
      flush(i);
      std::string id = m[1].str();
      id[0] = 'R';
      current = id;
      begin = i + 1;
    }
  }
  flush(lines.size());
  return sections;
}

std::vector<std::string> parse_rubric_list(std::string_view raw) {
  static const std::regex item(
      R"(^\s*(?:[-*]\s*)?(?:\*\*)?\s*(?:rubric|criterion)?\s*#?(\d+)\s*(?:\*\*)?\s*[.:)\-]\s*(.+?)\s*$)",
      std::regex::icase);
  std::vector<std::string> out;
  for (const auto& line : split_lines(raw)) {
    std::smatch m;
    if (!std::regex_match(line, m, item)) continue;
    std::string text = trim(m[2].str());
    while (text.size() >= 2 && text.front() == '*' && text.back() == '*') text = trim(text.substr(1, text.size() - 2));
    if (text.empty()) continue;
    if (std::find(out.begin(), out.end(), text) == out.end()) out.push_back(std::move(text));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rendering

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t open = tmpl.find('{', pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    std::size_t close = tmpl.find('}', open + 1);
    if (close != std::string_view::npos) {
      auto it = values.find(std::string(tmpl.substr(open + 1, close - open - 1)));
      if (it != values.end()) {
        out += it->second;
        pos = close + 1;
        continue;
      }
    }
    out.push_back('{');
    pos = open + 1;
  }
  return out;
}

std::string middle_truncate(std::string_view text, std::size_t max_chars) {
  static constexpr std::string_view kMarker = "\n[... truncated ...]\n";
  if (text.size() <= max_chars) return std::string(text);
  if (max_chars <= kMarker.size() + 2) return std::string(kMarker);
  const std::size_t keep = max_chars - kMarker.size();
  const std::size_t head = (keep + 1) / 2;
  const std::size_t tail = keep - head;
  return std::string(text.substr(0, head)) + std::string(kMarker) + std::string(text.substr(text.size() - tail));
}

std::string step_context_digest(const Trace& trace, std::size_t step_index, std::size_t max_output_chars) {
  const TraceStep& current = trace.steps.at(step_index);
  std::string out = "Current step: " + std::to_string(step_index + 1) + " of " + std::to_string(trace.steps.size()) +
                    ", emitted by node '" + current.node_id + "'.\n";
  if (step_index == 0) return out + "This is the first step of the trace.";
  std::vector<std::string> nodes;
  for (std::size_t i = 0; i < step_index; ++i) nodes.push_back(trace.steps[i].node_id);
  out += "Nodes of the preceding steps, in order: " + join(nodes, " -> ") + "\n";
  out += "Output of the previous step:\n" + middle_truncate(trace.steps[step_index - 1].output_text, max_output_chars);
  return out;
}

std::string render_trace(const Trace& trace, std::size_t budget_chars) {
  const auto& steps = trace.steps;
  if (steps.empty()) return {};
  std::vector<std::string> blocks;
  std::size_t total = 0;
  for (const auto& step : steps) {
    blocks.push_back(render_step_block(step, 0));
    total += blocks.back().size();
  }
  if (total <= budget_chars) return join(blocks, "\n");

  const std::string marker = std::string(kElisionMarker) + "\n";
  const std::size_t last = steps.size() - 1;
  std::size_t used = blocks.front().size() + (last > 0 ? blocks.back().size() : 0) + marker.size();
  if (used > budget_chars) {
    // Even the endpoints do not fit: shorten their texts too.
    const std::size_t per_text = std::max<std::size_t>(64, budget_chars / 5);
    std::string out = render_step_block(steps.front(), per_text);
    if (last > 0) out += "\n" + marker + "\n" + render_step_block(steps.back(), per_text);
    return out;
  }
  std::size_t front = 1;  // next candidate from the front
  std::size_t back = last;  // one past the next candidate from the back
  bool take_front = true;
  while (front < back) {
    std::size_t candidate = take_front ? front : back - 1;
    if (used + blocks[candidate].size() + 1 > budget_chars) break;
    used += blocks[candidate].size() + 1;
    if (take_front)
      ++front;
    else
      --back;
    take_front = !take_front;
  }
  std::vector<std::string> kept(blocks.begin(), blocks.begin() + static_cast<std::ptrdiff_t>(front));
  if (front < back) kept.push_back(marker);
  for (std::size_t i = back; i <= last; ++i)
    if (i >= front) kept.push_back(blocks[i]);
  return join(kept, "\n");
}

std::string render_rubrics(const RubricSet& rubrics) {
  std::string out;
  for (const auto& r : rubrics.rubrics) out += "[" + r.rubric_id + "] " + r.criterion_text + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// JudgeConfig

void JudgeConfig::validate() const {
  std::vector<std::string> problems;
  if (prompts.step.empty()) problems.push_back("judge.prompts.step is empty");
  if (prompts.trace.empty()) problems.push_back("judge.prompts.trace is empty");
  if (prompts.rubric_gen.empty()) problems.push_back("judge.prompts.rubric_gen is empty");
  if (prompts.rubric_verify.empty()) problems.push_back("judge.prompts.rubric_verify is empty");
  if (max_parallel < 1) problems.push_back("judge.max_parallel must be >= 1");
  if (step_dimensions.empty()) problems.push_back("judge.dimensions.step must not be empty");
  if (trace_dimensions.empty()) problems.push_back("judge.dimensions.trace must not be empty");
  if (max_retries < 0) problems.push_back("judge.max_retries must be >= 0");
  if (temperature < 0.0) problems.push_back("judge.temperature must be >= 0");
  if (max_rubrics < 1) problems.push_back("judge.max_rubrics must be >= 1");
  if (!problems.empty()) throw Error(ErrorCode::ConfigInvalid, join(problems, "; "));
}

// ---------------------------------------------------------------------------
// LlmJudge

namespace {

std::map<std::string, double> normalized_dimensions(const ScoredResponse& parsed, const std::vector<std::string>& dims) {
  std::map<std::string, double> out;
  for (const auto& dim : dims) {
    auto it = parsed.dimension_scores.find(dim);
    out[dim] = normalize_score(it != parsed.dimension_scores.end() ? it->second : parsed.score);
  }
  return out;
}

constexpr int kMaxShrinks = 8;

}  // namespace

LlmJudge::LlmJudge(JudgeConfig config, std::shared_ptr<CompletionClient> client)
    : config_(std::move(config)), client_(std::move(client)) {
  config_.validate();
  if (!client_) throw Error(ErrorCode::PreconditionViolation, "LlmJudge needs a completion client");
}

std::string LlmJudge::identity() const { return "llm:" + config_.model_name; }

std::string LlmJudge::call(const std::string& prompt) {
  return client_->complete({config_.model_name, prompt, config_.temperature});
}

StepCritique LlmJudge::evaluate_step(const std::string& trace_id, const std::string& task_text,
                                     const TraceStep& step, const std::string& context) {
  auto wrap = [&](const Error& e) {
    return Error(e.code(), "trace '" + trace_id + "' step " + std::to_string(step.step_index) + ": " + e.detail());
  };
  std::size_t budget = std::max(step.input_text.size(), step.output_text.size());
  for (int shrink = 0;; ++shrink) {
    const bool full = shrink == 0;
    std::string prompt = render_template(
        config_.prompts.step, {{"task", task_text},
                               {"trace", context},
                               {"input", full ? step.input_text : middle_truncate(step.input_text, budget)},
                               {"output", full ? step.output_text : middle_truncate(step.output_text, budget)},
                               {"dimensions", join(config_.step_dimensions, ", ")}});
    try {
      std::string raw = call(prompt);
      ScoredResponse parsed = parse_judge_response(raw, config_.step_dimensions);
      StepCritique c;
      c.trace_id = trace_id;
      c.step_index = step.step_index;
      c.node_id = step.node_id;
      c.justification = parsed.justification;
      c.score = normalize_score(parsed.score);
      c.dimension_scores = normalized_dimensions(parsed, config_.step_dimensions);
      c.raw_response = std::move(raw);
      return c;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ContextOverflow && shrink < kMaxShrinks && budget > 256) {
        budget /= 2;
        continue;
      }
      throw wrap(e);
    }
  }
}

StepCritique LlmJudge::evaluate_step(const Trace& trace, std::size_t step_index) {
  return evaluate_step(trace.trace_id, trace.task_text, trace.steps.at(step_index),
                       step_context_digest(trace, step_index, config_.step_context_chars));
}

std::string LlmJudge::trace_prompt(const Trace& trace, std::size_t budget_chars) const {
  return render_template(config_.prompts.trace, {{"task", trace.task_text},
                                                 {"trace", render_trace(trace, budget_chars)},
                                                 {"dimensions", join(config_.trace_dimensions, ", ")}});
}

TraceCritique LlmJudge::evaluate_trace(const Trace& trace) {
  std::size_t budget = config_.context_budget_chars;
  for (int shrink = 0;; ++shrink) {
    try {
      std::string raw = call(trace_prompt(trace, budget));
      ScoredResponse parsed = parse_judge_response(raw, config_.trace_dimensions);
      TraceCritique c;
      c.trace_id = trace.trace_id;
      c.justification = parsed.justification;
      c.score = normalize_score(parsed.score);
      c.dimension_scores = normalized_dimensions(parsed, config_.trace_dimensions);
      c.raw_response = std::move(raw);
      return c;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ContextOverflow && shrink < kMaxShrinks && budget > 512) {
        budget /= 2;
        continue;
      }
      throw Error(e.code(), "trace '" + trace.trace_id + "': " + e.detail());
    }
  }
}

RubricSet LlmJudge::generate_rubrics(const std::string& trace_id, const std::string& task_text) {
  if (trim(task_text).empty())
    throw Error(ErrorCode::PreconditionViolation, "trace '" + trace_id + "': cannot generate rubrics for an empty task");
  const std::string prompt = render_template(config_.prompts.rubric_gen, {{"task", task_text}});
  std::vector<std::string> criteria = parse_rubric_list(call(prompt));
  if (criteria.empty()) {
    criteria = parse_rubric_list(
        call(prompt + "\nReminder: reply only with a numbered list containing at least one criterion.\n"));
  }
  if (criteria.empty())
    throw Error(ErrorCode::EmptyRubrics, "trace '" + trace_id + "': judge returned no parseable criteria");
  if (criteria.size() > config_.max_rubrics) criteria.resize(config_.max_rubrics);

  RubricSet set;
  set.trace_id = trace_id;
  set.generated_by = config_.model_name;
  for (std::size_t i = 0; i < criteria.size(); ++i) set.rubrics.push_back({"R" + std::to_string(i + 1), criteria[i]});
  return set;
}

RubricVerdicts LlmJudge::verify_rubrics(const Trace& trace, const RubricSet& rubrics) {
  if (rubrics.trace_id != trace.trace_id)
    throw Error(ErrorCode::PreconditionViolation,
                "rubric set for '" + rubrics.trace_id + "' applied to trace '" + trace.trace_id + "'");
  if (rubrics.rubrics.empty()) throw Error(ErrorCode::PreconditionViolation, "empty rubric set");

  auto ask = [&](const RubricSet& subset) {
    std::size_t budget = config_.context_budget_chars;
    for (int shrink = 0;; ++shrink) {
      try {
        return call(render_template(config_.prompts.rubric_verify, {{"task", trace.task_text},
                                                                    {"trace", render_trace(trace, budget)},
                                                                    {"rubrics", render_rubrics(subset)}}));
      } catch (const Error& e) {
        if (e.code() == ErrorCode::ContextOverflow && shrink < kMaxShrinks && budget > 512) {
          budget /= 2;
          continue;
        }
        throw Error(e.code(), "trace '" + trace.trace_id + "': " + e.detail());
      }
    }
  };

  RubricVerdicts out;
  out.trace_id = trace.trace_id;
  const auto sections = split_verdict_sections(ask(rubrics));
  std::size_t fulfilled = 0;
  for (const auto& rubric : rubrics.rubrics) {
    std::optional<VerdictResponse> verdict;
    if (auto it = sections.find(rubric.rubric_id); it != sections.end()) {
      try {
        verdict = parse_verdict_response(it->second);
      } catch (const Error&) {
      }
    }
    if (!verdict) {
      // Per-rubric fallback.
      RubricSet single{rubrics.trace_id, {rubric}, rubrics.generated_by};
      std::string raw = ask(single);
      auto single_sections = split_verdict_sections(raw);
      auto it = single_sections.find(rubric.rubric_id);
      try {
        verdict = parse_verdict_response(it != single_sections.end() ? it->second : raw);
      } catch (const Error&) {
      }
    }
    RubricVerdict v{rubric.rubric_id, false, "verdict unparseable"};
    if (verdict) {
      v.fulfilled = verdict->fulfilled;
      v.reasoning = verdict->justification.empty() ? (v.fulfilled ? "criterion met" : "criterion not met")
                                                   : verdict->justification;
    } else {
      out.warnings.push_back("rubric " + rubric.rubric_id + ": verdict unparseable, counted as not fulfilled");
    }
    if (v.fulfilled) ++fulfilled;
    out.verdicts.push_back(std::move(v));
  }
  out.fraction_fulfilled = static_cast<double>(fulfilled) / static_cast<double>(rubrics.rubrics.size());
  return out;
}

// ---------------------------------------------------------------------------
// MockJudge

namespace {

std::string scored_raw(const std::vector<std::string>& dims, int score, const std::string& justification) {
  std::string raw = "Dimensions:\n";
  for (const auto& d : dims) raw += "- " + d + ": " + std::to_string(score) + "\n";
  raw += "Justification: " + justification + "\nScore: " + std::to_string(score);
  return raw;
}

std::vector<std::string> split_clauses(const std::string& text) {
  std::vector<std::string> parts{text};
  for (const std::string sep : {";", ",", " and ", " then "}) {
    std::vector<std::string> next;
    for (const auto& p : parts) {
      std::size_t start = 0;
      while (true) {
        std::size_t at = p.find(sep, start);
        next.push_back(p.substr(start, at == std::string::npos ? std::string::npos : at - start));
        if (at == std::string::npos) break;
        start = at + sep.size();
      }
    }
    parts = std::move(next);
  }
  std::vector<std::string> out;
  for (auto& p : parts) {
    std::string t = trim(p);
    while (!t.empty() && (t.back() == '.' || t.back() == '!' || t.back() == '?')) t.pop_back();
    t = trim(t);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

MockJudge::MockJudge(MockRulebook rulebook, std::vector<std::string> step_dimensions,
                     std::vector<std::string> trace_dimensions, std::size_t max_rubrics)
    : rules_(std::move(rulebook)),
      step_dimensions_(std::move(step_dimensions)),
      trace_dimensions_(std::move(trace_dimensions)),
      max_rubrics_(max_rubrics) {}

StepCritique MockJudge::evaluate_step(const Trace& trace, std::size_t step_index) {
  const TraceStep& step = trace.steps.at(step_index);
  std::vector<std::string> issues;
  int score = rules_.clean_step_score;
  for (const auto& rule : rules_.step_rules) {
    if (step.output_text.find(rule.marker) != std::string::npos) {
      issues.push_back(rule.issue);
      score = std::min(score, rule.raw_score);
    }
  }
  const std::string justification = issues.empty() ? rules_.clean_step_justification : join(issues, "; ");
  std::string raw = scored_raw(step_dimensions_, score, justification);
  ScoredResponse parsed = parse_judge_response(raw, step_dimensions_);
  StepCritique c;
  c.trace_id = trace.trace_id;
  c.step_index = step.step_index;
  c.node_id = step.node_id;
  c.justification = parsed.justification;
  c.score = normalize_score(parsed.score);
  c.dimension_scores = normalized_dimensions(parsed, step_dimensions_);
  c.raw_response = std::move(raw);
  return c;
}

TraceCritique MockJudge::evaluate_trace(const Trace& trace) {
  int score = 10;
  std::string justification;
  if (!trace.steps.empty() && trace.steps.back().output_text.find(rules_.completion_marker) != std::string::npos) {
    justification = "The final step delivers the requested result (" + rules_.completion_marker + ").";
  } else {
    score = 2;
    std::vector<std::string> findings{"workflow ended without a final deliverable"};
    auto any_output_has = [&](std::string_view marker) {
      return std::any_of(trace.steps.begin(), trace.steps.end(),
                         [&](const TraceStep& s) { return s.output_text.find(marker) != std::string::npos; });
    };
    if (any_output_has("ERROR")) findings.push_back("did not recover from a tool error");
    if (any_output_has("REPEAT")) findings.push_back("wasted effort on redundant tool calls");
    justification = join(findings, "; ");
  }
  std::string raw = scored_raw(trace_dimensions_, score, justification);
  ScoredResponse parsed = parse_judge_response(raw, trace_dimensions_);
  TraceCritique c;
  c.trace_id = trace.trace_id;
  c.justification = parsed.justification;
  c.score = normalize_score(parsed.score);
  c.dimension_scores = normalized_dimensions(parsed, trace_dimensions_);
  c.raw_response = std::move(raw);
  return c;
}

RubricSet MockJudge::generate_rubrics(const std::string& trace_id, const std::string& task_text) {
  if (trim(task_text).empty())
    throw Error(ErrorCode::PreconditionViolation, "trace '" + trace_id + "': cannot generate rubrics for an empty task");
  std::vector<std::string> criteria;
  if (auto it = rules_.canned_rubrics.find(task_text); it != rules_.canned_rubrics.end())
    criteria = it->second;
  else
    criteria = split_clauses(task_text);
  if (criteria.empty()) criteria.push_back(trim(task_text));
  if (criteria.size() > max_rubrics_) criteria.resize(max_rubrics_);
  RubricSet set;
  set.trace_id = trace_id;
  set.generated_by = identity();
  for (std::size_t i = 0; i < criteria.size(); ++i) set.rubrics.push_back({"R" + std::to_string(i + 1), criteria[i]});
  return set;
}

RubricVerdicts MockJudge::verify_rubrics(const Trace& trace, const RubricSet& rubrics) {
  if (rubrics.trace_id != trace.trace_id)
    throw Error(ErrorCode::PreconditionViolation,
                "rubric set for '" + rubrics.trace_id + "' applied to trace '" + trace.trace_id + "'");
  if (rubrics.rubrics.empty()) throw Error(ErrorCode::PreconditionViolation, "empty rubric set");
  RubricVerdicts out;
  out.trace_id = trace.trace_id;
  std::size_t fulfilled = 0;
  for (const auto& rubric : rubrics.rubrics) {
    RubricVerdict v{rubric.rubric_id, false, "no step output contains '" + rubric.criterion_text + "'"};
    for (const auto& step : trace.steps) {
      if (step.output_text.find(rubric.criterion_text) != std::string::npos) {
        v.fulfilled = true;
        v.reasoning = "criterion text appears in the output of step " + std::to_string(step.step_index + 1);
        break;
      }
    }
    if (v.fulfilled) ++fulfilled;
    out.verdicts.push_back(std::move(v));
  }
  out.fraction_fulfilled = static_cast<double>(fulfilled) / static_cast<double>(rubrics.rubrics.size());
  return out;
}

// ---------------------------------------------------------------------------
// Corpus evaluation

namespace {

enum class UnitKind { Step, Trace, Rubric };

struct Unit {
  std::size_t trace;
  UnitKind kind;
  std::size_t step = 0;
};

struct UnitResult {
  std::optional<StepCritique> step;
  std::optional<TraceCritique> trace;
  std::optional<RubricSet> rubric_set;
  std::optional<RubricVerdicts> verdicts;
  std::vector<EvaluationGap> gaps;
  std::optional<Timestamp> started_at;
  std::int64_t elapsed_ms = 0;
  std::size_t calls = 0;
  bool any_success = false;
};

EvaluationGap gap_from(std::string mode, std::optional<std::size_t> step, const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e))
    return {std::move(mode), step, std::string(to_string(err->code())), err->detail()};
  return {std::move(mode), step, "InternalError", e.what()};
}

}  // namespace

CorpusEvaluation evaluate_corpus(const TraceCorpus& corpus, Judge& judge, const EvaluationOptions& options) {
  if (corpus.empty()) throw Error(ErrorCode::PreconditionViolation, "cannot evaluate an empty corpus");
  if (!options.modes.any()) throw Error(ErrorCode::PreconditionViolation, "all judge modes are disabled");

  const auto& traces = corpus.traces();
  std::vector<Unit> units;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    if (options.modes.step)
      for (std::size_t k = 0; k < traces[t].steps.size(); ++k) units.push_back({t, UnitKind::Step, k});
    if (options.modes.trace) units.push_back({t, UnitKind::Trace});
    if (options.modes.rubric) units.push_back({t, UnitKind::Rubric});
  }

  std::vector<UnitResult> results(units.size());
  std::atomic<std::size_t> done{0};
  std::mutex progress_mutex;
  parallel_for(units.size(), options.max_parallel, [&](std::size_t u) {
    const Unit& unit = units[u];
    const Trace& trace = traces[unit.trace];
    UnitResult& out = results[u];
    const auto wall_start = std::chrono::system_clock::now();
    const auto mono_start = std::chrono::steady_clock::now();
    switch (unit.kind) {
      case UnitKind::Step:
        out.calls = 1;
        try {
          out.step = judge.evaluate_step(trace, unit.step);
          out.any_success = true;
        } catch (const std::exception& e) {
          out.gaps.push_back(gap_from("step", unit.step, e));
        }
        break;
      case UnitKind::Trace:
        out.calls = 1;
        try {
          out.trace = judge.evaluate_trace(trace);
          out.any_success = true;
        } catch (const std::exception& e) {
          out.gaps.push_back(gap_from("trace", std::nullopt, e));
        }
        break;
      case UnitKind::Rubric:
        out.calls = 1;
        try {
          out.rubric_set = judge.generate_rubrics(trace.trace_id, trace.task_text);
          out.any_success = true;
        } catch (const std::exception& e) {
          out.gaps.push_back(gap_from("rubric_gen", std::nullopt, e));
          break;
        }
        out.calls = 2;
        try {
          out.verdicts = judge.verify_rubrics(trace, *out.rubric_set);
        } catch (const std::exception& e) {
          out.gaps.push_back(gap_from("rubric_verify", std::nullopt, e));
        }
        break;
    }
    if (options.record_timing) {
      out.started_at = std::chrono::time_point_cast<std::chrono::milliseconds>(wall_start);
      out.elapsed_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - mono_start)
                           .count();
    }
    const std::size_t finished = done.fetch_add(1) + 1;
    if (options.progress) {
      std::lock_guard lock(progress_mutex);
      options.progress(finished, units.size());
    }
  });

  std::vector<TraceEvaluationRecord> records(traces.size());
  std::vector<bool> succeeded(traces.size(), false);
  for (std::size_t t = 0; t < traces.size(); ++t) {
    records[t].trace_id = traces[t].trace_id;
    records[t].judge_model = judge.identity();
  }
  for (std::size_t u = 0; u < units.size(); ++u) {
    UnitResult& r = results[u];
    TraceEvaluationRecord& rec = records[units[u].trace];
    if (r.step) rec.step_critiques.push_back(std::move(*r.step));
    if (r.trace) rec.trace_critique = std::move(r.trace);
    if (r.rubric_set) rec.rubric_set = std::move(r.rubric_set);
    if (r.verdicts) rec.rubric_verdicts = std::move(r.verdicts);
    for (auto& g : r.gaps) rec.gaps.push_back(std::move(g));
    if (r.started_at && (!rec.timing.started_at || *r.started_at < *rec.timing.started_at))
      rec.timing.started_at = r.started_at;
    rec.timing.elapsed_ms += r.elapsed_ms;
    rec.timing.judge_calls += r.calls;
    if (r.any_success) succeeded[units[u].trace] = true;
  }

  CorpusEvaluation out;
  for (std::size_t t = 0; t < traces.size(); ++t) {
    if (succeeded[t]) {
      out.records.push_back(std::move(records[t]));
      continue;
    }
    std::string message = "every judge call failed";
    if (!records[t].gaps.empty()) message += " (first: " + records[t].gaps.front().error_code + ": " + records[t].gaps.front().message + ")";
    out.failures.push_back({traces[t].trace_id, message});
  }
  if (out.records.empty())
    throw Error(ErrorCode::PipelineError,
                "all " + std::to_string(traces.size()) + " traces failed evaluation; first: " + out.failures.front().message);
  return out;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

Json optional_timestamp(const std::optional<Timestamp>& ts) { return ts ? Json(format_iso8601(*ts)) : Json(nullptr); }

}  // namespace

void to_json(Json& j, const StepCritique& c) {
  j = Json{{"trace_id", c.trace_id},       {"step_index", c.step_index},
           {"node_id", c.node_id},         {"justification", c.justification},
           {"score", c.score},             {"dimension_scores", c.dimension_scores},
           {"raw_response", c.raw_response}};
}

void from_json(const Json& j, StepCritique& c) {
  c.trace_id = j.at("trace_id").get<std::string>();
  c.step_index = j.at("step_index").get<std::size_t>();
  c.node_id = j.at("node_id").get<std::string>();
  c.justification = j.at("justification").get<std::string>();
  c.score = j.at("score").get<double>();
  c.dimension_scores = j.at("dimension_scores").get<std::map<std::string, double>>();
  c.raw_response = j.value("raw_response", std::string{});
}

void to_json(Json& j, const TraceCritique& c) {
  j = Json{{"trace_id", c.trace_id},
           {"justification", c.justification},
           {"score", c.score},
           {"dimension_scores", c.dimension_scores},
           {"raw_response", c.raw_response}};
}

void from_json(const Json& j, TraceCritique& c) {
  c.trace_id = j.at("trace_id").get<std::string>();
  c.justification = j.at("justification").get<std::string>();
  c.score = j.at("score").get<double>();
  c.dimension_scores = j.at("dimension_scores").get<std::map<std::string, double>>();
  c.raw_response = j.value("raw_response", std::string{});
}

void to_json(Json& j, const RubricSet& r) {
  Json rubrics = Json::array();
  for (const auto& rubric : r.rubrics)
    rubrics.push_back({{"rubric_id", rubric.rubric_id}, {"criterion_text", rubric.criterion_text}});
  j = Json{{"trace_id", r.trace_id}, {"rubrics", rubrics}, {"generated_by", r.generated_by}};
}

void from_json(const Json& j, RubricSet& r) {
  r.trace_id = j.at("trace_id").get<std::string>();
  r.generated_by = j.value("generated_by", std::string{});
  r.rubrics.clear();
  for (const auto& item : j.at("rubrics"))
    r.rubrics.push_back({item.at("rubric_id").get<std::string>(), item.at("criterion_text").get<std::string>()});
}

void to_json(Json& j, const RubricVerdicts& v) {
  Json verdicts = Json::array();
  for (const auto& verdict : v.verdicts)
    verdicts.push_back(
        {{"rubric_id", verdict.rubric_id}, {"fulfilled", verdict.fulfilled}, {"reasoning", verdict.reasoning}});
  j = Json{{"trace_id", v.trace_id},
           {"verdicts", verdicts},
           {"fraction_fulfilled", v.fraction_fulfilled},
           {"warnings", v.warnings}};
}

void from_json(const Json& j, RubricVerdicts& v) {
  v.trace_id = j.at("trace_id").get<std::string>();
  v.fraction_fulfilled = j.at("fraction_fulfilled").get<double>();
  v.warnings = j.value("warnings", std::vector<std::string>{});
  v.verdicts.clear();
  for (const auto& item : j.at("verdicts"))
    v.verdicts.push_back({item.at("rubric_id").get<std::string>(), item.at("fulfilled").get<bool>(),
                          item.at("reasoning").get<std::string>()});
}

void to_json(Json& j, const TraceEvaluationRecord& r) {
  Json gaps = Json::array();
  for (const auto& g : r.gaps) {
    Json item{{"mode", g.mode}, {"error_code", g.error_code}, {"message", g.message}};
    item["step_index"] = g.step_index ? Json(*g.step_index) : Json(nullptr);
    gaps.push_back(std::move(item));
  }
  j = Json{{"trace_id", r.trace_id},
           {"step_critiques", r.step_critiques},
           {"judge_model", r.judge_model},
           {"gaps", gaps},
           {"timing",
            {{"started_at", optional_timestamp(r.timing.started_at)},
             {"elapsed_ms", r.timing.elapsed_ms},
             {"judge_calls", r.timing.judge_calls}}}};
  j["trace_critique"] = r.trace_critique ? Json(*r.trace_critique) : Json(nullptr);
  j["rubric_set"] = r.rubric_set ? Json(*r.rubric_set) : Json(nullptr);
  j["rubric_verdicts"] = r.rubric_verdicts ? Json(*r.rubric_verdicts) : Json(nullptr);
}

void from_json(const Json& j, TraceEvaluationRecord& r) {
  r.trace_id = j.at("trace_id").get<std::string>();
  r.step_critiques = j.at("step_critiques").get<std::vector<StepCritique>>();
  r.judge_model = j.value("judge_model", std::string{});
  auto opt = [&](const char* key, auto& field) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null())
      field.reset();
    else
      field = it->get<typename std::decay_t<decltype(field)>::value_type>();
  };
  opt("trace_critique", r.trace_critique);
  opt("rubric_set", r.rubric_set);
  opt("rubric_verdicts", r.rubric_verdicts);
  r.gaps.clear();
  for (const auto& g : j.value("gaps", Json::array())) {
    EvaluationGap gap{g.at("mode").get<std::string>(), std::nullopt, g.at("error_code").get<std::string>(),
                      g.at("message").get<std::string>()};
    if (!g.at("step_index").is_null()) gap.step_index = g.at("step_index").get<std::size_t>();
    r.gaps.push_back(std::move(gap));
  }
  const Json timing = j.value("timing", Json::object());
  r.timing = {};
  if (auto it = timing.find("started_at"); it != timing.end() && !it->is_null())
    r.timing.started_at = parse_iso8601(it->get<std::string>());
  r.timing.elapsed_ms = timing.value("elapsed_ms", std::int64_t{0});
  r.timing.judge_calls = timing.value("judge_calls", std::size_t{0});
}

}  // namespace aclear
