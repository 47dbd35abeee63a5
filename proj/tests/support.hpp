#pragma once

// Shared helpers for the test binaries: scratch directories, trace builders,
// scripted completion clients and brute-force oracles.

#include <gtest/gtest.h>
#include <unistd.h>

#include <atomic>
#include <fstream>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <string>
#include <vector>

#include "aclear/analytics.hpp"
#include "aclear/bundle.hpp"
#include "aclear/config.hpp"
#include "aclear/error.hpp"
#include "aclear/judge.hpp"
#include "aclear/llm_client.hpp"
#include "aclear/pipeline.hpp"
#include "aclear/trace.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path fixture_dir() { return fs::path(ACLEAR_FIXTURE_DIR); }

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("aclear-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream(path, std::ios::binary) << text;
}

/// A trace whose step k runs at node nodes[k] and outputs outputs[k] (or a
/// neutral text).
inline aclear::Trace make_trace(std::string id, const std::vector<std::string>& nodes,
                                std::optional<aclear::GroundTruth> gt = std::nullopt,
                                const std::vector<std::string>& outputs = {}, std::string task = "do the task") {
  aclear::Trace t;
  t.trace_id = std::move(id);
  t.task_text = std::move(task);
  t.ground_truth = gt;
  t.source = "test";
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    aclear::TraceStep s;
    s.step_index = i;
    s.node_id = nodes[i];
    s.input_text = "input " + std::to_string(i);
    s.output_text = i < outputs.size() ? outputs[i] : "output " + std::to_string(i);
    t.steps.push_back(std::move(s));
  }
  return t;
}

/// Answers prompts through a callback; counts calls. Thread-safe.
class ScriptedClient : public aclear::CompletionClient {
 public:
  using Script = std::function<std::string(const aclear::CompletionRequest&, std::size_t call_no)>;
  explicit ScriptedClient(Script script) : script_(std::move(script)) {}

  std::string complete(const aclear::CompletionRequest& request) override {
    std::size_t n;
    {
      std::lock_guard lock(mu_);
      n = calls_++;
      prompts_.push_back(request.prompt);
    }
    return script_(request, n);
  }

  std::size_t calls() const {
    std::lock_guard lock(mu_);
    return calls_;
  }
  std::vector<std::string> prompts() const {
    std::lock_guard lock(mu_);
    return prompts_;
  }

 private:
  Script script_;
  mutable std::mutex mu_;
  std::size_t calls_ = 0;
  std::vector<std::string> prompts_;
};

/// Exhaustive Mann-Whitney: over all (positive, negative) pairs, 1 for a win,
/// 1/2 for a tie.
inline double pairwise_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      ++pairs;
      if (scores[i] > scores[j]) wins += 1.0;
      else if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

/// Expects `fn` to throw aclear::Error with `code`.
template <typename Fn>
::testing::AssertionResult throws_code(Fn&& fn, aclear::ErrorCode code) {
  try {
    fn();
  } catch (const aclear::Error& e) {
    if (e.code() == code) return ::testing::AssertionSuccess();
    return ::testing::AssertionFailure() << "threw " << aclear::to_string(e.code()) << ": " << e.what();
  } catch (const std::exception& e) {
    return ::testing::AssertionFailure() << "threw non-aclear exception: " << e.what();
  }
  return ::testing::AssertionFailure() << "did not throw";
}

/// The committed golden config, writing into `out`.
inline aclear::PipelineConfig golden_config(const fs::path& out) {
  auto cfg = aclear::load_config(fixture_dir() / "golden" / "config.yaml");
  cfg.output_path = out;
  return cfg;
}

inline aclear::RunOptions reproducible_options() {
  aclear::RunOptions o;
  o.created_at = aclear::Timestamp{};
  o.record_timing = false;
  return o;
}

inline fs::path golden_bundle_path() { return fixture_dir() / "golden" / "aclear-results-fixture_corpus.zip"; }

/// Mock-backend bundle over the fixture corpus, built once per process.
inline const aclear::EvaluationBundle& fixture_bundle() {
  static const aclear::EvaluationBundle bundle =
      aclear::build_bundle(golden_config(fs::temp_directory_path()), reproducible_options());
  return bundle;
}

}  // namespace testsupport
