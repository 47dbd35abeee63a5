#include "aclear/pipeline.hpp"

#include "aclear/analytics.hpp"
#include "aclear/error.hpp"
#include "aclear/ingest.hpp"
#include "aclear/insights.hpp"

namespace aclear {

namespace {

std::shared_ptr<CompletionClient> make_client(const PipelineConfig& config, const RunOptions& options) {
  std::shared_ptr<CompletionClient> client = options.client;
  if (!client) {
    RetryPolicy retry;
    retry.max_retries = config.judge.max_retries;
    client = std::make_shared<HttpCompletionClient>(config.judge.endpoint, api_key_from_env(), retry);
  }
  if (config.judge.cache_dir) client = std::make_shared<CachingCompletionClient>(client, *config.judge.cache_dir);
  return client;
}

void report(const RunOptions& options, std::string_view stage, std::size_t done, std::size_t total) {
  if (options.progress) options.progress(stage, done, total);
}

}  // namespace

std::string bundle_file_name(std::string_view corpus_id) {
  return "aclear-results-" + member_name_component(corpus_id) + ".zip";
}

EvaluationBundle build_bundle(const PipelineConfig& config, const RunOptions& options) {
  IngestOptions ingest;
  ingest.ground_truth_key = config.ground_truth_key;
  ingest.max_parallel = config.judge.max_parallel;
  report(options, "load", 0, 1);
  LoadResult loaded = load_corpus(config.input.path, config.input.adapter, ingest);
  report(options, "load", 1, 1);
  const TraceCorpus& corpus = loaded.corpus;

  std::shared_ptr<CompletionClient> client;
  const bool needs_client = config.judge_backend == JudgeBackend::Llm ||
                            config.aggregator.backend == AggregatorConfig::Backend::Llm;
  if (needs_client) client = make_client(config, options);

  std::unique_ptr<Judge> judge;
  if (config.judge_backend == JudgeBackend::Mock)
    judge = std::make_unique<MockJudge>(MockRulebook{}, config.judge.step_dimensions, config.judge.trace_dimensions,
                                        config.judge.max_rubrics);
  else
    judge = std::make_unique<LlmJudge>(config.judge, client);

  EvaluationOptions eval;
  eval.modes = config.modes;
  eval.max_parallel = config.judge.max_parallel;
  eval.record_timing = options.record_timing;
  if (options.progress) eval.progress = [&](std::size_t done, std::size_t total) { report(options, "judge", done, total); };
  CorpusEvaluation evaluation = evaluate_corpus(corpus, *judge, eval);

  std::unique_ptr<AggregatorBackend> backend;
  if (config.aggregator.backend == AggregatorConfig::Backend::Mock)
    backend = std::make_unique<MockAggregatorBackend>();
  else
    backend = std::make_unique<LlmAggregatorBackend>(client, config.judge.model_name, config.judge.temperature);
  report(options, "aggregate", 0, 1);
  AggregationResult insights = aggregate(evaluation.records, corpus, *backend, config.aggregator);
  report(options, "aggregate", 1, 1);

  EvaluationBundle bundle;
  bundle.manifest.created_at = options.created_at.value_or(
      std::chrono::time_point_cast<std::chrono::milliseconds>(std::chrono::system_clock::now()));
  bundle.manifest.config = config.snapshot;
  bundle.manifest.corpus_summary = summarize_corpus(corpus, &loaded.summary);
  bundle.manifest.judge_identity = judge->identity();
  bundle.manifest.failures = evaluation.failures;
  if (!loaded.summary.failures.empty())
    bundle.manifest.notes.push_back(std::to_string(loaded.summary.failures.size()) +
                                    " input document(s) skipped during ingestion");
  if (!evaluation.failures.empty())
    bundle.manifest.notes.push_back(std::to_string(evaluation.failures.size()) + " trace(s) could not be evaluated");

  bundle.topology = build_topology(corpus);
  bundle.node_stats = node_usage_stats(corpus, evaluation.records, insights.nodes, config.ground_truth_threshold);
  if (corpus.has_ground_truth())
    bundle.reliability = judge_reliability_report(evaluation.records, corpus, config.ground_truth_threshold);
  else
    bundle.manifest.notes.push_back("no ground truth");

  bundle.corpus = std::move(loaded.corpus);
  bundle.evaluations = std::move(evaluation.records);
  bundle.system_insights = std::move(insights.system);
  bundle.node_insights = std::move(insights.nodes);
  return bundle;
}

RunResult run_pipeline(const PipelineConfig& config, const RunOptions& options) {
  RunResult result;
  result.bundle = build_bundle(config, options);
  result.bundle_path = config.output_path / bundle_file_name(result.bundle.corpus.corpus_id());
  report(options, "write", 0, 1);
  write_bundle(result.bundle, result.bundle_path);
  report(options, "write", 1, 1);
  return result;
}

}  // namespace aclear
