// aclear: run the evaluation pipeline, validate a config, or serve a bundle.
//
// Exit codes: 0 success, 1 fatal pipeline error, 2 configuration error.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <iostream>

#include "aclear/api.hpp"
#include "aclear/bundle.hpp"
#include "aclear/config.hpp"
#include "aclear/error.hpp"
#include "aclear/pipeline.hpp"

namespace {

constexpr int kExitFatal = 1;
constexpr int kExitConfig = 2;

int exit_code_for(const aclear::Error& e) {
  switch (e.code()) {
    case aclear::ErrorCode::ConfigParse:
    case aclear::ErrorCode::ConfigInvalid:
      return kExitConfig;
    default:
      return kExitFatal;
  }
}

aclear::Timestamp reproducible_time() {
  std::int64_t seconds = 0;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) seconds = std::strtoll(env, nullptr, 10);
  return aclear::Timestamp(std::chrono::seconds(seconds));
}

int run(const std::string& config_path, bool reproducible) {
  auto config = aclear::load_config(config_path);
  aclear::RunOptions options;
  if (reproducible) {
    options.created_at = reproducible_time();
    options.record_timing = false;
  }
  std::size_t last_reported = 0;
  options.progress = [&](std::string_view stage, std::size_t done, std::size_t total) {
    if (stage == "judge") {
      // Roughly every 10%.
      std::size_t decile = total ? done * 10 / total : 10;
      if (decile == last_reported && done != total) return;
      last_reported = decile;
    }
    spdlog::info("{}: {}/{}", stage, done, total);
  };
  auto result = aclear::run_pipeline(config, options);
  const auto& b = result.bundle;
  spdlog::info("evaluated {} of {} traces; {} system insights, {} node insight sets",
               b.evaluations.size(), b.corpus.size(),
               b.system_insights ? b.system_insights->insights.size() : 0, b.node_insights.size());
  std::cout << result.bundle_path.string() << "\n";
  return 0;
}

int validate(const std::string& config_path) {
  auto config = aclear::load_config(config_path);
  std::cout << "config OK: input " << config.input.path.string() << " (" << config.input.adapter << "), output "
            << config.output_path.string() << "\n";
  return 0;
}

int serve(const std::string& bundle_path, const std::string& bind, int port, const std::string& static_dir) {
  auto bundle = std::make_shared<const aclear::EvaluationBundle>(aclear::read_bundle(bundle_path));
  std::optional<std::filesystem::path> assets;
  if (!static_dir.empty()) assets = static_dir;
  aclear::BundleServer server(bundle, assets);
  int bound = server.bind(bind, port);
  spdlog::info("serving {} on http://{}:{}", bundle_path, bind, bound);
  server.listen();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agent trace evaluation: judge traces, aggregate recurring issues, serve results"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  std::string config_path;
  bool reproducible = false;
  auto* run_cmd = app.add_subcommand("run", "Run the pipeline and write a results bundle");
  run_cmd->add_option("--config", config_path, "YAML configuration file")->required();
  run_cmd->add_flag("--reproducible", reproducible,
                    "Fixed manifest time (SOURCE_DATE_EPOCH or 0) and no timing data, for byte-stable bundles");

  auto* validate_cmd = app.add_subcommand("validate", "Check a configuration file");
  validate_cmd->add_option("--config", config_path, "YAML configuration file")->required();

  std::string bundle_path, bind = "127.0.0.1", static_dir;
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Serve a results bundle over HTTP");
  serve_cmd->add_option("--bundle", bundle_path, "Results bundle (.zip)")->required();
  serve_cmd->add_option("--port", port, "TCP port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--bind", bind, "Bind address");
  serve_cmd->add_option("--static-dir", static_dir, "Directory of dashboard assets to host at /");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }
  // stdout carries results (the bundle path); logs go to stderr.
  spdlog::set_default_logger(spdlog::stderr_color_mt("aclear"));
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);
  spdlog::set_pattern("%H:%M:%S %^%l%$ %v");

  try {
    if (*run_cmd) return run(config_path, reproducible);
    if (*validate_cmd) return validate(config_path);
    if (*serve_cmd) return serve(bundle_path, bind, port, static_dir);
  } catch (const aclear::Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFatal;
  }
  return kExitFatal;
}
