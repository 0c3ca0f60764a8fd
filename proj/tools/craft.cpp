// craft: command-line driver for the report pipeline.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "craft/config.hpp"
#include "craft/error.hpp"
#include "craft/evaluate.hpp"
#include "craft/pipeline.hpp"

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string cache_dir;
  std::string queries;
  std::vector<std::string> overrides;
  std::string backend_mode;
  std::string log_level = "info";
  std::string references;
  std::string submission;
  bool with_evaluate = false;
};

craft::PipelineConfig build_config(const Options& o) {
  std::vector<std::string> overrides = o.overrides;
  // Paths given on the command line are relative to the working directory,
  // not to the config file.
  if (!o.cache_dir.empty()) overrides.push_back("cache_dir=" + fs::absolute(o.cache_dir).string());
  if (!o.queries.empty()) overrides.push_back("queries=" + fs::absolute(o.queries).string());
  if (!o.references.empty()) overrides.push_back("evaluate.references=" + fs::absolute(o.references).string());
  if (!o.submission.empty()) overrides.push_back("output.submission=" + fs::absolute(o.submission).string());
  auto config = craft::load_config(o.config, overrides);
  if (o.backend_mode == "mock") craft::set_backend_mode(config, craft::backends::BackendKind::kMock);
  if (o.backend_mode == "remote") craft::set_backend_mode(config, craft::backends::BackendKind::kRemote);
  return config;
}

int run(const std::string& command, const Options& o) {
  auto config = build_config(o);
  craft::Pipeline pipeline(config, craft::make_backends(config));
  if (command == "run") {
    pipeline.run_all(o.with_evaluate);
    std::cout << pipeline.submission_path().string() << "\n";
  } else {
    const auto stage = craft::stage_from_string(command);
    pipeline.run_stage(*stage);
    pipeline.write_manifest();
    if (*stage == craft::Stage::kConsolidate) std::cout << pipeline.submission_path().string() << "\n";
  }
  if (pipeline.evaluation()) std::cout << craft::format_table(*pipeline.evaluation());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"craft: citation-backed reports from persona queries over video collections"};
  app.require_subcommand(1, 1);
  app.fallthrough();

  Options o;
  app.add_option("--config", o.config, "JSON config file (defaults apply when omitted)");
  app.add_option("--cache-dir", o.cache_dir, "Cache root, overriding cache_dir");
  app.add_option("--queries", o.queries, "Query manifest (JSONL), overriding queries");
  app.add_option("--override", o.overrides, "key=value config override, repeatable")->take_all();
  app.add_option("--backend-mode", o.backend_mode, "Switch every backend to mock or remote")
      ->check(CLI::IsMember({"mock", "remote"}));
  app.add_option("--log-level", o.log_level, "trace|debug|info|warn|error|off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  std::string command;
  for (const auto* name : {"ingest", "transcribe", "dks", "extract", "consolidate", "evaluate", "run"}) {
    auto* sub = app.add_subcommand(name);
    sub->callback([&command, name] { command = name; });
    if (std::string(name) == "evaluate" || std::string(name) == "run") {
      sub->add_option("--references", o.references, "Reference JSONL with gold subclaims");
      sub->add_option("--submission", o.submission, "Submission JSONL, overriding output.submission");
    }
    if (std::string(name) == "run") sub->add_flag("--evaluate", o.with_evaluate, "Also run the evaluate stage");
  }
  app.get_subcommand("ingest")->description("Chunk videos and extract candidate frames");
  app.get_subcommand("transcribe")->description("ASR with fallback, degeneracy filter, translation");
  app.get_subcommand("dks")->description("Query-conditioned keyframe selection");
  app.get_subcommand("extract")->description("Atomic claim extraction and critic refinement");
  app.get_subcommand("consolidate")->description("Pooling, ranking, report generation, submission JSONL");
  app.get_subcommand("evaluate")->description("Reference and citation precision/recall, ROUGE-L");
  app.get_subcommand("run")->description("Every stage in order");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  auto logger = spdlog::stderr_color_mt("craft");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(o.log_level));
  spdlog::set_pattern("%H:%M:%S.%e %^%l%$ %v");

  try {
    return run(command, o);
  } catch (const craft::Error& e) {
    // Printed directly so --log-level off still reports why the run failed.
    std::cerr << "craft: " << e.what() << "\n";
    return craft::exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "craft: error: " << e.what() << "\n";
    return 1;
  }
}
