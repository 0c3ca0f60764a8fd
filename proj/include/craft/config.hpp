#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "craft/backends/backend.hpp"
#include "craft/critic.hpp"
#include "craft/transcripts.hpp"

namespace craft {

/// Backend roles configurable independently. "chat" serves extraction,
/// consolidation and persona synthesis; "adjudicator" serves the critic.
inline const std::vector<std::string> kBackendRoles = {"embed",     "asr_primary", "asr_fallback", "translate",
                                                       "chat",      "adjudicator", "entailment",   "nli"};

struct PipelineConfig {
  std::string corpus = "corpus.jsonl";
  std::string queries = "queries.jsonl";
  std::string cache_dir = ".craft-cache";
  /// Relative output paths are resolved against the cache directory.
  std::string submission = "submission.jsonl";
  std::string manifest = "run_manifest.json";

  double chunk_max_s = 120.0;
  /// Placeholders {input} {start} {end} {fps} {outdir}, plus {config_dir}.
  std::string frame_cmd = "ffmpeg -loglevel error -ss {start} -to {end} -i {input} -vf fps={fps} {outdir}/frame_%06d.jpg";

  DegeneracyThresholds degeneracy;

  double dks_fps = 1.0;
  std::size_t dks_budget = 64;
  std::size_t dks_batch_size = 64;

  /// Proceed with empty persona fields when persona synthesis fails.
  bool persona_fail_open = false;

  CriticThresholds critic;

  std::size_t top_k = 50;
  bool retry_on_guard = true;

  std::string references;
  std::string judge = "exact";
  double judge_threshold = 0.5;
  std::string metrics = "metrics.json";

  std::map<std::string, backends::BackendConfig> backends;
  std::size_t max_concurrency = 4;

  std::size_t workers = 1;
  bool record_timings = true;

  /// Directory of the config file; relative input paths resolve against it.
  /// Not serialized.
  std::filesystem::path base_dir = ".";

  PipelineConfig();

  std::filesystem::path resolve(const std::string& path) const;
  std::filesystem::path cache_root() const { return resolve(cache_dir); }
  std::filesystem::path output_path(const std::string& path) const;
  const backends::BackendConfig& backend(const std::string& role) const;
};

/// Every key with its default value.
nlohmann::ordered_json default_config_json();

/// `path` may be empty (defaults only) or name an empty file. Overrides are
/// `dotted.key=value`; dashes in keys read as underscores. Unknown keys,
/// wrong types and violated invariants raise kValidation naming the key.
PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {});
PipelineConfig config_from_json(const nlohmann::json& j, const std::vector<std::string>& overrides = {});

/// Applies one `key=value` override to a config tree.
void apply_override(nlohmann::json& tree, const std::string& assignment);

/// Every backend role switched to `kind`.
void set_backend_mode(PipelineConfig& config, backends::BackendKind kind);

void validate(const PipelineConfig& config);

nlohmann::ordered_json to_json(const PipelineConfig& config);

/// Digest of the settings that determine outputs. The cache location is
/// excluded so relocating a cache does not change it.
std::string config_digest(const PipelineConfig& config);

}  // namespace craft
