#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "craft/backends/backend.hpp"
#include "craft/config.hpp"
#include "craft/consolidate.hpp"
#include "craft/evaluate.hpp"
#include "craft/extraction.hpp"
#include "craft/ingest.hpp"
#include "craft/transcripts.hpp"

namespace craft {

/// Mock or remote clients for every role, each wrapped for call counting,
/// contract checks and the in-flight cap. Chat calls are routed by role:
/// adjudication goes to the "adjudicator" backend, everything else to "chat".
backends::Backends make_backends(const PipelineConfig& config);

enum class Stage { kIngest, kTranscribe, kDks, kExtract, kConsolidate, kEvaluate };

const char* to_string(Stage s);
std::optional<Stage> stage_from_string(const std::string& s);

struct StageStats {
  std::string name;
  std::map<std::string, std::size_t> counts;
  double seconds = 0.0;
};

struct RunManifest {
  std::string config_digest;
  std::vector<StageStats> stages;
  std::map<std::string, std::size_t> backend_calls;
  std::vector<std::string> warnings;
  bool record_timings = true;
};

/// Warnings are sorted so the manifest does not depend on task scheduling.
nlohmann::ordered_json to_json(const RunManifest& m);

/// Runs `fn(i)` for i in [0, n) on up to `workers` threads. The first
/// exception thrown by any task is rethrown after all threads finish.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Cache layout under the cache root:
///   ingest/chunks.jsonl, frames/<chunk>.jsonl, frames/<chunk>/
///   transcripts/<video>.json
///   dks/<query>/<video>.json
///   personas/<query>.json
///   claims/<query>/<video>/round<r>.txt, claims/<query>/<video>/final.jsonl
///   critic/<query>/<video>/round<r>.json
/// Every stage reuses whatever its own cache already holds.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, backends::Backends backends);

  StageStats run_stage(Stage stage);
  /// ingest, transcribe, dks, extract, consolidate, then evaluate when
  /// `with_evaluate`. Writes the manifest.
  RunManifest run_all(bool with_evaluate = false);

  RunManifest manifest() const;
  void write_manifest() const;

  const PipelineConfig& config() const { return config_; }
  const backends::Backends& backends() const { return backends_; }
  std::filesystem::path submission_path() const { return config_.output_path(config_.submission); }
  std::filesystem::path manifest_path() const { return config_.output_path(config_.manifest); }

  /// Available after the evaluate stage.
  const std::optional<CorpusEvaluation>& evaluation() const { return evaluation_; }

 private:
  StageStats ingest();
  StageStats transcribe();
  StageStats dks();
  StageStats extract();
  StageStats consolidate();
  StageStats evaluate();

  void load_inputs();
  std::vector<VideoChunk> require_chunks(Stage needed_by) const;
  PersonaQuery persona_for(const PersonaQuery& pq, bool synthesize);
  std::filesystem::path claims_dir(const std::string& query_id, const std::string& video_id) const;
  void warn(const std::string& message);

  PipelineConfig config_;
  backends::Backends backends_;
  std::filesystem::path cache_;
  std::vector<VideoMeta> videos_;
  std::map<std::string, VideoMeta> video_by_id_;
  std::vector<PersonaQuery> queries_;
  bool inputs_loaded_ = false;

  std::vector<StageStats> stages_;
  std::vector<std::string> warnings_;
  std::optional<CorpusEvaluation> evaluation_;
};

/// Evidence handed to the entailment scorer for a claim: the cited chunk, the
/// transcript text overlapping the span (the whole English translation for
/// non-English videos), and the chunk's frames inside the span (the nearest
/// frame when none falls inside).
class EvidenceBuilder {
 public:
  void add_chunk(const VideoChunk& chunk, const std::string& media_path, std::vector<FrameRef> frames);
  void add_transcript(const Transcript& t);

  backends::EvidenceRef operator()(const AtomicClaim& claim) const;

 private:
  struct ChunkInfo {
    VideoChunk chunk;
    std::string media_path;
    std::vector<FrameRef> frames;
  };
  std::map<std::string, ChunkInfo> chunks_;
  std::map<std::string, Transcript> transcripts_;
};

}  // namespace craft
