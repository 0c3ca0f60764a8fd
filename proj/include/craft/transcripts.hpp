#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "craft/backends/backend.hpp"
#include "craft/ingest.hpp"

namespace craft {

using backends::TranscriptSegment;

enum class DegeneracyReason { kNone, kLowTtr, kTokenRun, kTrigramDominance };

const char* to_string(DegeneracyReason reason);

struct DegeneracyVerdict {
  bool flagged = false;
  DegeneracyReason reason = DegeneracyReason::kNone;
  /// TTR for low_ttr, run length for token_run, share for trigram_dominance.
  double metric_value = 0.0;
};

struct DegeneracyThresholds {
  std::size_t min_tokens_for_ttr = 20;
  double ttr = 0.18;
  std::size_t max_run = 8;
  double trigram_share = 0.40;
};

/// |unique| / |total|. Throws kInvalidInput on an empty list.
double type_token_ratio(const std::vector<std::string>& tokens);

/// Length of the longest run of one token repeated back to back.
std::size_t longest_token_run(const std::vector<std::string>& tokens);

/// Share of the most frequent overlapping trigram among all trigrams
/// (denominator max(n - 2, 1)); 0 when there are fewer than three tokens.
double max_trigram_share(const std::vector<std::string>& tokens);

/// Rules are checked in order low_ttr, token_run, trigram_dominance; the
/// first one that fires sets the reason.
DegeneracyVerdict is_degenerate(std::string_view text, const DegeneracyThresholds& thresholds = {});

enum class AsrBackendUsed { kPrimary, kFallback };

struct Transcript {
  std::string video_id;
  std::string language;
  std::vector<TranscriptSegment> segments;
  std::string full_text;
  std::optional<std::string> english_text;
  AsrBackendUsed backend_used = AsrBackendUsed::kPrimary;
  DegeneracyVerdict degeneracy;
  std::vector<std::string> warnings;

  bool usable() const { return !degeneracy.flagged; }
};

std::string join_segments(const std::vector<TranscriptSegment>& segments);

nlohmann::ordered_json to_json(const Transcript& t);
Transcript transcript_from_json(const nlohmann::json& j);

/// One JSON file per video under `<root>/transcripts/`. Concurrent callers
/// for the same video serialize on a per-key lock.
class TranscriptCache {
 public:
  explicit TranscriptCache(std::filesystem::path cache_root) : root_(std::move(cache_root)) {}

  std::filesystem::path path_for(const std::string& video_id) const;
  std::optional<Transcript> load(const std::string& video_id) const;
  void store(const Transcript& t) const;

  std::mutex& key_lock(const std::string& video_id);

 private:
  std::filesystem::path root_;
  std::mutex map_mu_;
  std::map<std::string, std::unique_ptr<std::mutex>> key_locks_;
};

struct AsrPair {
  std::shared_ptr<backends::AsrBackend> primary;
  std::shared_ptr<backends::AsrBackend> fallback;
};

/// Cached transcript for `meta`. The primary backend is used iff the video's
/// language is in its supported set; otherwise, or when the primary fails,
/// the fallback is used. A degenerate result is cached with its verdict.
Transcript transcribe(const VideoMeta& meta, const AsrPair& asr, TranscriptCache& cache,
                      const DegeneracyThresholds& thresholds = {});

bool is_english(const std::string& language);

/// Fills english_text: identity for English, one translator call otherwise.
/// Degenerate or empty transcripts are returned unchanged; a translator
/// failure leaves english_text empty and records a warning.
Transcript translate_if_needed(Transcript t, backends::Translator& translator);

/// transcribe() then translate_if_needed(), caching the translated result.
Transcript transcribe_and_translate(const VideoMeta& meta, const AsrPair& asr, backends::Translator& translator,
                                    TranscriptCache& cache, const DegeneracyThresholds& thresholds = {});

}  // namespace craft
