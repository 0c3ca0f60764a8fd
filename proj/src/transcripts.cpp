#include "craft/transcripts.hpp"

#include <algorithm>
#include <set>

#include <spdlog/spdlog.h>

#include "craft/error.hpp"
#include "craft/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace craft {

const char* to_string(DegeneracyReason reason) {
  switch (reason) {
    case DegeneracyReason::kNone: return "none";
    case DegeneracyReason::kLowTtr: return "low_ttr";
    case DegeneracyReason::kTokenRun: return "token_run";
    case DegeneracyReason::kTrigramDominance: return "trigram_dominance";
  }
  return "none";
}

namespace {

DegeneracyReason reason_from_string(const std::string& s) {
  if (s == "low_ttr") return DegeneracyReason::kLowTtr;
  if (s == "token_run") return DegeneracyReason::kTokenRun;
  if (s == "trigram_dominance") return DegeneracyReason::kTrigramDominance;
  return DegeneracyReason::kNone;
}

}  // namespace

double type_token_ratio(const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw_error(ErrorKind::kInvalidInput, "type-token ratio of an empty token list");
  const std::set<std::string> unique(tokens.begin(), tokens.end());
  return static_cast<double>(unique.size()) / static_cast<double>(tokens.size());
}

std::size_t longest_token_run(const std::vector<std::string>& tokens) {
  std::size_t best = 0, run = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    run = (i > 0 && tokens[i] == tokens[i - 1]) ? run + 1 : 1;
    best = std::max(best, run);
  }
  return best;
}

double max_trigram_share(const std::vector<std::string>& tokens) {
  if (tokens.size() < 3) return 0.0;
  std::map<std::string, std::size_t> counts;
  std::size_t best = 0;
  for (std::size_t i = 0; i + 2 < tokens.size(); ++i) {
    std::string key = tokens[i];
    key += '\x1f';
    key += tokens[i + 1];
    key += '\x1f';
    key += tokens[i + 2];
    best = std::max(best, ++counts[key]);
  }
  const std::size_t denom = std::max<std::size_t>(tokens.size() - 2, 1);
  return static_cast<double>(best) / static_cast<double>(denom);
}

DegeneracyVerdict is_degenerate(std::string_view text, const DegeneracyThresholds& th) {
  const auto tokens = tokenize(text);
  if (tokens.empty()) return {};
  if (tokens.size() >= th.min_tokens_for_ttr) {
    const double ttr = type_token_ratio(tokens);
    if (ttr < th.ttr) return {true, DegeneracyReason::kLowTtr, ttr};
  }
  const auto run = longest_token_run(tokens);
  if (run >= th.max_run) return {true, DegeneracyReason::kTokenRun, static_cast<double>(run)};
  if (tokens.size() >= 3) {
    const double share = max_trigram_share(tokens);
    if (share >= th.trigram_share) return {true, DegeneracyReason::kTrigramDominance, share};
  }
  return {};
}

std::string join_segments(const std::vector<TranscriptSegment>& segments) {
  std::string out;
  for (const auto& s : segments) {
    const auto t = trim(s.text);
    if (t.empty()) continue;
    if (!out.empty()) out += ' ';
    out += t;
  }
  return out;
}

nlohmann::ordered_json to_json(const Transcript& t) {
  nlohmann::ordered_json j;
  j["video_id"] = t.video_id;
  j["language"] = t.language;
  auto segs = nlohmann::ordered_json::array();
  for (const auto& s : t.segments) {
    nlohmann::ordered_json sj;
    sj["start_s"] = s.start_s;
    sj["end_s"] = s.end_s;
    sj["text"] = s.text;
    segs.push_back(std::move(sj));
  }
  j["segments"] = std::move(segs);
  j["full_text"] = t.full_text;
  if (t.english_text) {
    j["english_text"] = *t.english_text;
  } else {
    j["english_text"] = nullptr;
  }
  j["backend_used"] = t.backend_used == AsrBackendUsed::kPrimary ? "primary" : "fallback";
  nlohmann::ordered_json d;
  d["flagged"] = t.degeneracy.flagged;
  d["reason"] = to_string(t.degeneracy.reason);
  d["metric_value"] = t.degeneracy.metric_value;
  j["degeneracy"] = std::move(d);
  j["warnings"] = t.warnings;
  return j;
}

Transcript transcript_from_json(const json& j) {
  Transcript t;
  t.video_id = j.at("video_id").get<std::string>();
  t.language = j.at("language").get<std::string>();
  for (const auto& s : j.at("segments")) {
    t.segments.push_back({s.at("start_s").get<double>(), s.at("end_s").get<double>(), s.at("text").get<std::string>()});
  }
  t.full_text = j.at("full_text").get<std::string>();
  if (j.contains("english_text") && !j.at("english_text").is_null()) t.english_text = j.at("english_text").get<std::string>();
  t.backend_used = j.value("backend_used", "primary") == "fallback" ? AsrBackendUsed::kFallback : AsrBackendUsed::kPrimary;
  if (j.contains("degeneracy")) {
    const auto& d = j.at("degeneracy");
    t.degeneracy = {d.at("flagged").get<bool>(), reason_from_string(d.at("reason").get<std::string>()),
                    d.at("metric_value").get<double>()};
  }
  if (j.contains("warnings")) t.warnings = j.at("warnings").get<std::vector<std::string>>();
  return t;
}

fs::path TranscriptCache::path_for(const std::string& video_id) const {
  return root_ / "transcripts" / (video_id + ".json");
}

std::optional<Transcript> TranscriptCache::load(const std::string& video_id) const {
  const auto p = path_for(video_id);
  if (!fs::exists(p)) return std::nullopt;
  return transcript_from_json(read_json_file(p));
}

void TranscriptCache::store(const Transcript& t) const {
  write_file_atomic(path_for(t.video_id), to_json(t).dump(2) + "\n");
}

std::mutex& TranscriptCache::key_lock(const std::string& video_id) {
  std::lock_guard lock(map_mu_);
  auto& slot = key_locks_[video_id];
  if (!slot) slot = std::make_unique<std::mutex>();
  return *slot;
}

namespace {

Transcript transcribe_locked(const VideoMeta& meta, const AsrPair& asr, TranscriptCache& cache,
                             const DegeneracyThresholds& thresholds) {
  if (auto hit = cache.load(meta.video_id)) return *hit;

  Transcript t;
  t.video_id = meta.video_id;
  t.language = meta.language;

  const auto& supported = asr.primary->supported_languages();
  const bool primary_ok = supported.count(meta.language) != 0;
  std::optional<backends::AsrResult> result;
  std::string primary_error;
  if (primary_ok) {
    try {
      result = asr.primary->asr_transcribe(meta.media_path, meta.language);
      t.backend_used = AsrBackendUsed::kPrimary;
    } catch (const Error& e) {
      primary_error = e.what();
      spdlog::warn("[transcripts] video={} primary ASR failed, falling back: {}", meta.video_id, e.what());
      t.warnings.push_back("primary ASR failed: " + primary_error);
    }
  }
  if (!result) {
    try {
      result = asr.fallback->asr_transcribe(meta.media_path, meta.language);
      t.backend_used = AsrBackendUsed::kFallback;
    } catch (const Error& e) {
      std::string msg = "video " + meta.video_id + ": fallback ASR failed: " + e.what();
      if (!primary_error.empty()) msg += "; primary ASR failed: " + primary_error;
      throw_error(ErrorKind::kTranscription, msg);
    }
  }

  t.segments = std::move(result->segments);
  t.full_text = join_segments(t.segments);
  t.degeneracy = is_degenerate(t.full_text, thresholds);
  if (t.degeneracy.flagged) {
    t.warnings.push_back(std::string("degenerate transcript: ") + to_string(t.degeneracy.reason));
    spdlog::warn("[transcripts] video={} flagged degenerate ({}={:.3f})", meta.video_id,
                 to_string(t.degeneracy.reason), t.degeneracy.metric_value);
  }
  cache.store(t);
  return t;
}

}  // namespace

Transcript transcribe(const VideoMeta& meta, const AsrPair& asr, TranscriptCache& cache,
                      const DegeneracyThresholds& thresholds) {
  std::lock_guard lock(cache.key_lock(meta.video_id));
  return transcribe_locked(meta, asr, cache, thresholds);
}

bool is_english(const std::string& language) {
  return language == "en" || starts_with(language, "en-") || starts_with(language, "en_");
}

Transcript translate_if_needed(Transcript t, backends::Translator& translator) {
  if (!t.usable() || t.english_text) return t;
  if (is_english(t.language)) {
    t.english_text = t.full_text;
    return t;
  }
  if (t.full_text.empty()) return t;
  try {
    t.english_text = translator.translate(t.full_text, t.language);
  } catch (const Error& e) {
    spdlog::warn("[transcripts] video={} translation failed: {}", t.video_id, e.what());
    t.warnings.push_back(std::string("translation failed: ") + e.what());
  }
  return t;
}

Transcript transcribe_and_translate(const VideoMeta& meta, const AsrPair& asr, backends::Translator& translator,
                                    TranscriptCache& cache, const DegeneracyThresholds& thresholds) {
  std::lock_guard lock(cache.key_lock(meta.video_id));
  Transcript t = transcribe_locked(meta, asr, cache, thresholds);
  const bool had_english = t.english_text.has_value();
  const auto warnings_before = t.warnings.size();
  t = translate_if_needed(std::move(t), translator);
  if (t.english_text.has_value() != had_english || t.warnings.size() != warnings_before) cache.store(t);
  return t;
}

}  // namespace craft
