#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "craft/backends/backend.hpp"
#include "craft/dks.hpp"
#include "craft/ingest.hpp"
#include "craft/transcripts.hpp"

namespace craft {

struct PersonaQuery {
  std::string query_id;
  std::string persona_title;
  std::string persona_background;
  std::string query_text;
  std::vector<std::string> video_ids;

  bool has_persona() const { return !persona_title.empty() && !persona_background.empty(); }
};

/// Query manifest: one JSON object per line with query_id, query_text,
/// video_ids and optional persona_title / persona_background.
std::vector<PersonaQuery> read_queries(const std::filesystem::path& path);

enum class Modality { kVisual, kOnScreenText, kTranscript, kSpeech };

const char* to_string(Modality m);
std::optional<Modality> modality_from_string(std::string_view s);

struct Span {
  double start_s = 0.0;
  double end_s = 0.0;

  bool operator==(const Span&) const = default;
};

struct AtomicClaim {
  std::string claim_id;
  std::string query_id;
  /// Chunk-level id of the video segment the claim cites.
  std::string source_video_id;
  Span span;
  Modality modality = Modality::kVisual;
  std::string text;
  std::optional<double> support_score;

  bool operator==(const AtomicClaim&) const = default;
};

/// `[<modality>|<start>-<end>] <sentence>`
std::string serialize_claim(const AtomicClaim& claim);
std::string serialize_claims(const std::vector<AtomicClaim>& claims);

/// Seconds rendered with the fewest decimals (at least one) that parse back
/// to the same double.
std::string format_seconds(double s);

nlohmann::ordered_json to_json(const AtomicClaim& claim);
AtomicClaim claim_from_json(const nlohmann::json& j);

/// What extraction needs to know about one parent video.
struct VideoContext {
  std::string video_id;
  double duration_s = 0.0;
  std::string media_path;
  std::vector<VideoChunk> chunks;
};

enum class RejectReason { kMalformed, kUnknownModality, kMultiSentence, kNoTerminator, kEmptyText, kBadSpan, kSpanOutsideChunk };

const char* to_string(RejectReason r);

struct RejectedLine {
  std::size_t line_no = 0;
  std::string line;
  RejectReason reason = RejectReason::kMalformed;
};

struct ParseResult {
  std::vector<AtomicClaim> claims;
  std::vector<RejectedLine> rejected;
  std::vector<std::string> warnings;
};

/// Parses model output one line at a time. Blank lines are skipped; every
/// other line either becomes a claim or is reported in `rejected`. Spans are
/// on the parent video's timeline and must fall inside a single chunk, which
/// becomes the claim's source_video_id. Claim ids are
/// `<query_id>/<video_id>/r<round>-<index>`.
ParseResult parse_claims(std::string_view raw_text, const std::string& query_id, const VideoContext& video,
                         int round = 1);

/// Chunk-less form: spans are only checked for 0 <= start <= end and every
/// claim cites `video_id`.
ParseResult parse_claims(std::string_view raw_text, const std::string& query_id, const std::string& video_id,
                         int round = 1);

/// Claim set from a previous round plus the critic's feedback, appended to a
/// re-extraction prompt.
struct Refinement {
  std::vector<AtomicClaim> previous;
  std::string feedback;
  int round = 1;
};

/// Prompt for one (query, video) pair. Sections, in order: persona title,
/// persona background, query, video input (keyframe clip or raw chunks),
/// original transcript, English translation, then for re-extraction the
/// previous claims and critic report, and finally the output format.
/// A missing or degenerate transcript produces the no-transcript sentinel.
backends::PromptDocument build_prompt(const PersonaQuery& pq, const VideoContext& video, const VisualInput& visual,
                                      const std::optional<Transcript>& transcript,
                                      const Refinement* refinement = nullptr);

/// One chat call. Failures become kExtraction errors naming the query and video.
std::string extract_claims(const backends::PromptDocument& prompt, backends::ChatBackend& vlm,
                           const std::string& query_id, const std::string& video_id);

struct Persona {
  std::string title;
  std::string background;
};

/// Asks the text model for a persona. Titles longer than 12 tokens are cut.
/// Throws kInvalidInput on empty query text and kBackend when the reply has
/// no TITLE/BACKGROUND lines or the call fails.
Persona synthesize_persona(const std::string& query_text, const std::vector<std::string>& sample_claims,
                           backends::ChatBackend& llm);

}  // namespace craft
