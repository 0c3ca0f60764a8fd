#include "craft/extraction.hpp"

#include <cstdio>
#include <cstdlib>
#include <regex>
#include <set>

#include <spdlog/spdlog.h>

#include "craft/error.hpp"
#include "craft/prompt_format.hpp"
#include "craft/text.hpp"

using nlohmann::json;

namespace craft {

std::vector<PersonaQuery> read_queries(const std::filesystem::path& path) {
  std::vector<PersonaQuery> out;
  std::set<std::string> seen;
  for (const auto& row : read_jsonl_file(path)) {
    PersonaQuery q;
    try {
      q.query_id = row.at("query_id").get<std::string>();
      q.query_text = row.at("query_text").get<std::string>();
      q.video_ids = row.at("video_ids").get<std::vector<std::string>>();
      q.persona_title = row.value("persona_title", std::string());
      q.persona_background = row.value("persona_background", std::string());
    } catch (const json::exception& e) {
      throw_error(ErrorKind::kValidation, path.string() + ": " + e.what());
    }
    if (!seen.insert(q.query_id).second) throw_error(ErrorKind::kValidation, "duplicate query_id " + q.query_id);
    if (q.video_ids.empty()) throw_error(ErrorKind::kValidation, "query " + q.query_id + " lists no videos");
    out.push_back(std::move(q));
  }
  return out;
}

const char* to_string(Modality m) {
  switch (m) {
    case Modality::kVisual: return "visual";
    case Modality::kOnScreenText: return "on_screen_text";
    case Modality::kTranscript: return "transcript";
    case Modality::kSpeech: return "speech";
  }
  return "visual";
}

std::optional<Modality> modality_from_string(std::string_view s) {
  if (s == "visual") return Modality::kVisual;
  if (s == "on_screen_text") return Modality::kOnScreenText;
  if (s == "transcript") return Modality::kTranscript;
  if (s == "speech") return Modality::kSpeech;
  return std::nullopt;
}

const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::kMalformed: return "malformed";
    case RejectReason::kUnknownModality: return "unknown_modality";
    case RejectReason::kMultiSentence: return "multi_sentence";
    case RejectReason::kNoTerminator: return "no_terminator";
    case RejectReason::kEmptyText: return "empty_text";
    case RejectReason::kBadSpan: return "bad_span";
    case RejectReason::kSpanOutsideChunk: return "span_outside_chunk";
  }
  return "malformed";
}

std::string format_seconds(double s) {
  for (int precision = 1; precision <= 6; ++precision) {
    const std::string out = format_fixed(s, precision);
    if (std::strtod(out.c_str(), nullptr) == s) return out;
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", s);
  return buf;
}

std::string serialize_claim(const AtomicClaim& c) {
  return "[" + std::string(to_string(c.modality)) + "|" + format_seconds(c.span.start_s) + "-" +
         format_seconds(c.span.end_s) + "] " + c.text;
}

std::string serialize_claims(const std::vector<AtomicClaim>& claims) {
  std::string out;
  for (const auto& c : claims) out += serialize_claim(c) + "\n";
  return out;
}

nlohmann::ordered_json to_json(const AtomicClaim& c) {
  nlohmann::ordered_json j;
  j["claim_id"] = c.claim_id;
  j["query_id"] = c.query_id;
  j["source_video_id"] = c.source_video_id;
  j["start_s"] = c.span.start_s;
  j["end_s"] = c.span.end_s;
  j["modality"] = to_string(c.modality);
  j["text"] = c.text;
  if (c.support_score) {
    j["support_score"] = *c.support_score;
  } else {
    j["support_score"] = nullptr;
  }
  return j;
}

AtomicClaim claim_from_json(const json& j) {
  AtomicClaim c;
  c.claim_id = j.at("claim_id").get<std::string>();
  c.query_id = j.at("query_id").get<std::string>();
  c.source_video_id = j.at("source_video_id").get<std::string>();
  c.span = {j.at("start_s").get<double>(), j.at("end_s").get<double>()};
  const auto m = modality_from_string(j.at("modality").get<std::string>());
  if (!m) throw_error(ErrorKind::kValidation, "unknown modality in claim " + c.claim_id);
  c.modality = *m;
  c.text = j.at("text").get<std::string>();
  if (j.contains("support_score") && !j.at("support_score").is_null()) c.support_score = j.at("support_score").get<double>();
  return c;
}

namespace {

constexpr double kSpanEpsilon = 1e-6;

bool ends_with_terminator(const std::string& text) {
  std::string t = text;
  // Closing quotes and brackets may follow the terminator.
  static const char* kClosers[] = {"\"", "'", ")", "]", "\xE2\x80\x9D", "\xE2\x80\x99"};
  bool stripped = true;
  while (stripped && !t.empty()) {
    stripped = false;
    for (const char* c : kClosers) {
      const std::string s = c;
      if (t.size() >= s.size() && t.compare(t.size() - s.size(), s.size(), s) == 0) {
        t.erase(t.size() - s.size());
        stripped = true;
      }
    }
  }
  static const char* kTerminators[] = {".", "!", "?", "\xE3\x80\x82", "\xEF\xBC\x81", "\xEF\xBC\x9F"};
  for (const char* term : kTerminators) {
    const std::string s = term;
    if (t.size() >= s.size() && t.compare(t.size() - s.size(), s.size(), s) == 0) return true;
  }
  return false;
}

std::string claim_id_for(const std::string& query_id, const std::string& video_id, int round, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "/r%d-%03zu", round, index);
  return query_id + "/" + video_id + buf;
}

ParseResult parse_impl(std::string_view raw_text, const std::string& query_id, const VideoContext& video, int round) {
  static const std::regex kLine(R"(^\[\s*([A-Za-z_]+)\s*\|\s*([0-9]+(?:\.[0-9]+)?)\s*-\s*([0-9]+(?:\.[0-9]+)?)\s*\]\s*(.*)$)");
  ParseResult result;
  std::size_t line_no = 0;
  for (const auto& raw_line : split_lines(raw_text)) {
    ++line_no;
    const std::string line = trim(raw_line);
    if (line.empty()) continue;
    auto reject = [&](RejectReason r) { result.rejected.push_back({line_no, line, r}); };

    std::smatch m;
    if (!std::regex_match(line, m, kLine)) {
      reject(RejectReason::kMalformed);
      continue;
    }
    const auto modality = modality_from_string(m[1].str());
    if (!modality) {
      reject(RejectReason::kUnknownModality);
      continue;
    }
    const std::string text = trim(m[4].str());
    if (text.empty()) {
      reject(RejectReason::kEmptyText);
      continue;
    }
    const auto terminators = count_sentence_terminators(text);
    if (terminators == 0) {
      reject(RejectReason::kNoTerminator);
      continue;
    }
    if (terminators > 1 || !ends_with_terminator(text)) {
      reject(RejectReason::kMultiSentence);
      continue;
    }
    const Span span{std::strtod(m[2].str().c_str(), nullptr), std::strtod(m[3].str().c_str(), nullptr)};
    if (span.end_s < span.start_s || (video.duration_s > 0.0 && span.end_s > video.duration_s + kSpanEpsilon)) {
      reject(RejectReason::kBadSpan);
      continue;
    }

    std::string source = video.video_id;
    if (!video.chunks.empty()) {
      const VideoChunk* owner = nullptr;
      for (const auto& c : video.chunks) {
        if (span.start_s >= c.start_s && span.start_s < c.end_s) {
          owner = &c;
          break;
        }
      }
      if (owner == nullptr || span.end_s > owner->end_s + kSpanEpsilon) {
        reject(RejectReason::kSpanOutsideChunk);
        continue;
      }
      source = owner->chunk_id;
    }

    AtomicClaim claim;
    claim.claim_id = claim_id_for(query_id, video.video_id, round, result.claims.size());
    claim.query_id = query_id;
    claim.source_video_id = std::move(source);
    claim.span = span;
    claim.modality = *modality;
    claim.text = text;
    result.claims.push_back(std::move(claim));
  }
  if (result.claims.empty()) {
    result.warnings.push_back("no parseable claims for query " + query_id + " video " + video.video_id);
  }
  return result;
}

}  // namespace

ParseResult parse_claims(std::string_view raw_text, const std::string& query_id, const VideoContext& video, int round) {
  return parse_impl(raw_text, query_id, video, round);
}

ParseResult parse_claims(std::string_view raw_text, const std::string& query_id, const std::string& video_id, int round) {
  VideoContext ctx;
  ctx.video_id = video_id;
  return parse_impl(raw_text, query_id, ctx, round);
}

namespace {

constexpr std::string_view kExtractSystem =
    "You extract atomic, source-grounded claims from one video for a persona-grounded query. "
    "Use only what the video frames, on-screen text, and transcripts show.";

constexpr std::string_view kOutputFormatText =
    "Output one atomic claim per line, exactly in the form\n"
    "[<modality>|<start>-<end>] <sentence>\n"
    "where <modality> is one of visual, on_screen_text, transcript, speech and <start>, <end> are seconds on the "
    "video timeline.\n"
    "Each claim is a single declarative sentence that can be judged as supported or unsupported by the video.\n"
    "Do not combine several events, entities, or causal relations in one claim.\n"
    "Output nothing else. If the video holds nothing relevant to the query, output no lines.";

}  // namespace

backends::PromptDocument build_prompt(const PersonaQuery& pq, const VideoContext& video, const VisualInput& visual,
                                      const std::optional<Transcript>& transcript, const Refinement* refinement) {
  std::string u;
  auto section = [&](std::string_view header, const std::string& body) {
    if (!u.empty()) u += "\n";
    u += header;
    u += "\n";
    u += body;
    if (!body.empty() && body.back() != '\n') u += "\n";
  };

  section(prompt::kPersonaTitle, pq.persona_title);
  section(prompt::kPersonaBackground, pq.persona_background);
  section(prompt::kQuery, pq.query_text);

  std::string v = "video_id: " + video.video_id + "\nduration_s: " + format_seconds(video.duration_s) + "\n";
  if (visual.is_clip()) {
    v += "input: keyframe_clip (" + std::to_string(visual.clip->selected.size()) + " frames)\n";
    for (const auto& f : visual.clip->selected) {
      v += "frame " + std::to_string(f.frame_index) + " @ " + format_seconds(f.timestamp_s) + "s: " + f.frame_path + "\n";
    }
  } else {
    v += "input: chunks (" + std::to_string(visual.chunks.size()) + ")\n";
    for (const auto& c : visual.chunks) {
      v += "chunk " + c.chunk_id + " [" + format_seconds(c.start_s) + "-" + format_seconds(c.end_s) + "]: " +
           video.media_path + "\n";
    }
  }
  section(prompt::kVideo, v);

  const bool have_transcript = transcript && transcript->usable() && !transcript->segments.empty();
  if (have_transcript) {
    std::string original;
    for (const auto& s : transcript->segments) {
      original += "[" + format_seconds(s.start_s) + "-" + format_seconds(s.end_s) + "] " + trim(s.text) + "\n";
    }
    section(std::string(prompt::kTranscriptOriginal) + ", language=" + transcript->language, original);
    if (is_english(transcript->language)) {
      section(prompt::kTranscriptEnglish, std::string(prompt::kSameAsOriginal));
    } else if (transcript->english_text) {
      section(prompt::kTranscriptEnglish, *transcript->english_text);
    } else {
      section(prompt::kTranscriptEnglish, "(no translation available)");
    }
  } else {
    section(prompt::kTranscriptOriginal, std::string(prompt::kNoTranscript));
    section(prompt::kTranscriptEnglish, std::string(prompt::kNoTranscript));
  }

  if (refinement != nullptr) {
    section(prompt::kPreviousClaims, serialize_claims(refinement->previous));
    section(std::string(prompt::kCriticReport) + " (round " + std::to_string(refinement->round) + ")",
            refinement->feedback);
  }
  section(prompt::kOutputFormat, std::string(kOutputFormatText));

  std::string system(kExtractSystem);
  system += " [";
  system += prompt::kPromptVersion;
  system += "]";
  return {system, u};
}

std::string extract_claims(const backends::PromptDocument& prompt, backends::ChatBackend& vlm,
                           const std::string& query_id, const std::string& video_id) {
  try {
    return vlm.chat_complete(prompt, backends::ChatRole::kExtract);
  } catch (const Error& e) {
    throw Error(ErrorKind::kExtraction,
                "extraction error for query " + query_id + " video " + video_id + ": " + e.what());
  }
}

Persona synthesize_persona(const std::string& query_text, const std::vector<std::string>& sample_claims,
                           backends::ChatBackend& llm) {
  if (trim(query_text).empty()) throw_error(ErrorKind::kInvalidInput, "persona synthesis needs query text");

  std::string u = std::string(prompt::kQuery) + "\n" + trim(query_text) + "\n";
  if (!sample_claims.empty()) {
    u += "\n" + std::string(prompt::kSampleClaims) + "\n";
    for (const auto& c : sample_claims) u += "- " + c + "\n";
  }
  u += "\n" + std::string(prompt::kOutputFormat) +
       "\nDescribe the person most likely to ask this query. Reply with exactly two lines:\n"
       "TITLE: <short role title, at most 12 words>\nBACKGROUND: <one paragraph on their background and needs>\n";
  const backends::PromptDocument prompt{"You write reader personas for news research queries. [" +
                                            std::string(prompt::kPromptVersion) + "]",
                                        u};

  std::string reply;
  try {
    reply = llm.chat_complete(prompt, backends::ChatRole::kPersona);
  } catch (const Error& e) {
    throw Error(ErrorKind::kBackend, std::string("persona error: ") + e.what());
  }

  Persona p;
  bool in_background = false;
  for (const auto& raw : split_lines(reply)) {
    const auto line = trim(raw);
    if (starts_with(line, "TITLE:")) {
      p.title = trim(line.substr(6));
      in_background = false;
    } else if (starts_with(line, "BACKGROUND:")) {
      p.background = trim(line.substr(11));
      in_background = true;
    } else if (in_background && !line.empty()) {
      p.background += " " + line;
    }
  }
  if (p.title.empty() || p.background.empty()) {
    throw Error(ErrorKind::kBackend, "persona error: reply has no TITLE/BACKGROUND lines");
  }
  const auto words = tokenize(p.title);
  if (words.size() > 12) {
    // Keep the original casing: cut after the 12th whitespace-separated word.
    std::size_t seen = 0, pos = 0;
    bool in_word = false;
    for (; pos < p.title.size(); ++pos) {
      const bool ws = std::isspace(static_cast<unsigned char>(p.title[pos])) != 0;
      if (!ws && !in_word) {
        if (seen == 12) break;
        ++seen;
      }
      in_word = !ws;
    }
    p.title = trim(p.title.substr(0, pos));
  }
  return p;
}

}  // namespace craft
