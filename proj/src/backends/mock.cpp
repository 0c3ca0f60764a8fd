#include "craft/backends/mock.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <set>

#include "craft/prompt_format.hpp"
#include "craft/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace craft::backends {
namespace {

std::string read_small_text(const std::string& path) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return {};
  if (fs::file_size(path, ec) > (1u << 20)) return {};
  return trim(read_file(path));
}

// First sentence of `text`, terminated with a period if it had none.
std::string first_sentence(const std::string& text) {
  std::string t = trim(text);
  for (std::size_t i = 0; i < t.size(); ++i) {
    const char c = t[i];
    if (c == '.' || c == '!' || c == '?') {
      const bool decimal = c == '.' && i > 0 && i + 1 < t.size() && std::isdigit(static_cast<unsigned char>(t[i - 1])) &&
                           std::isdigit(static_cast<unsigned char>(t[i + 1]));
      if (!decimal) return t.substr(0, i + 1);
    }
  }
  if (!t.empty()) t += '.';
  return t;
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string rest = trim(text);
  while (!rest.empty()) {
    std::string s = first_sentence(rest);
    const bool appended_period = s.size() > rest.size();
    out.push_back(s);
    if (appended_period) break;
    rest = trim(rest.substr(s.size()));
  }
  return out;
}

// "[12.000-15.500] text" -> (12.0, 15.5, text)
bool parse_timed_line(const std::string& line, double& start, double& end, std::string& text) {
  if (line.empty() || line[0] != '[') return false;
  const auto close = line.find(']');
  const auto dash = line.find('-', 1);
  if (close == std::string::npos || dash == std::string::npos || dash > close) return false;
  char* endp = nullptr;
  start = std::strtod(line.c_str() + 1, &endp);
  end = std::strtod(line.c_str() + dash + 1, &endp);
  text = trim(line.substr(close + 1));
  return true;
}

std::string claim_line(const std::string& modality, double start, double end, const std::string& text) {
  return "[" + modality + "|" + format_fixed(start, 1) + "-" + format_fixed(end, 1) + "] " + text;
}

std::string section_value(const std::vector<std::string>& lines, std::string_view key) {
  for (const auto& l : lines) {
    if (starts_with(l, key)) return trim(l.substr(key.size()));
  }
  return {};
}

}  // namespace

EmbeddingVector HashEmbedder::embed_one(const std::string& text) const {
  EmbeddingVector v;
  v.values.assign(dim_, 0.0);
  for (const auto& tok : content_tokens(text)) {
    const std::uint64_t h = fnv1a64(tok, seed_ ^ 0xcbf29ce484222325ULL);
    v.values[h % dim_] += (h >> 63) != 0 ? -1.0 : 1.0;
  }
  double norm = 0.0;
  for (double x : v.values) norm += x * x;
  if (norm == 0.0) {
    for (std::size_t i = 0; i < dim_; ++i) {
      const std::uint64_t h = fnv1a64(text + "#" + std::to_string(i), seed_);
      v.values[i] = static_cast<double>(h % 2001) / 1000.0 - 1.0;
    }
    norm = 0.0;
    for (double x : v.values) norm += x * x;
    if (norm == 0.0) v.values[0] = norm = 1.0;
  }
  const double inv = 1.0 / std::sqrt(norm);
  for (double& x : v.values) x *= inv;
  return v;
}

std::vector<EmbeddingVector> HashEmbedder::embed_text(std::span<const std::string> texts) {
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

std::vector<EmbeddingVector> HashEmbedder::embed_image(std::span<const std::string> frame_paths) {
  std::vector<EmbeddingVector> out;
  out.reserve(frame_paths.size());
  for (const auto& p : frame_paths) {
    const std::string content = read_small_text(p);
    out.push_back(embed_one(content.empty() ? p : content));
  }
  return out;
}

ScriptedChat::ScriptedChat(bool strict) : strict_(strict) {
  rules_[ChatRole::kExtract] = rule_extract;
  rules_[ChatRole::kConsolidate] = rule_consolidate;
  rules_[ChatRole::kPersona] = rule_persona;
  rules_[ChatRole::kAdjudicate] = rule_adjudicate;
}

std::shared_ptr<ScriptedChat> ScriptedChat::from_fixture(const json& fixture, bool strict) {
  auto chat = std::make_shared<ScriptedChat>(strict);
  if (fixture.contains("chat")) {
    for (const auto& entry : fixture.at("chat")) {
      const auto role_name = entry.at("role").get<std::string>();
      ChatRole role = ChatRole::kExtract;
      if (role_name == "consolidate") role = ChatRole::kConsolidate;
      else if (role_name == "persona") role = ChatRole::kPersona;
      else if (role_name == "adjudicate") role = ChatRole::kAdjudicate;
      else if (role_name != "extract") throw_error(ErrorKind::kValidation, "unknown chat role in fixture: " + role_name);
      chat->script(role, entry.at("fingerprint").get<std::string>(), entry.at("response").get<std::string>());
    }
  }
  return chat;
}

void ScriptedChat::script(ChatRole role, const std::string& fingerprint, std::string response) {
  std::lock_guard lock(mu_);
  scripted_[{role, fingerprint}] = std::move(response);
}

void ScriptedChat::set_rule(ChatRole role, Rule rule) {
  std::lock_guard lock(mu_);
  rules_[role] = std::move(rule);
}

std::string ScriptedChat::chat_complete(const PromptDocument& prompt, ChatRole role) {
  const std::string fp = prompt.fingerprint();
  Rule rule;
  {
    std::lock_guard lock(mu_);
    if (const auto it = scripted_.find({role, fp}); it != scripted_.end()) return it->second;
    if (strict_) {
      throw BackendError(ErrorKind::kBackend, to_string(role),
                         std::string("no scripted response for role ") + to_string(role) + " fingerprint " + fp);
    }
    rule = rules_[role];
  }
  if (!rule) throw BackendError(ErrorKind::kBackend, to_string(role), "no rule for role");
  return rule(prompt);
}

std::string rule_extract(const PromptDocument& prompt) {
  const std::string& doc = prompt.user;
  std::string out;

  if (auto previous = prompt::section(doc, prompt::kPreviousClaims)) {
    std::set<std::string> drop;
    for (const auto& line : prompt::section(doc, prompt::kCriticReport).value_or(std::vector<std::string>{})) {
      if (starts_with(line, prompt::kRemove)) {
        drop.insert(trim(line.substr(prompt::kRemove.size())));
      } else if (starts_with(line, prompt::kWeak)) {
        if (const auto p = line.find("): "); p != std::string::npos) drop.insert(trim(line.substr(p + 3)));
      } else if (starts_with(line, prompt::kContradiction)) {
        std::string body = line.substr(prompt::kContradiction.size());
        if (const auto h = body.find(prompt::kHintMarker); h != std::string::npos) body = body.substr(0, h);
        if (const auto s = body.find(prompt::kPairSeparator); s != std::string::npos) {
          drop.insert(trim(body.substr(s + prompt::kPairSeparator.size())));
        }
      }
    }
    for (const auto& line : *previous) {
      const auto l = trim(line);
      if (!l.empty() && drop.count(l) == 0) out += l + "\n";
    }
    return out;
  }

  const auto video = prompt::section(doc, prompt::kVideo).value_or(std::vector<std::string>{});
  const double duration = std::strtod(section_value(video, "duration_s:").c_str(), nullptr);
  std::set<std::string> seen;
  for (const auto& line : video) {
    // frame <i> @ <t>s: <path>
    if (!starts_with(line, "frame ")) continue;
    const auto at = line.find(" @ ");
    const auto colon = line.find("s: ", at == std::string::npos ? 0 : at);
    if (at == std::string::npos || colon == std::string::npos) continue;
    const double t = std::strtod(line.c_str() + at + 3, nullptr);
    std::string caption = read_small_text(trim(line.substr(colon + 3)));
    if (caption.empty()) continue;
    std::string modality = "visual";
    if (starts_with(caption, "TEXT:")) {
      modality = "on_screen_text";
      caption = trim(caption.substr(5));
    }
    caption = first_sentence(caption);
    if (!seen.insert(normalize_text(caption)).second) continue;
    const double end = duration > 0.0 ? std::min(t + 1.0, duration) : t + 1.0;
    out += claim_line(modality, t, end, caption) + "\n";
  }

  std::vector<std::tuple<double, double, std::string>> segments;
  for (const auto& line : prompt::section(doc, prompt::kTranscriptOriginal).value_or(std::vector<std::string>{})) {
    double s = 0, e = 0;
    std::string text;
    if (parse_timed_line(line, s, e, text)) segments.emplace_back(s, e, text);
  }
  const auto english = prompt::section(doc, prompt::kTranscriptEnglish).value_or(std::vector<std::string>{});
  std::string english_text;
  for (const auto& l : english) english_text += (english_text.empty() ? "" : " ") + trim(l);

  if (english_text == prompt::kSameAsOriginal) {
    for (const auto& [s, e, text] : segments) out += claim_line("transcript", s, e, first_sentence(text)) + "\n";
  } else if (!segments.empty() && english_text != prompt::kNoTranscript && !english_text.empty()) {
    const auto sentences = split_sentences(english_text);
    const double all_start = std::get<0>(segments.front());
    const double all_end = std::get<1>(segments.back());
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      const bool aligned = sentences.size() == segments.size();
      const double s = aligned ? std::get<0>(segments[i]) : all_start;
      const double e = aligned ? std::get<1>(segments[i]) : all_end;
      out += claim_line("speech", s, e, sentences[i]) + "\n";
    }
  }
  return out;
}

std::string rule_consolidate(const PromptDocument& prompt) {
  std::string out;
  for (const auto& line : prompt::section(prompt.user, prompt::kClaimPacket).value_or(std::vector<std::string>{})) {
    // C<n> (score ..., ...): text
    const auto space = line.find(' ');
    const auto body = line.find("): ");
    if (space == std::string::npos || body == std::string::npos) continue;
    out += trim(line.substr(body + 3)) + " [" + line.substr(0, space) + "]\n";
  }
  return out;
}

std::string rule_persona(const PromptDocument& prompt) {
  const auto query_lines = prompt::section(prompt.user, prompt::kQuery).value_or(std::vector<std::string>{});
  std::string query;
  for (const auto& l : query_lines) query += (query.empty() ? "" : " ") + trim(l);
  const auto toks = content_tokens(query);
  std::string topic;
  for (std::size_t i = 0; i < toks.size() && i < 6; ++i) topic += (i ? " " : "") + toks[i];
  return "TITLE: Analyst following " + topic + "\nBACKGROUND: A reader who needs a sourced, factual summary answering: " +
         query + "\n";
}

std::string rule_adjudicate(const PromptDocument& prompt) {
  const auto lines = prompt::section(prompt.user, prompt::kContradictionProbability).value_or(std::vector<std::string>{});
  const double p = lines.empty() ? 0.0 : std::strtod(trim(lines.front()).c_str(), nullptr);
  if (p >= 0.8) return "INCONSISTENT: the claims assert opposite facts about the same event. HINT: remove claim B.";
  return "CONSISTENT: the claims mention related but compatible facts.";
}

double token_overlap(const std::string& claim_text, const std::string& evidence_text) {
  const auto claim = content_tokens(claim_text);
  const std::set<std::string> claim_set(claim.begin(), claim.end());
  if (claim_set.empty()) return 0.0;
  const auto ev = content_tokens(evidence_text);
  const std::set<std::string> ev_set(ev.begin(), ev.end());
  std::size_t shared = 0;
  for (const auto& t : claim_set) shared += ev_set.count(t);
  return static_cast<double>(shared) / static_cast<double>(claim_set.size());
}

double OverlapEntailment::entailment_score(const std::string& claim_text, const EvidenceRef& evidence) {
  if (const auto it = overrides_.find(claim_text); it != overrides_.end()) return it->second;
  std::string text = evidence.transcript_window;
  for (const auto& f : evidence.frame_paths) {
    std::string caption = read_small_text(f);
    if (starts_with(caption, "TEXT:")) caption = caption.substr(5);
    text += " " + caption;
  }
  return token_overlap(claim_text, text);
}

RuleNli::RuleNli() {
  static const std::pair<const char*, const char*> kDefaults[] = {
      {"open", "closed"},    {"rising", "falling"},  {"rises", "falls"},   {"increased", "decreased"},
      {"alive", "dead"},     {"present", "absent"},  {"won", "lost"},      {"true", "false"},
      {"before", "after"},   {"above", "below"},     {"inside", "outside"}, {"confirmed", "denied"},
      {"accepted", "rejected"}, {"survived", "died"},
  };
  for (const auto& [a, b] : kDefaults) add_antonyms(a, b);
}

void RuleNli::add_antonyms(const std::string& a, const std::string& b) { antonyms_.emplace_back(a, b); }

void RuleNli::script(const std::string& premise, const std::string& hypothesis, NliProbs probs) {
  scripted_[{premise, hypothesis}] = probs;
}

NliProbs RuleNli::nli_probs(const std::string& premise, const std::string& hypothesis) {
  if (const auto it = scripted_.find({premise, hypothesis}); it != scripted_.end()) return it->second;
  const auto p = content_tokens(premise);
  const auto h = content_tokens(hypothesis);
  if (p == h) return {0.9, 0.08, 0.02};
  const std::set<std::string> ps(p.begin(), p.end()), hs(h.begin(), h.end());
  for (const auto& [a, b] : antonyms_) {
    if ((ps.count(a) && hs.count(b) && !ps.count(b) && !hs.count(a)) ||
        (ps.count(b) && hs.count(a) && !ps.count(a) && !hs.count(b))) {
      return {0.05, 0.05, 0.9};
    }
  }
  return {0.1, 0.8, 0.1};
}

std::shared_ptr<RuleNli> RuleNli::from_fixture(const json& fixture) {
  auto nli = std::make_shared<RuleNli>();
  if (fixture.contains("antonyms")) {
    for (const auto& pair : fixture.at("antonyms")) nli->add_antonyms(pair.at(0), pair.at(1));
  }
  if (fixture.contains("nli")) {
    for (const auto& e : fixture.at("nli")) {
      const auto& pr = e.at("probs");
      nli->script(e.at("premise"), e.at("hypothesis"), {pr.at(0), pr.at(1), pr.at(2)});
    }
  }
  return nli;
}

bool FixtureAsr::accepts(const std::string& language) const {
  return supported_.empty() || supported_.count(language) != 0;
}

AsrResult FixtureAsr::asr_transcribe(const std::string& media_path, const std::string& language_hint) {
  if (!accepts(language_hint)) throw UnsupportedLanguageError("asr", language_hint);
  AsrResult result;
  result.language = language_hint;
  const std::string sidecar = media_path + ".asr.json";
  if (!fs::exists(sidecar)) {
    if (strict_) throw BackendError(ErrorKind::kBackend, "asr", "missing ASR sidecar " + sidecar);
    return result;
  }
  const json j = read_json_file(sidecar);
  for (const auto& seg : j.at("segments")) {
    result.segments.push_back({seg.at("start_s").get<double>(), seg.at("end_s").get<double>(),
                               seg.at("text").get<std::string>()});
  }
  return result;
}

std::string FixtureTranslator::translate(const std::string& text, const std::string& source_language) {
  if (const auto it = table_.find(text); it != table_.end()) return it->second;
  if (strict_) throw BackendError(ErrorKind::kBackend, "translate", "no fixture translation for text");
  return "[" + source_language + "] " + text;
}

json load_fixture(const std::string& script_path) {
  if (script_path.empty()) return json::object();
  return read_json_file(script_path);
}

}  // namespace craft::backends
