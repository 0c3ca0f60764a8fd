#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "craft/backends/backend.hpp"

// Deterministic in-process backends. Every mock depends only on its input and
// its (seeded) fixture file, so two runs with the same config produce
// byte-identical caches and outputs.
//
// Fixture file layout (all sections optional):
//   {
//     "chat":        [{"role": "extract", "fingerprint": "<hex>", "response": "..."}],
//     "entailment":  {"<claim text>": 0.3},
//     "nli":         [{"premise": "...", "hypothesis": "...", "probs": [e, n, c]}],
//     "antonyms":    [["rises", "falls"]],
//     "translations": {"<source text>": "<english text>"}
//   }

namespace craft::backends {

/// Hashed bag-of-words embedding: each content token votes +-1 into a seeded
/// hash bucket and the result is normalized to unit length. Images are
/// embedded from the frame file's bytes (fixture frames are short captions),
/// so query/frame similarity tracks shared words.
class HashEmbedder : public Embedder {
 public:
  explicit HashEmbedder(std::size_t dim = 64, std::uint64_t seed = 0x5eedULL) : dim_(dim), seed_(seed) {}

  std::vector<EmbeddingVector> embed_text(std::span<const std::string> texts) override;
  std::vector<EmbeddingVector> embed_image(std::span<const std::string> frame_paths) override;

  EmbeddingVector embed_one(const std::string& text) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Chat responses keyed by (role, prompt fingerprint). A miss is an error in
/// strict mode; otherwise the role's deterministic rule answers.
class ScriptedChat : public ChatBackend {
 public:
  using Rule = std::function<std::string(const PromptDocument&)>;

  explicit ScriptedChat(bool strict = false);
  static std::shared_ptr<ScriptedChat> from_fixture(const nlohmann::json& fixture, bool strict);

  void script(ChatRole role, const std::string& fingerprint, std::string response);
  void set_rule(ChatRole role, Rule rule);

  std::string chat_complete(const PromptDocument& prompt, ChatRole role) override;

 private:
  bool strict_;
  std::mutex mu_;
  std::map<std::pair<ChatRole, std::string>, std::string> scripted_;
  std::map<ChatRole, Rule> rules_;
};

/// The built-in rules behind ScriptedChat in non-strict mode.
std::string rule_extract(const PromptDocument& prompt);
std::string rule_consolidate(const PromptDocument& prompt);
std::string rule_persona(const PromptDocument& prompt);
std::string rule_adjudicate(const PromptDocument& prompt);

/// Fraction of the claim's distinct content tokens that also occur in the
/// evidence text (transcript window plus the text of each frame file).
class OverlapEntailment : public EntailmentScorer {
 public:
  OverlapEntailment() = default;
  explicit OverlapEntailment(std::map<std::string, double> overrides) : overrides_(std::move(overrides)) {}

  double entailment_score(const std::string& claim_text, const EvidenceRef& evidence) override;

 private:
  std::map<std::string, double> overrides_;
};

double token_overlap(const std::string& claim_text, const std::string& evidence_text);

/// Rule-based NLI: normalized-identical sentences are entailment-dominant; a
/// sentence pair split by an antonym pair is contradiction-dominant (0.9);
/// anything else is neutral-dominant.
class RuleNli : public NliBackend {
 public:
  RuleNli();
  void add_antonyms(const std::string& a, const std::string& b);
  void script(const std::string& premise, const std::string& hypothesis, NliProbs probs);

  NliProbs nli_probs(const std::string& premise, const std::string& hypothesis) override;

  static std::shared_ptr<RuleNli> from_fixture(const nlohmann::json& fixture);

 private:
  std::vector<std::pair<std::string, std::string>> antonyms_;
  std::map<std::pair<std::string, std::string>, NliProbs> scripted_;
};

/// Reads segments from a sidecar `<media_path>.asr.json` containing
/// {"segments": [{"start_s", "end_s", "text"}]}.
class FixtureAsr : public AsrBackend {
 public:
  FixtureAsr(std::set<std::string> supported, bool strict) : supported_(std::move(supported)), strict_(strict) {}

  const std::set<std::string>& supported_languages() const override { return supported_; }
  AsrResult asr_transcribe(const std::string& media_path, const std::string& language_hint) override;

  /// Empty set means every language is accepted.
  bool accepts(const std::string& language) const;

 private:
  std::set<std::string> supported_;
  bool strict_;
};

/// Translation table lookup; in non-strict mode a miss returns the source
/// text tagged with its language.
class FixtureTranslator : public Translator {
 public:
  FixtureTranslator(std::map<std::string, std::string> table, bool strict)
      : table_(std::move(table)), strict_(strict) {}

  std::string translate(const std::string& text, const std::string& source_language) override;

 private:
  std::map<std::string, std::string> table_;
  bool strict_;
};

nlohmann::json load_fixture(const std::string& script_path);

}  // namespace craft::backends
