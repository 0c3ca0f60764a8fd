#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "craft/error.hpp"

namespace craft::backends {

/// Fixed-dimension embedding produced by an image or text encoder.
struct EmbeddingVector {
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
};

enum class ChatRole { kExtract, kConsolidate, kPersona, kAdjudicate };

const char* to_string(ChatRole role);

/// A prompt sent through the chat-completions contract.
struct PromptDocument {
  std::string system;
  std::string user;

  /// Stable key used by scripted mocks and audit logs.
  std::string fingerprint() const;
};

/// What the entailment scorer grounds a claim against: the cited span of one
/// chunk, with the transcript text and frames that fall inside it.
struct EvidenceRef {
  std::string video_id;
  std::string parent_video_id;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string media_path;
  std::string transcript_window;
  std::vector<std::string> frame_paths;
};

struct NliProbs {
  double entailment = 0.0;
  double neutral = 0.0;
  double contradiction = 0.0;
};

struct TranscriptSegment {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string text;

  bool operator==(const TranscriptSegment&) const = default;
};

struct AsrResult {
  std::string language;
  std::vector<TranscriptSegment> segments;
};

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::vector<EmbeddingVector> embed_text(std::span<const std::string> texts) = 0;
  /// Frame references are file paths from a frame manifest.
  virtual std::vector<EmbeddingVector> embed_image(std::span<const std::string> frame_paths) = 0;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string chat_complete(const PromptDocument& prompt, ChatRole role) = 0;
};

class EntailmentScorer {
 public:
  virtual ~EntailmentScorer() = default;
  /// Graded support of `claim_text` by the evidence, in [0,1].
  virtual double entailment_score(const std::string& claim_text, const EvidenceRef& evidence) = 0;
};

class NliBackend {
 public:
  virtual ~NliBackend() = default;
  virtual NliProbs nli_probs(const std::string& premise, const std::string& hypothesis) = 0;
};

/// Thrown by an ASR backend asked for a language outside its supported set;
/// callers treat it as the signal to fall back.
class UnsupportedLanguageError : public BackendError {
 public:
  UnsupportedLanguageError(std::string role, const std::string& language)
      : BackendError(ErrorKind::kBackend, std::move(role), "unsupported language " + language), language_(language) {}

  const std::string& language() const noexcept { return language_; }

 private:
  std::string language_;
};

class AsrBackend {
 public:
  virtual ~AsrBackend() = default;
  virtual const std::set<std::string>& supported_languages() const = 0;
  virtual AsrResult asr_transcribe(const std::string& media_path, const std::string& language_hint) = 0;
};

class Translator {
 public:
  virtual ~Translator() = default;
  virtual std::string translate(const std::string& text, const std::string& source_language) = 0;
};

/// Contract checks shared by the mocks and the remote clients.
void check_score(const std::string& role, double score);
void check_distribution(const std::string& role, const NliProbs& probs);

double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

/// Thread-safe per-role call counter; its snapshot goes into the run manifest.
class CallCounts {
 public:
  void add(const std::string& role, std::size_t n = 1);
  std::size_t get(const std::string& role) const;
  std::map<std::string, std::size_t> snapshot() const;
  std::size_t total() const;

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::size_t> counts_;
};

enum class BackendKind { kMock, kRemote };

struct BackendConfig {
  BackendKind kind = BackendKind::kMock;
  std::string endpoint;
  std::string model_name;
  double timeout_s = 60.0;
  int max_retries = 3;
  double backoff_s = 0.5;
  /// Fixture file for mocks; empty means rule-only.
  std::string script_path;
  bool strict = false;
  /// Only meaningful for the primary ASR backend.
  std::vector<std::string> supported_languages;
};

/// Every backend role the pipeline talks to.
struct Backends {
  std::shared_ptr<Embedder> embed;
  std::shared_ptr<AsrBackend> asr_primary;
  std::shared_ptr<AsrBackend> asr_fallback;
  std::shared_ptr<Translator> translate;
  std::shared_ptr<ChatBackend> chat;
  std::shared_ptr<EntailmentScorer> entailment;
  std::shared_ptr<NliBackend> nli;
  std::shared_ptr<CallCounts> counts;
};

}  // namespace craft::backends
