#pragma once

#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "craft/backends/backend.hpp"

// Clients for remote inference services. Text generation goes through an
// OpenAI-compatible chat-completions endpoint; the other roles use the small
// JSON endpoints documented in docs/backend_contract.md:
//
//   POST /v1/chat/completions  {model, messages, temperature, max_tokens, seed}
//   POST /v1/embeddings        {model, modality: "text"|"image", input: [..]} -> {data: [{index, embedding}]}
//   POST /v1/nli               {model, premise, hypothesis} -> {entailment, neutral, contradiction}
//   POST /v1/entailment        {model, claim, evidence: {...}} -> {score}
//   POST /v1/asr               {model, media_path, language} -> {language, segments: [{start_s, end_s, text}]}
//   POST /v1/translate         {model, text, source_language} -> {text}

namespace craft::backends {

/// JSON-over-HTTP POST with retries. Connection failures, timeouts, 429 and
/// 5xx responses are retried up to max_retries times with exponential
/// backoff; other 4xx responses fail immediately.
class HttpJsonClient {
 public:
  HttpJsonClient(std::string role, const BackendConfig& config);

  struct Response {
    int status = 0;
    nlohmann::json body;
  };

  /// Returns the parsed body of a 2xx response; throws BackendError otherwise.
  nlohmann::json post(const std::string& path, const nlohmann::json& request) const;

  /// Like post() but hands back non-retryable 4xx responses instead of throwing.
  Response post_raw(const std::string& path, const nlohmann::json& request) const;

  const std::string& role() const { return role_; }
  const std::string& model() const { return model_; }

 private:
  std::string role_;
  std::string scheme_host_port_;
  std::string path_prefix_;
  std::string model_;
  std::string api_key_;
  double timeout_s_;
  int max_retries_;
  double backoff_s_;
};

class RemoteChat : public ChatBackend {
 public:
  explicit RemoteChat(const BackendConfig& config, int max_tokens = 2048);
  std::string chat_complete(const PromptDocument& prompt, ChatRole role) override;

 private:
  HttpJsonClient http_;
  int max_tokens_;
};

class RemoteEmbedder : public Embedder {
 public:
  explicit RemoteEmbedder(const BackendConfig& config) : http_("embed", config) {}
  std::vector<EmbeddingVector> embed_text(std::span<const std::string> texts) override;
  std::vector<EmbeddingVector> embed_image(std::span<const std::string> frame_paths) override;

 private:
  std::vector<EmbeddingVector> embed(const char* modality, std::span<const std::string> inputs);
  HttpJsonClient http_;
};

class RemoteNli : public NliBackend {
 public:
  explicit RemoteNli(const BackendConfig& config) : http_("nli", config) {}
  NliProbs nli_probs(const std::string& premise, const std::string& hypothesis) override;

 private:
  HttpJsonClient http_;
};

class RemoteEntailment : public EntailmentScorer {
 public:
  explicit RemoteEntailment(const BackendConfig& config) : http_("entailment", config) {}
  double entailment_score(const std::string& claim_text, const EvidenceRef& evidence) override;

 private:
  HttpJsonClient http_;
};

/// A 422 response whose error code is "unsupported_language" (or a language
/// outside the configured supported set) raises UnsupportedLanguageError.
class RemoteAsr : public AsrBackend {
 public:
  RemoteAsr(std::string role, const BackendConfig& config);
  const std::set<std::string>& supported_languages() const override { return supported_; }
  AsrResult asr_transcribe(const std::string& media_path, const std::string& language_hint) override;

 private:
  HttpJsonClient http_;
  std::set<std::string> supported_;
};

class RemoteTranslator : public Translator {
 public:
  explicit RemoteTranslator(const BackendConfig& config) : http_("translate", config) {}
  std::string translate(const std::string& text, const std::string& source_language) override;

 private:
  HttpJsonClient http_;
};

nlohmann::json to_json(const EvidenceRef& evidence);

}  // namespace craft::backends
