#include "craft/backends/remote.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

using nlohmann::json;

namespace craft::backends {
namespace {

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

HttpJsonClient::HttpJsonClient(std::string role, const BackendConfig& config)
    : role_(std::move(role)),
      model_(config.model_name),
      timeout_s_(config.timeout_s),
      max_retries_(config.max_retries),
      backoff_s_(config.backoff_s) {
  if (config.endpoint.empty()) {
    throw BackendError(ErrorKind::kValidation, role_, role_ + ": remote backend requires an endpoint");
  }
  const auto scheme_end = config.endpoint.find("://");
  const auto host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
  const auto slash = config.endpoint.find('/', host_start);
  scheme_host_port_ = config.endpoint.substr(0, slash);
  if (slash != std::string::npos) path_prefix_ = config.endpoint.substr(slash);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
  if (const char* key = std::getenv("CRAFT_API_KEY")) api_key_ = key;
}

HttpJsonClient::Response HttpJsonClient::post_raw(const std::string& path, const json& request) const {
  httplib::Client client(scheme_host_port_);
  const auto secs = static_cast<time_t>(timeout_s_);
  const auto usecs = static_cast<time_t>((timeout_s_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  const std::string body = request.dump();
  const std::string full_path = path_prefix_ + path;
  std::string last_error;
  for (int attempt = 0; attempt <= max_retries_; ++attempt) {
    if (attempt > 0) {
      const double delay = backoff_s_ * std::pow(2.0, attempt - 1);
      spdlog::warn("[{}] retry {}/{} after {:.3f}s: {}", role_, attempt, max_retries_, delay, last_error);
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    auto res = client.Post(full_path, headers, body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (retryable(res->status)) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    Response out;
    out.status = res->status;
    try {
      out.body = res->body.empty() ? json::object() : json::parse(res->body);
    } catch (const json::parse_error&) {
      if (res->status >= 200 && res->status < 300) {
        throw BackendError(ErrorKind::kBackendContract, role_, role_ + ": response is not JSON");
      }
      out.body = json{{"error", {{"message", res->body}}}};
    }
    return out;
  }
  throw BackendError(ErrorKind::kBackend, role_,
                     role_ + ": " + full_path + " failed after " + std::to_string(max_retries_ + 1) +
                         " attempts: " + last_error);
}

json HttpJsonClient::post(const std::string& path, const json& request) const {
  auto res = post_raw(path, request);
  if (res.status < 200 || res.status >= 300) {
    throw BackendError(ErrorKind::kBackend, role_,
                       role_ + ": HTTP " + std::to_string(res.status) + ": " + res.body.dump());
  }
  return std::move(res.body);
}

RemoteChat::RemoteChat(const BackendConfig& config, int max_tokens) : http_("chat", config), max_tokens_(max_tokens) {}

std::string RemoteChat::chat_complete(const PromptDocument& prompt, ChatRole role) {
  json messages = json::array();
  if (!prompt.system.empty()) messages.push_back({{"role", "system"}, {"content", prompt.system}});
  messages.push_back({{"role", "user"}, {"content", prompt.user}});
  const json request = {{"model", http_.model()}, {"messages", messages}, {"temperature", 0},
                        {"max_tokens", max_tokens_}, {"seed", 0}};
  const json body = http_.post("/v1/chat/completions", request);
  try {
    const auto& content = body.at("choices").at(0).at("message").at("content");
    return content.is_null() ? std::string() : content.get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(ErrorKind::kBackendContract, to_string(role),
                       std::string(to_string(role)) + ": malformed chat completion: " + e.what());
  }
}

std::vector<EmbeddingVector> RemoteEmbedder::embed(const char* modality, std::span<const std::string> inputs) {
  const json request = {{"model", http_.model()}, {"modality", modality},
                        {"input", std::vector<std::string>(inputs.begin(), inputs.end())}};
  const json body = http_.post("/v1/embeddings", request);
  std::vector<EmbeddingVector> out(inputs.size());
  try {
    const auto& data = body.at("data");
    if (data.size() != inputs.size()) {
      throw BackendError(ErrorKind::kBackendContract, "embed", "embedding count does not match input count");
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
      const std::size_t idx = data[i].value("index", i);
      if (idx >= out.size()) throw BackendError(ErrorKind::kBackendContract, "embed", "embedding index out of range");
      out[idx].values = data[i].at("embedding").get<std::vector<double>>();
    }
  } catch (const json::exception& e) {
    throw BackendError(ErrorKind::kBackendContract, "embed", std::string("malformed embeddings response: ") + e.what());
  }
  return out;
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_text(std::span<const std::string> texts) {
  return embed("text", texts);
}

std::vector<EmbeddingVector> RemoteEmbedder::embed_image(std::span<const std::string> frame_paths) {
  return embed("image", frame_paths);
}

NliProbs RemoteNli::nli_probs(const std::string& premise, const std::string& hypothesis) {
  const json body = http_.post("/v1/nli", {{"model", http_.model()}, {"premise", premise}, {"hypothesis", hypothesis}});
  try {
    NliProbs p{body.at("entailment").get<double>(), body.at("neutral").get<double>(),
               body.at("contradiction").get<double>()};
    check_distribution("nli", p);
    return p;
  } catch (const json::exception& e) {
    throw BackendError(ErrorKind::kBackendContract, "nli", std::string("malformed NLI response: ") + e.what());
  }
}

json to_json(const EvidenceRef& e) {
  return {{"video_id", e.video_id},   {"parent_video_id", e.parent_video_id}, {"start_s", e.start_s},
          {"end_s", e.end_s},         {"media_path", e.media_path},           {"transcript", e.transcript_window},
          {"frames", e.frame_paths}};
}

double RemoteEntailment::entailment_score(const std::string& claim_text, const EvidenceRef& evidence) {
  const json body =
      http_.post("/v1/entailment", {{"model", http_.model()}, {"claim", claim_text}, {"evidence", to_json(evidence)}});
  try {
    const double s = body.at("score").get<double>();
    check_score("entailment", s);
    return s;
  } catch (const json::exception& e) {
    throw BackendError(ErrorKind::kBackendContract, "entailment", std::string("malformed entailment response: ") + e.what());
  }
}

RemoteAsr::RemoteAsr(std::string role, const BackendConfig& config)
    : http_(std::move(role), config), supported_(config.supported_languages.begin(), config.supported_languages.end()) {}

AsrResult RemoteAsr::asr_transcribe(const std::string& media_path, const std::string& language_hint) {
  if (!supported_.empty() && supported_.count(language_hint) == 0) {
    throw UnsupportedLanguageError(http_.role(), language_hint);
  }
  const auto res =
      http_.post_raw("/v1/asr", {{"model", http_.model()}, {"media_path", media_path}, {"language", language_hint}});
  if (res.status == 422 && res.body.contains("error") && res.body["error"].value("code", "") == "unsupported_language") {
    throw UnsupportedLanguageError(http_.role(), language_hint);
  }
  if (res.status < 200 || res.status >= 300) {
    throw BackendError(ErrorKind::kBackend, http_.role(),
                       http_.role() + ": HTTP " + std::to_string(res.status) + ": " + res.body.dump());
  }
  AsrResult out;
  try {
    out.language = res.body.value("language", language_hint);
    for (const auto& seg : res.body.at("segments")) {
      out.segments.push_back({seg.at("start_s").get<double>(), seg.at("end_s").get<double>(),
                              seg.at("text").get<std::string>()});
    }
  } catch (const json::exception& e) {
    throw BackendError(ErrorKind::kBackendContract, http_.role(), std::string("malformed ASR response: ") + e.what());
  }
  return out;
}

std::string RemoteTranslator::translate(const std::string& text, const std::string& source_language) {
  const json body =
      http_.post("/v1/translate", {{"model", http_.model()}, {"text", text}, {"source_language", source_language}});
  try {
    return body.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(ErrorKind::kBackendContract, "translate", std::string("malformed translate response: ") + e.what());
  }
}

}  // namespace craft::backends
