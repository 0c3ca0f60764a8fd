#include "craft/backends/instrumented.hpp"

#include <cmath>

namespace craft::backends {

void ConcurrencyLimiter::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [this] { return in_flight_ < max_; });
  ++in_flight_;
}

void ConcurrencyLimiter::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

namespace {

class InstrumentedEmbedder : public Embedder {
 public:
  InstrumentedEmbedder(std::shared_ptr<Embedder> inner, std::shared_ptr<CallCounts> counts, std::size_t cap)
      : inner_(std::move(inner)), counts_(std::move(counts)), limiter_(cap) {}

  std::vector<EmbeddingVector> embed_text(std::span<const std::string> texts) override {
    return run("embed_text", texts, [&] { return inner_->embed_text(texts); });
  }

  std::vector<EmbeddingVector> embed_image(std::span<const std::string> frame_paths) override {
    return run("embed_image", frame_paths, [&] { return inner_->embed_image(frame_paths); });
  }

 private:
  template <typename Fn>
  std::vector<EmbeddingVector> run(const char* role, std::span<const std::string> batch, Fn&& fn) {
    if (batch.empty()) throw BackendError(ErrorKind::kBackendContract, role, std::string(role) + ": empty batch");
    counts_->add(role);
    ConcurrencyLimiter::Permit permit(limiter_);
    auto out = fn();
    if (out.size() != batch.size()) {
      throw BackendError(ErrorKind::kBackendContract, role,
                         std::string(role) + ": expected " + std::to_string(batch.size()) + " vectors, got " +
                             std::to_string(out.size()));
    }
    std::lock_guard lock(dim_mu_);
    for (const auto& v : out) {
      if (v.dim() == 0) throw BackendError(ErrorKind::kBackendContract, role, "empty embedding");
      if (dim_ == 0) dim_ = v.dim();
      if (v.dim() != dim_) {
        throw BackendError(ErrorKind::kBackendContract, role,
                           "embedding dimension drift: " + std::to_string(dim_) + " then " + std::to_string(v.dim()));
      }
      for (double x : v.values) {
        if (!std::isfinite(x)) throw BackendError(ErrorKind::kBackendContract, role, "non-finite embedding entry");
      }
    }
    return out;
  }

  std::shared_ptr<Embedder> inner_;
  std::shared_ptr<CallCounts> counts_;
  ConcurrencyLimiter limiter_;
  std::mutex dim_mu_;
  std::size_t dim_ = 0;
};

class InstrumentedChat : public ChatBackend {
 public:
  InstrumentedChat(std::shared_ptr<ChatBackend> inner, std::shared_ptr<CallCounts> counts, std::size_t cap)
      : inner_(std::move(inner)), counts_(std::move(counts)), limiter_(cap) {}

  std::string chat_complete(const PromptDocument& prompt, ChatRole role) override {
    counts_->add(std::string("chat.") + to_string(role));
    ConcurrencyLimiter::Permit permit(limiter_);
    return inner_->chat_complete(prompt, role);
  }

 private:
  std::shared_ptr<ChatBackend> inner_;
  std::shared_ptr<CallCounts> counts_;
  ConcurrencyLimiter limiter_;
};

class InstrumentedEntailment : public EntailmentScorer {
 public:
  InstrumentedEntailment(std::shared_ptr<EntailmentScorer> inner, std::shared_ptr<CallCounts> counts, std::size_t cap)
      : inner_(std::move(inner)), counts_(std::move(counts)), limiter_(cap) {}

  double entailment_score(const std::string& claim_text, const EvidenceRef& evidence) override {
    counts_->add("entailment");
    ConcurrencyLimiter::Permit permit(limiter_);
    const double s = inner_->entailment_score(claim_text, evidence);
    check_score("entailment", s);
    return s;
  }

 private:
  std::shared_ptr<EntailmentScorer> inner_;
  std::shared_ptr<CallCounts> counts_;
  ConcurrencyLimiter limiter_;
};

class InstrumentedNli : public NliBackend {
 public:
  InstrumentedNli(std::shared_ptr<NliBackend> inner, std::shared_ptr<CallCounts> counts, std::size_t cap)
      : inner_(std::move(inner)), counts_(std::move(counts)), limiter_(cap) {}

  NliProbs nli_probs(const std::string& premise, const std::string& hypothesis) override {
    counts_->add("nli");
    ConcurrencyLimiter::Permit permit(limiter_);
    const auto p = inner_->nli_probs(premise, hypothesis);
    check_distribution("nli", p);
    return p;
  }

 private:
  std::shared_ptr<NliBackend> inner_;
  std::shared_ptr<CallCounts> counts_;
  ConcurrencyLimiter limiter_;
};

class InstrumentedAsr : public AsrBackend {
 public:
  InstrumentedAsr(std::shared_ptr<AsrBackend> inner, std::string role, std::shared_ptr<CallCounts> counts,
                  std::size_t cap)
      : inner_(std::move(inner)), role_(std::move(role)), counts_(std::move(counts)), limiter_(cap) {}

  const std::set<std::string>& supported_languages() const override { return inner_->supported_languages(); }

  AsrResult asr_transcribe(const std::string& media_path, const std::string& language_hint) override {
    counts_->add(role_);
    ConcurrencyLimiter::Permit permit(limiter_);
    auto result = inner_->asr_transcribe(media_path, language_hint);
    double prev_end = -1.0;
    for (const auto& seg : result.segments) {
      if (seg.end_s < seg.start_s || seg.start_s < prev_end) {
        throw BackendError(ErrorKind::kBackendContract, role_, role_ + ": segments overlap or are out of order");
      }
      prev_end = seg.end_s;
    }
    return result;
  }

 private:
  std::shared_ptr<AsrBackend> inner_;
  std::string role_;
  std::shared_ptr<CallCounts> counts_;
  ConcurrencyLimiter limiter_;
};

class InstrumentedTranslator : public Translator {
 public:
  InstrumentedTranslator(std::shared_ptr<Translator> inner, std::shared_ptr<CallCounts> counts, std::size_t cap)
      : inner_(std::move(inner)), counts_(std::move(counts)), limiter_(cap) {}

  std::string translate(const std::string& text, const std::string& source_language) override {
    counts_->add("translate");
    ConcurrencyLimiter::Permit permit(limiter_);
    return inner_->translate(text, source_language);
  }

 private:
  std::shared_ptr<Translator> inner_;
  std::shared_ptr<CallCounts> counts_;
  ConcurrencyLimiter limiter_;
};

}  // namespace

std::shared_ptr<Embedder> instrument(std::shared_ptr<Embedder> inner, std::shared_ptr<CallCounts> counts,
                                     std::size_t max_concurrency) {
  return std::make_shared<InstrumentedEmbedder>(std::move(inner), std::move(counts), max_concurrency);
}

std::shared_ptr<ChatBackend> instrument(std::shared_ptr<ChatBackend> inner, std::shared_ptr<CallCounts> counts,
                                        std::size_t max_concurrency) {
  return std::make_shared<InstrumentedChat>(std::move(inner), std::move(counts), max_concurrency);
}

std::shared_ptr<EntailmentScorer> instrument(std::shared_ptr<EntailmentScorer> inner,
                                             std::shared_ptr<CallCounts> counts, std::size_t max_concurrency) {
  return std::make_shared<InstrumentedEntailment>(std::move(inner), std::move(counts), max_concurrency);
}

std::shared_ptr<NliBackend> instrument(std::shared_ptr<NliBackend> inner, std::shared_ptr<CallCounts> counts,
                                       std::size_t max_concurrency) {
  return std::make_shared<InstrumentedNli>(std::move(inner), std::move(counts), max_concurrency);
}

std::shared_ptr<AsrBackend> instrument(std::shared_ptr<AsrBackend> inner, std::string role,
                                       std::shared_ptr<CallCounts> counts, std::size_t max_concurrency) {
  return std::make_shared<InstrumentedAsr>(std::move(inner), std::move(role), std::move(counts), max_concurrency);
}

std::shared_ptr<Translator> instrument(std::shared_ptr<Translator> inner, std::shared_ptr<CallCounts> counts,
                                       std::size_t max_concurrency) {
  return std::make_shared<InstrumentedTranslator>(std::move(inner), std::move(counts), max_concurrency);
}

void ChatRouter::set(ChatRole role, std::shared_ptr<ChatBackend> backend) { routes_[role] = std::move(backend); }

std::string ChatRouter::chat_complete(const PromptDocument& prompt, ChatRole role) {
  const auto it = routes_.find(role);
  if (it == routes_.end() || !it->second) {
    throw BackendError(ErrorKind::kBackend, to_string(role), std::string("no backend configured for role ") + to_string(role));
  }
  return it->second->chat_complete(prompt, role);
}

}  // namespace craft::backends
