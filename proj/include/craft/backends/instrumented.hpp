#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>

#include "craft/backends/backend.hpp"

namespace craft::backends {

/// Caps the number of in-flight calls through one backend.
class ConcurrencyLimiter {
 public:
  explicit ConcurrencyLimiter(std::size_t max_in_flight) : max_(max_in_flight == 0 ? 1 : max_in_flight) {}

  class Permit {
   public:
    explicit Permit(ConcurrencyLimiter& l) : l_(l) { l_.acquire(); }
    ~Permit() { l_.release(); }
    Permit(const Permit&) = delete;
    Permit& operator=(const Permit&) = delete;

   private:
    ConcurrencyLimiter& l_;
  };

 private:
  void acquire();
  void release();

  std::mutex mu_;
  std::condition_variable cv_;
  std::size_t in_flight_ = 0;
  std::size_t max_;
};

/// Wrap a backend so every call is counted under its role name, capped by
/// `max_concurrency`, and checked against the wire contract (ranges, NLI
/// distribution, embedding arity and dimension stability).
std::shared_ptr<Embedder> instrument(std::shared_ptr<Embedder> inner, std::shared_ptr<CallCounts> counts,
                                     std::size_t max_concurrency);
std::shared_ptr<ChatBackend> instrument(std::shared_ptr<ChatBackend> inner, std::shared_ptr<CallCounts> counts,
                                        std::size_t max_concurrency);
std::shared_ptr<EntailmentScorer> instrument(std::shared_ptr<EntailmentScorer> inner,
                                             std::shared_ptr<CallCounts> counts, std::size_t max_concurrency);
std::shared_ptr<NliBackend> instrument(std::shared_ptr<NliBackend> inner, std::shared_ptr<CallCounts> counts,
                                       std::size_t max_concurrency);
std::shared_ptr<AsrBackend> instrument(std::shared_ptr<AsrBackend> inner, std::string role,
                                       std::shared_ptr<CallCounts> counts, std::size_t max_concurrency);
std::shared_ptr<Translator> instrument(std::shared_ptr<Translator> inner, std::shared_ptr<CallCounts> counts,
                                       std::size_t max_concurrency);

/// Routes chat calls to a per-role backend.
class ChatRouter : public ChatBackend {
 public:
  void set(ChatRole role, std::shared_ptr<ChatBackend> backend);
  std::string chat_complete(const PromptDocument& prompt, ChatRole role) override;

 private:
  std::map<ChatRole, std::shared_ptr<ChatBackend>> routes_;
};

}  // namespace craft::backends
