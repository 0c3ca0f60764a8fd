#include "craft/backends/backend.hpp"

#include <algorithm>
#include <cmath>

#include "craft/text.hpp"

namespace craft::backends {

const char* to_string(ChatRole role) {
  switch (role) {
    case ChatRole::kExtract: return "extract";
    case ChatRole::kConsolidate: return "consolidate";
    case ChatRole::kPersona: return "persona";
    case ChatRole::kAdjudicate: return "adjudicate";
  }
  return "unknown";
}

std::string PromptDocument::fingerprint() const {
  std::string joined = system;
  joined += '\x1e';
  joined += user;
  return hex64(fnv1a64(joined));
}

void check_score(const std::string& role, double score) {
  if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
    throw BackendError(ErrorKind::kBackendContract, role, role + ": score out of [0,1]: " + std::to_string(score));
  }
}

void check_distribution(const std::string& role, const NliProbs& p) {
  const double parts[] = {p.entailment, p.neutral, p.contradiction};
  for (double v : parts) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw BackendError(ErrorKind::kBackendContract, role, role + ": probability out of [0,1]");
    }
  }
  const double sum = p.entailment + p.neutral + p.contradiction;
  if (std::abs(sum - 1.0) > 1e-6) {
    throw BackendError(ErrorKind::kBackendContract, role,
                       role + ": NLI probabilities sum to " + format_fixed(sum, 9) + ", not 1");
  }
}

double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw BackendError(ErrorKind::kBackendContract, "embed",
                       "embedding dimension mismatch: " + std::to_string(a.dim()) + " vs " + std::to_string(b.dim()));
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (!(na > 0.0) || !(nb > 0.0)) {
    throw BackendError(ErrorKind::kBackendContract, "embed", "zero-norm embedding cannot be normalized");
  }
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

void CallCounts::add(const std::string& role, std::size_t n) {
  std::lock_guard lock(mu_);
  counts_[role] += n;
}

std::size_t CallCounts::get(const std::string& role) const {
  std::lock_guard lock(mu_);
  const auto it = counts_.find(role);
  return it == counts_.end() ? 0 : it->second;
}

std::map<std::string, std::size_t> CallCounts::snapshot() const {
  std::lock_guard lock(mu_);
  return counts_;
}

std::size_t CallCounts::total() const {
  std::lock_guard lock(mu_);
  std::size_t t = 0;
  for (const auto& [_, n] : counts_) t += n;
  return t;
}

}  // namespace craft::backends
