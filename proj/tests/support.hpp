#pragma once

// Helpers and independent oracles shared by the unit tests and the
// acceptance binary.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "craft/backends/backend.hpp"
#include "craft/dks.hpp"
#include "craft/extraction.hpp"

namespace testing {

namespace fs = std::filesystem;

inline fs::path source_dir() { return fs::path(CRAFT_SOURCE_DIR); }
inline fs::path golden_dir() { return source_dir() / "testdata" / "golden"; }

class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("craft-test-" + std::to_string(rd()) + "-" + std::to_string(counter.fetch_add(1)));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& content) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << content;
}

inline craft::AtomicClaim make_claim(const std::string& id, const std::string& text, double start = 0.0,
                                     double end = 1.0, craft::Modality m = craft::Modality::kVisual,
                                     const std::string& video = "v1#000") {
  craft::AtomicClaim c;
  c.claim_id = id;
  c.query_id = "q";
  c.source_video_id = video;
  c.span = {start, end};
  c.modality = m;
  c.text = text;
  return c;
}

/// Entailment scores looked up by claim text; unknown claims get `fallback`.
class ScriptedScorer : public craft::backends::EntailmentScorer {
 public:
  explicit ScriptedScorer(std::map<std::string, double> scores = {}, double fallback = 0.9)
      : scores_(std::move(scores)), fallback_(fallback) {}

  double entailment_score(const std::string& claim_text, const craft::backends::EvidenceRef&) override {
    ++calls;
    const auto it = scores_.find(claim_text);
    return it == scores_.end() ? fallback_ : it->second;
  }

  std::map<std::string, double> scores_;
  double fallback_;
  std::atomic<int> calls{0};
};

/// NLI with per-ordered-pair contradiction probability; everything else is neutral.
class ScriptedNli : public craft::backends::NliBackend {
 public:
  craft::backends::NliProbs nli_probs(const std::string& premise, const std::string& hypothesis) override {
    ++calls;
    const auto it = contra.find({premise, hypothesis});
    const double c = it == contra.end() ? 0.1 : it->second;
    const double e = (1.0 - c) / 2.0;
    return {e, 1.0 - c - e, c};
  }

  std::map<std::pair<std::string, std::string>, double> contra;
  std::atomic<int> calls{0};
};

class LambdaChat : public craft::backends::ChatBackend {
 public:
  using Fn = std::function<std::string(const craft::backends::PromptDocument&, craft::backends::ChatRole)>;
  explicit LambdaChat(Fn fn) : fn_(std::move(fn)) {}

  std::string chat_complete(const craft::backends::PromptDocument& p, craft::backends::ChatRole role) override {
    std::lock_guard lock(mu_);
    ++calls;
    prompts.push_back(p);
    return fn_(p, role);
  }

  int calls = 0;
  std::vector<craft::backends::PromptDocument> prompts;

 private:
  Fn fn_;
  std::mutex mu_;
};

// ---------------------------------------------------------------------------
// LCS oracle: the longest subsequence of the shorter sequence that is also a
// subsequence of the longer one, found by enumerating index subsets.

inline bool is_subsequence(const std::vector<int>& needle, const std::vector<int>& hay) {
  std::size_t j = 0;
  for (int x : hay) {
    if (j < needle.size() && needle[j] == x) ++j;
  }
  return j == needle.size();
}

/// Subset masks of an n-element sequence grouped by popcount, largest first.
inline const std::vector<std::vector<unsigned>>& masks_by_size(std::size_t n) {
  static std::map<std::size_t, std::vector<std::vector<unsigned>>> cache;
  auto& v = cache[n];
  if (v.empty()) {
    v.resize(n + 1);
    for (unsigned m = 0; m < (1u << n); ++m) v[static_cast<std::size_t>(__builtin_popcount(m))].push_back(m);
    std::reverse(v.begin(), v.end());
  }
  return v;
}

inline std::size_t brute_force_lcs(const std::vector<int>& a, const std::vector<int>& b) {
  const auto& shorter = a.size() <= b.size() ? a : b;
  const auto& longer = a.size() <= b.size() ? b : a;
  const std::size_t n = shorter.size();
  std::vector<int> sub;
  for (const auto& group : masks_by_size(n)) {
    for (unsigned m : group) {
      sub.clear();
      for (std::size_t i = 0; i < n; ++i) {
        if (m & (1u << i)) sub.push_back(shorter[i]);
      }
      if (is_subsequence(sub, longer)) return sub.size();
    }
  }
  return 0;
}

/// The `index`-th sequence of length `len` over {0,1,2}.
inline std::vector<int> ternary(std::size_t index, std::size_t len) {
  std::vector<int> out(len);
  for (std::size_t i = 0; i < len; ++i) {
    out[i] = static_cast<int>(index % 3);
    index /= 3;
  }
  return out;
}

inline std::size_t pow3(std::size_t n) {
  std::size_t r = 1;
  while (n--) r *= 3;
  return r;
}

// ---------------------------------------------------------------------------
// Keyframe selection oracle: a direct, allocation-heavy transcription of the
// documented bisection rule, written independently of the library code.

inline std::vector<std::size_t> reference_keyframes(const std::vector<double>& t, const std::vector<double>& s,
                                                    std::size_t budget) {
  if (t.empty() || budget == 0) return {};
  const double gmin = *std::min_element(s.begin(), s.end());
  std::function<std::vector<std::size_t>(std::vector<std::size_t>, std::size_t)> rec =
      [&](std::vector<std::size_t> idx, std::size_t b) -> std::vector<std::size_t> {
    if (b == 0 || idx.empty()) return {};
    if (idx.size() <= b) return idx;
    if (b == 1) {
      std::size_t best = idx[0];
      for (auto i : idx) {
        if (s[i] > s[best]) best = i;
      }
      return {best};
    }
    const double mid = (t[idx.front()] + t[idx.back()]) / 2.0;
    std::vector<std::size_t> left, right;
    for (auto i : idx) (t[i] < mid ? left : right).push_back(i);
    const std::size_t top = (b + 1) / 2;
    auto weight = [&](const std::vector<std::size_t>& half) {
      std::vector<double> v;
      for (auto i : half) v.push_back(s[i] - gmin);
      std::sort(v.rbegin(), v.rend());
      double w = 0;
      for (std::size_t k = 0; k < std::min(top, v.size()); ++k) w += v[k];
      return w;
    };
    const double wl = weight(left), wr = weight(right);
    long bl;
    if (wl + wr <= 0.0) {
      bl = static_cast<long>((b + 1) / 2);
    } else {
      bl = std::lround(static_cast<double>(b) * wl / (wl + wr));
      bl = std::clamp(bl, 1L, static_cast<long>(b) - 1);
    }
    bl = std::min<long>(bl, static_cast<long>(left.size()));
    long br = static_cast<long>(b) - bl;
    if (br > static_cast<long>(right.size())) {
      br = static_cast<long>(right.size());
      bl = static_cast<long>(b) - br;
    }
    auto out = rec(left, static_cast<std::size_t>(bl));
    auto r = rec(right, static_cast<std::size_t>(br));
    out.insert(out.end(), r.begin(), r.end());
    return out;
  };
  std::vector<std::size_t> all(t.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return rec(all, budget);
}

/// Random strictly increasing timestamps with scores; `concentrated` puts all
/// high scores in the first tenth of the timeline.
inline std::vector<craft::FrameScore> random_frames(std::mt19937_64& rng, std::size_t n, bool concentrated) {
  std::uniform_real_distribution<double> gap(0.1, 3.0), score(-0.2, 1.0);
  std::vector<craft::FrameScore> out;
  double t = std::uniform_real_distribution<double>(0.0, 5.0)(rng);
  for (std::size_t i = 0; i < n; ++i) {
    double sc = score(rng);
    if (concentrated) sc = i < std::max<std::size_t>(1, n / 10) ? 0.9 + 0.1 * sc : -0.2;
    out.push_back({i, t, sc, "f" + std::to_string(i)});
    t += gap(rng);
  }
  return out;
}

}  // namespace testing
