#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "craft/backends/backend.hpp"
#include "craft/consolidate.hpp"

namespace craft {

/// Decomposes text into subclaims and decides whether a document supports a
/// subclaim. This is a development proxy for a claim-level evaluator, not a
/// reimplementation of any official scorer.
class Judge {
 public:
  virtual ~Judge() = default;
  virtual std::vector<std::string> decompose(const std::string& text) = 0;
  virtual bool supports(const std::string& document, const std::string& subclaim) = 0;
};

/// Sentences of `text`, split after '.', '!' or '?' followed by whitespace or
/// the end. Decimal points do not split.
std::vector<std::string> split_sentences(const std::string& text);

/// Decomposition splits sentences unless a scripted decomposition exists for
/// the exact text. Support means the normalized subclaim equals the
/// normalized form of some sentence of the document.
class ExactMatchJudge : public Judge {
 public:
  void script_decomposition(const std::string& text, std::vector<std::string> subclaims);
  std::vector<std::string> decompose(const std::string& text) override;
  bool supports(const std::string& document, const std::string& subclaim) override;

 private:
  std::map<std::string, std::vector<std::string>> scripted_;
};

/// Support means some sentence of the document entails the subclaim with
/// probability at least `threshold` under the NLI backend.
class NliJudge : public Judge {
 public:
  NliJudge(backends::NliBackend& nli, double threshold = 0.5) : nli_(nli), threshold_(threshold) {}
  std::vector<std::string> decompose(const std::string& text) override;
  bool supports(const std::string& document, const std::string& subclaim) override;

 private:
  backends::NliBackend& nli_;
  double threshold_;
};

struct GoldSubclaim {
  std::string text;
  std::set<std::string> videos;
};

struct ReferenceEntry {
  std::string query_id;
  std::string reference_text;
  std::vector<GoldSubclaim> subclaims;

  std::set<std::string> gold_videos() const;
};

/// JSONL rows `{"query_id", "reference_text", "subclaims": [{"text", "videos"}]}`.
std::vector<ReferenceEntry> read_references(const std::filesystem::path& path);

struct PredictedSubclaim {
  std::string text;
  std::set<std::string> cited_videos;
};

struct SubclaimJudgment {
  std::string predicted_subclaim;
  std::optional<std::string> matched_reference_subclaim;
  bool supported_by_reference = false;
  std::set<std::string> cited_videos;
  /// Gold videos whose evidence supports this prediction.
  std::set<std::string> gold_videos;
};

struct CoverageJudgment {
  std::string reference_subclaim;
  bool covered = false;
  /// Citations of the first prediction that covers it.
  std::set<std::string> cited_videos;
  std::set<std::string> gold_videos;
};

struct MirageScores {
  double ref_p = 0, ref_r = 0, ref_f1 = 0;
  double cite_p = 0, cite_r = 0, cite_f1 = 0;
  double avg = 0;
};

/// Throws kEvaluation if the judge fails.
std::vector<std::string> decompose_subclaims(const std::string& text, Judge& judge);

/// ref_p: share of predictions supported by the reference subclaims taken
/// together. ref_r: share of reference subclaims covered by the predictions.
std::pair<double, double> reference_pr(const std::vector<std::string>& preds, const std::vector<std::string>& refs,
                                       Judge& judge);

/// cite_p: share of predictions citing at least one video that supports them.
/// cite_r: share of covered reference subclaims whose covering prediction
/// cites at least one of their gold videos.
std::pair<double, double> citation_pr(const std::vector<SubclaimJudgment>& preds,
                                      const std::vector<CoverageJudgment>& refs);

double f1(double p, double r);
double macro_average(const std::vector<double>& metrics);

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// LCS F-measure (beta = 1) over tokenize() tokens, no stemming. An empty
/// reference scores 0 and adds a warning.
double rouge_l(const std::string& pred_text, const std::string& ref_text, std::vector<std::string>* warnings = nullptr);

struct QueryEvaluation {
  std::string query_id;
  MirageScores scores;
  double rouge_l = 0;
  std::vector<SubclaimJudgment> predictions;
  std::vector<CoverageJudgment> coverage;
};

QueryEvaluation evaluate_query(const Report& report, const ReferenceEntry& reference, Judge& judge,
                               std::vector<std::string>& warnings);

struct CorpusEvaluation {
  std::vector<QueryEvaluation> queries;
  /// Per-query values averaged; f1 is the mean of per-query f1, not the f1
  /// of the averaged p and r.
  MirageScores aggregate;
  double rouge_l = 0;
  std::vector<std::string> excluded_queries;
  std::vector<std::string> warnings;
};

/// Queries whose reference has no gold video are excluded. A reference with
/// no matching report is scored against an empty report.
CorpusEvaluation evaluate_corpus(const std::vector<Report>& reports, const std::vector<ReferenceEntry>& references,
                                 Judge& judge);

/// Averages per-query scores into corpus scores.
MirageScores aggregate_scores(const std::vector<MirageScores>& per_query);

nlohmann::ordered_json to_json(const CorpusEvaluation& eval);
std::string format_table(const CorpusEvaluation& eval);

}  // namespace craft
