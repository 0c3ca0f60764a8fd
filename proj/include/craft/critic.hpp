#pragma once

#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "craft/backends/backend.hpp"
#include "craft/extraction.hpp"

namespace craft {

enum class SupportBand { kUnsupported, kWeak, kSupported };

const char* to_string(SupportBand band);

struct CriticThresholds {
  double unsupported = 0.05;
  double weak = 0.5;
  double contradiction = 0.5;
  int max_rounds = 4;
};

/// [0, unsupported) -> unsupported, [unsupported, weak) -> weak,
/// [weak, 1] -> supported. Scores outside [0,1] are a backend-contract error.
SupportBand triage(double score, const CriticThresholds& th = {});

struct SupportVerdict {
  std::string claim_id;
  double score = 0.0;
  SupportBand band = SupportBand::kSupported;
};

/// Unordered pair, canonicalized so claim_id_a < claim_id_b.
struct ContradictionCandidate {
  std::string claim_id_a;
  std::string claim_id_b;
  double p_contradiction = 0.0;
};

struct ScreenResult {
  std::vector<ContradictionCandidate> candidates;
  std::size_t pairs_evaluated = 0;
};

/// Every unordered pair is scored in both directions and symmetrized by the
/// larger contradiction probability; pairs strictly above `threshold` are kept.
ScreenResult screen_contradictions(const std::vector<AtomicClaim>& claims, backends::NliBackend& nli,
                                   double threshold = 0.5);

struct AdjudicationResult {
  ContradictionCandidate pair;
  bool inconsistent = false;
  std::string explanation;
  /// Non-empty iff inconsistent.
  std::string repair_hint;
};

backends::PromptDocument build_adjudication_prompt(const AtomicClaim& a, const AtomicClaim& b, double p_contradiction);

/// Reads "INCONSISTENT: <why> HINT: <hint>" or "CONSISTENT: <why>". Anything
/// else counts as consistent and adds a warning.
AdjudicationResult parse_adjudication(const std::string& reply, const ContradictionCandidate& pair,
                                      std::vector<std::string>& warnings);

/// One adjudicator call. A backend failure skips the pair (nullopt) and adds
/// a warning.
std::optional<AdjudicationResult> adjudicate(const ContradictionCandidate& pair, const AtomicClaim& a,
                                             const AtomicClaim& b, backends::ChatBackend& adjudicator,
                                             std::vector<std::string>& warnings);

struct CriticReport {
  int round = 1;
  std::vector<SupportVerdict> verdicts;
  std::size_t pairs_screened = 0;
  std::vector<ContradictionCandidate> candidates;
  std::vector<AdjudicationResult> confirmed_contradictions;
  std::vector<std::string> dropped_claim_ids;
  std::string feedback_text;
  std::vector<std::string> warnings;
};

nlohmann::ordered_json to_json(const CriticReport& report);

/// Identity used for the fixed-point test: normalized text, span rounded to
/// 0.1 s, and modality.
std::string canonical_key(const AtomicClaim& claim);
std::set<std::string> canonical_set(const std::vector<AtomicClaim>& claims);

struct RefineBackends {
  backends::EntailmentScorer* entailment = nullptr;
  backends::NliBackend* nli = nullptr;
  backends::ChatBackend* adjudicator = nullptr;
  /// Evidence the entailment scorer sees for a claim.
  std::function<backends::EvidenceRef(const AtomicClaim&)> evidence;
  /// Re-extraction with the previous claims and critic feedback.
  std::function<ParseResult(const Refinement&)> reextract;
  /// Called after every round, e.g. to persist the report.
  std::function<void(const CriticReport&)> on_report;
};

struct RefineResult {
  std::vector<AtomicClaim> claims;
  std::vector<CriticReport> reports;
  int rounds = 0;
  std::optional<std::string> error;
  std::vector<std::string> warnings;
};

/// Critic loop for one (query, video) claim set. Each round scores every
/// claim, drops the unsupported ones, screens and adjudicates contradictions,
/// and re-extracts with feedback when weak claims or confirmed contradictions
/// remain. It stops early at a fixed point (nothing to repair, or a
/// re-extraction with the same canonical set) and never exceeds max_rounds.
/// The returned claims carry their
/// latest support score and none is below the unsupported threshold.
RefineResult refine_loop(std::vector<AtomicClaim> initial, const RefineBackends& b, const CriticThresholds& th = {},
                         std::vector<RejectedLine> initial_rejected = {});

}  // namespace craft
