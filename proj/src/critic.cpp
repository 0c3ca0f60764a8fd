#include "craft/critic.hpp"

#include <algorithm>
#include <cmath>

#include <spdlog/spdlog.h>

#include "craft/error.hpp"
#include "craft/prompt_format.hpp"
#include "craft/text.hpp"

namespace craft {

const char* to_string(SupportBand band) {
  switch (band) {
    case SupportBand::kUnsupported: return "unsupported";
    case SupportBand::kWeak: return "weak";
    case SupportBand::kSupported: return "supported";
  }
  return "supported";
}

SupportBand triage(double score, const CriticThresholds& th) {
  if (!std::isfinite(score) || score < 0.0 || score > 1.0) {
    throw BackendError(ErrorKind::kBackendContract, "entailment",
                                 "support score out of [0,1]: " + std::to_string(score));
  }
  if (score < th.unsupported) return SupportBand::kUnsupported;
  if (score < th.weak) return SupportBand::kWeak;
  return SupportBand::kSupported;
}

ScreenResult screen_contradictions(const std::vector<AtomicClaim>& claims, backends::NliBackend& nli, double threshold) {
  ScreenResult out;
  for (std::size_t i = 0; i < claims.size(); ++i) {
    for (std::size_t j = i + 1; j < claims.size(); ++j) {
      const auto forward = nli.nli_probs(claims[i].text, claims[j].text);
      backends::check_distribution("nli", forward);
      const auto backward = nli.nli_probs(claims[j].text, claims[i].text);
      backends::check_distribution("nli", backward);
      ++out.pairs_evaluated;
      const double p = std::max(forward.contradiction, backward.contradiction);
      if (p > threshold) {
        const bool ordered = claims[i].claim_id < claims[j].claim_id;
        out.candidates.push_back({ordered ? claims[i].claim_id : claims[j].claim_id,
                                  ordered ? claims[j].claim_id : claims[i].claim_id, p});
      }
    }
  }
  return out;
}

backends::PromptDocument build_adjudication_prompt(const AtomicClaim& a, const AtomicClaim& b, double p_contradiction) {
  std::string u;
  u += std::string(prompt::kClaimA) + "\n" + a.text + "\n\n";
  u += std::string(prompt::kClaimB) + "\n" + b.text + "\n\n";
  u += std::string(prompt::kContradictionProbability) + "\n" + format_fixed(p_contradiction, 3) + "\n\n";
  u += std::string(prompt::kOutputFormat) +
       "\nAn NLI screen flagged these two claims from the same video as possibly contradictory. Decide whether they "
       "are genuinely inconsistent or only mention related but compatible facts. Reply with exactly one line:\n"
       "INCONSISTENT: <explanation> HINT: <how to repair the claims>\n"
       "or\n"
       "CONSISTENT: <explanation>\n";
  return {"You check pairs of video claims for genuine contradictions. [" + std::string(prompt::kPromptVersion) + "]",
          u};
}

AdjudicationResult parse_adjudication(const std::string& reply, const ContradictionCandidate& pair,
                                      std::vector<std::string>& warnings) {
  AdjudicationResult r;
  r.pair = pair;
  const std::string text = trim(reply);
  auto after_colon = [](const std::string& s, std::size_t from) {
    const auto c = s.find(':', from);
    return c == std::string::npos ? std::string() : trim(s.substr(c + 1));
  };
  if (starts_with(text, "INCONSISTENT")) {
    r.inconsistent = true;
    std::string body = after_colon(text, 0);
    const auto hint = body.find("HINT:");
    if (hint != std::string::npos) {
      r.repair_hint = trim(body.substr(hint + 5));
      body = trim(body.substr(0, hint));
    }
    r.explanation = body;
    if (r.repair_hint.empty()) {
      r.repair_hint = "Revise or remove one of the two claims so that they agree.";
      warnings.push_back("adjudicator gave no repair hint for " + pair.claim_id_a + " / " + pair.claim_id_b);
    }
  } else if (starts_with(text, "CONSISTENT")) {
    r.explanation = after_colon(text, 0);
  } else {
    warnings.push_back("malformed adjudicator verdict for " + pair.claim_id_a + " / " + pair.claim_id_b +
                       "; treating as consistent");
  }
  return r;
}

std::optional<AdjudicationResult> adjudicate(const ContradictionCandidate& pair, const AtomicClaim& a,
                                             const AtomicClaim& b, backends::ChatBackend& adjudicator,
                                             std::vector<std::string>& warnings) {
  std::string reply;
  try {
    reply = adjudicator.chat_complete(build_adjudication_prompt(a, b, pair.p_contradiction),
                                      backends::ChatRole::kAdjudicate);
  } catch (const Error& e) {
    warnings.push_back("adjudicator failed for " + pair.claim_id_a + " / " + pair.claim_id_b + ": " + e.what());
    return std::nullopt;
  }
  return parse_adjudication(reply, pair, warnings);
}

nlohmann::ordered_json to_json(const CriticReport& report) {
  nlohmann::ordered_json j;
  j["round"] = report.round;
  auto verdicts = nlohmann::ordered_json::array();
  for (const auto& v : report.verdicts) {
    nlohmann::ordered_json vj;
    vj["claim_id"] = v.claim_id;
    vj["score"] = v.score;
    vj["band"] = to_string(v.band);
    verdicts.push_back(std::move(vj));
  }
  j["verdicts"] = std::move(verdicts);
  j["pairs_screened"] = report.pairs_screened;
  auto candidates = nlohmann::ordered_json::array();
  for (const auto& c : report.candidates) {
    nlohmann::ordered_json cj;
    cj["claim_id_a"] = c.claim_id_a;
    cj["claim_id_b"] = c.claim_id_b;
    cj["p_contradiction"] = c.p_contradiction;
    candidates.push_back(std::move(cj));
  }
  j["candidates"] = std::move(candidates);
  auto confirmed = nlohmann::ordered_json::array();
  for (const auto& a : report.confirmed_contradictions) {
    nlohmann::ordered_json aj;
    aj["claim_id_a"] = a.pair.claim_id_a;
    aj["claim_id_b"] = a.pair.claim_id_b;
    aj["p_contradiction"] = a.pair.p_contradiction;
    aj["inconsistent"] = a.inconsistent;
    aj["explanation"] = a.explanation;
    aj["repair_hint"] = a.repair_hint;
    confirmed.push_back(std::move(aj));
  }
  j["confirmed_contradictions"] = std::move(confirmed);
  j["dropped_claim_ids"] = report.dropped_claim_ids;
  j["feedback_text"] = report.feedback_text;
  j["warnings"] = report.warnings;
  return j;
}

std::string canonical_key(const AtomicClaim& c) {
  const auto rounded = [](double s) { return format_fixed(std::round(s * 10.0) / 10.0, 1); };
  return normalize_text(c.text) + "|" + rounded(c.span.start_s) + "-" + rounded(c.span.end_s) + "|" +
         to_string(c.modality);
}

std::set<std::string> canonical_set(const std::vector<AtomicClaim>& claims) {
  std::set<std::string> out;
  for (const auto& c : claims) out.insert(canonical_key(c));
  return out;
}

namespace {

const AtomicClaim* find_claim(const std::vector<AtomicClaim>& claims, const std::string& id) {
  for (const auto& c : claims) {
    if (c.claim_id == id) return &c;
  }
  return nullptr;
}

}  // namespace

RefineResult refine_loop(std::vector<AtomicClaim> initial, const RefineBackends& b, const CriticThresholds& th,
                         std::vector<RejectedLine> initial_rejected) {
  if (b.entailment == nullptr || b.nli == nullptr || b.adjudicator == nullptr || !b.evidence) {
    throw_error(ErrorKind::kInvalidInput, "refine_loop needs entailment, NLI, adjudicator and evidence backends");
  }
  RefineResult result;
  std::vector<AtomicClaim> current = std::move(initial);
  std::vector<RejectedLine> pending_rejected = std::move(initial_rejected);
  const int max_rounds = std::max(th.max_rounds, 1);

  for (int round = 1; round <= max_rounds; ++round) {
    CriticReport report;
    report.round = round;
    result.rounds = round;

    std::vector<AtomicClaim> kept;
    std::vector<AtomicClaim> dropped;
    std::vector<const AtomicClaim*> weak;
    for (auto& claim : current) {
      const double score = b.entailment->entailment_score(claim.text, b.evidence(claim));
      const SupportBand band = triage(score, th);
      claim.support_score = score;
      report.verdicts.push_back({claim.claim_id, score, band});
      if (band == SupportBand::kUnsupported) {
        report.dropped_claim_ids.push_back(claim.claim_id);
        dropped.push_back(claim);
      } else {
        kept.push_back(claim);
      }
    }
    for (const auto& c : kept) {
      if (triage(*c.support_score, th) == SupportBand::kWeak) weak.push_back(&c);
    }

    const auto screen = screen_contradictions(kept, *b.nli, th.contradiction);
    report.pairs_screened = screen.pairs_evaluated;
    report.candidates = screen.candidates;
    for (const auto& pair : screen.candidates) {
      const auto* a = find_claim(kept, pair.claim_id_a);
      const auto* bb = find_claim(kept, pair.claim_id_b);
      if (a == nullptr || bb == nullptr) continue;
      if (auto verdict = adjudicate(pair, *a, *bb, *b.adjudicator, report.warnings); verdict && verdict->inconsistent) {
        report.confirmed_contradictions.push_back(std::move(*verdict));
      }
    }

    std::string feedback;
    for (const auto& c : dropped) feedback += std::string(prompt::kRemove) + serialize_claim(c) + "\n";
    for (const auto* c : weak) {
      feedback += std::string(prompt::kWeak) + "(score " + format_fixed(*c->support_score, 3) + "): " +
                  serialize_claim(*c) + "\n";
    }
    for (const auto& adj : report.confirmed_contradictions) {
      feedback += std::string(prompt::kContradiction) + serialize_claim(*find_claim(kept, adj.pair.claim_id_a)) +
                  std::string(prompt::kPairSeparator) + serialize_claim(*find_claim(kept, adj.pair.claim_id_b)) +
                  std::string(prompt::kHintMarker) + adj.repair_hint + "\n";
    }
    for (const auto& r : pending_rejected) {
      feedback += std::string(prompt::kRejected) + "(" + to_string(r.reason) + "): " + r.line + "\n";
    }
    report.feedback_text = feedback;

    const bool needs_repair = !weak.empty() || !report.confirmed_contradictions.empty();
    result.warnings.insert(result.warnings.end(), report.warnings.begin(), report.warnings.end());
    if (b.on_report) b.on_report(report);
    result.reports.push_back(std::move(report));
    current = std::move(kept);

    if (!needs_repair || round == max_rounds) break;
    if (!b.reextract) break;

    ParseResult next;
    try {
      next = b.reextract(Refinement{current, feedback, round});
    } catch (const Error& e) {
      result.error = e.what();
      spdlog::warn("[critic] re-extraction failed after round {}: {}", round, e.what());
      break;
    }
    result.warnings.insert(result.warnings.end(), next.warnings.begin(), next.warnings.end());
    pending_rejected = std::move(next.rejected);
    if (canonical_set(next.claims) == canonical_set(current)) break;
    current = std::move(next.claims);
  }

  result.claims = std::move(current);
  return result;
}

}  // namespace craft
