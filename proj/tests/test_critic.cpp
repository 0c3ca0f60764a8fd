#include <doctest.h>

#include <random>

#include "craft/critic.hpp"
#include "craft/error.hpp"
#include "craft/prompt_format.hpp"
#include "support.hpp"

using namespace craft;
using testing::make_claim;

namespace {

backends::EvidenceRef no_evidence(const AtomicClaim&) { return {}; }

std::string always_inconsistent(const backends::PromptDocument&, backends::ChatRole) {
  return "INCONSISTENT: opposite states. HINT: keep the first claim.";
}

}  // namespace

TEST_CASE("triage bands at the default thresholds") {
  CHECK(triage(0.04) == SupportBand::kUnsupported);
  CHECK(triage(0.05) == SupportBand::kWeak);
  CHECK(triage(0.4999) == SupportBand::kWeak);
  CHECK(triage(0.5) == SupportBand::kSupported);
  CHECK(triage(0.0) == SupportBand::kUnsupported);
  CHECK(triage(1.0) == SupportBand::kSupported);
  try {
    triage(1.2);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kBackendContract);
  }
  CHECK_THROWS_AS(triage(-0.1), Error);
}

TEST_CASE("screen keeps exactly the pair above the threshold") {
  std::vector<AtomicClaim> claims{make_claim("c0", "A."), make_claim("c1", "B."), make_claim("c2", "C.")};
  testing::ScriptedNli nli;
  nli.contra[{"C.", "A."}] = 0.51;
  nli.contra[{"A.", "B."}] = 0.5;
  const auto r = screen_contradictions(claims, nli);
  REQUIRE(r.candidates.size() == 1);
  CHECK(r.candidates[0].claim_id_a == "c0");
  CHECK(r.candidates[0].claim_id_b == "c2");
  CHECK(r.candidates[0].p_contradiction == doctest::Approx(0.51));
}

TEST_CASE("screen evaluates every unordered pair") {
  std::vector<AtomicClaim> claims;
  for (int i = 0; i < 5; ++i) claims.push_back(make_claim("c" + std::to_string(i), "Claim " + std::to_string(i) + "."));
  testing::ScriptedNli nli;
  const auto r = screen_contradictions(claims, nli);
  CHECK(r.pairs_evaluated == 10);
  CHECK(nli.calls == 20);  // both directions per pair
  CHECK(screen_contradictions({claims[0]}, nli).pairs_evaluated == 0);
}

TEST_CASE("screen rejects non-distributions") {
  struct Bad : backends::NliBackend {
    backends::NliProbs nli_probs(const std::string&, const std::string&) override { return {0.5, 0.5, 0.5}; }
  } bad;
  try {
    screen_contradictions({make_claim("a", "A."), make_claim("b", "B.")}, bad);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kBackendContract);
  }
}

TEST_CASE("adjudication verdicts") {
  std::vector<std::string> w;
  const ContradictionCandidate pair{"a", "b", 0.9};
  const auto inc = parse_adjudication("INCONSISTENT: opposite states. HINT: drop b.", pair, w);
  CHECK(inc.inconsistent);
  CHECK(inc.explanation == "opposite states.");
  CHECK(inc.repair_hint == "drop b.");
  const auto con = parse_adjudication("CONSISTENT: compatible facts", pair, w);
  CHECK_FALSE(con.inconsistent);
  CHECK(con.repair_hint.empty());
  CHECK(w.empty());
  const auto bad = parse_adjudication("maybe?", pair, w);
  CHECK_FALSE(bad.inconsistent);
  CHECK(w.size() == 1);
  const auto no_hint = parse_adjudication("INCONSISTENT: clash", pair, w);
  CHECK_FALSE(no_hint.repair_hint.empty());
}

TEST_CASE("adjudicator failure skips the pair") {
  testing::LambdaChat chat([](const auto&, auto) -> std::string { throw BackendError(ErrorKind::kBackend, "adjudicator", "down"); });
  std::vector<std::string> w;
  CHECK_FALSE(adjudicate({"a", "b", 0.9}, make_claim("a", "A."), make_claim("b", "B."), chat, w));
  CHECK(w.size() == 1);
}

TEST_CASE("adjudication prompt carries both claims and the probability") {
  const auto p = build_adjudication_prompt(make_claim("a", "Bridge open."), make_claim("b", "Bridge closed."), 0.9);
  CHECK(prompt::section(p.user, prompt::kClaimA)->front() == "Bridge open.");
  CHECK(prompt::section(p.user, prompt::kClaimB)->front() == "Bridge closed.");
  CHECK(prompt::section(p.user, prompt::kContradictionProbability)->front() == "0.900");
}

TEST_CASE("canonical keys ignore cosmetic differences") {
  auto a = make_claim("x", "The Bridge is closed.", 1.04, 2.0);
  auto b = make_claim("y", "the bridge is closed", 1.0, 2.01);
  CHECK(canonical_key(a) == canonical_key(b));
  b.modality = Modality::kSpeech;
  CHECK(canonical_key(a) != canonical_key(b));
}

TEST_CASE("scenario a: all supported and consistent stops after round one") {
  const std::vector<AtomicClaim> c0{make_claim("c0", "A."), make_claim("c1", "B.")};
  testing::ScriptedScorer scorer({}, 0.9);
  testing::ScriptedNli nli;
  testing::LambdaChat adj(always_inconsistent);
  int reextracts = 0;
  RefineBackends b{&scorer, &nli, &adj, no_evidence, [&](const Refinement&) {
                     ++reextracts;
                     return ParseResult{};
                   },
                   nullptr};
  const auto r = refine_loop(c0, b);
  CHECK(r.rounds == 1);
  CHECK(reextracts == 0);
  CHECK(canonical_set(r.claims) == canonical_set(c0));
  for (const auto& c : r.claims) CHECK(c.support_score == std::optional<double>(0.9));
  CHECK(adj.calls == 0);
}

TEST_CASE("scenario b: an unsupported claim is removed") {
  const std::vector<AtomicClaim> c0{make_claim("c0", "Real."), make_claim("c1", "Invented.")};
  testing::ScriptedScorer scorer({{"Invented.", 0.01}}, 0.9);
  testing::ScriptedNli nli;
  testing::LambdaChat adj(always_inconsistent);
  std::vector<CriticReport> seen;
  RefineBackends b{&scorer, &nli, &adj, no_evidence, nullptr, [&](const CriticReport& r) { seen.push_back(r); }};
  const auto r = refine_loop(c0, b);
  REQUIRE(r.claims.size() == 1);
  CHECK(r.claims[0].claim_id == "c0");
  REQUIRE(seen.size() == 1);
  CHECK(seen[0].dropped_claim_ids == std::vector<std::string>{"c1"});
  CHECK(seen[0].feedback_text.find(prompt::kRemove) == 0);
}

TEST_CASE("scenario c: contradiction repair converges in two rounds") {
  const std::vector<AtomicClaim> c0{make_claim("c0", "The bridge is open.", 1, 2), make_claim("c1", "The bridge is closed.", 3, 4)};
  testing::ScriptedScorer scorer({}, 0.9);
  testing::ScriptedNli nli;
  nli.contra[{"The bridge is open.", "The bridge is closed."}] = 0.9;
  testing::LambdaChat adj(always_inconsistent);
  std::vector<Refinement> asked;
  RefineBackends b{&scorer, &nli, &adj, no_evidence, [&](const Refinement& ref) {
                     asked.push_back(ref);
                     ParseResult p;
                     p.claims = {make_claim("r2", "The bridge is open.", 1, 2)};
                     return p;
                   },
                   nullptr};
  const auto r = refine_loop(c0, b);
  CHECK(r.rounds == 2);
  REQUIRE(asked.size() == 1);
  CHECK(asked[0].feedback.find(std::string(prompt::kContradiction)) != std::string::npos);
  CHECK(asked[0].feedback.find("keep the first claim.") != std::string::npos);
  REQUIRE(r.claims.size() == 1);
  CHECK(r.claims[0].text == "The bridge is open.");
  CHECK(r.reports[0].confirmed_contradictions.size() == 1);
  CHECK(r.reports[1].confirmed_contradictions.empty());

  // Idempotence at the fixed point.
  const auto again = refine_loop(r.claims, b);
  CHECK(again.rounds == 1);
  CHECK(canonical_set(again.claims) == canonical_set(r.claims));
}

TEST_CASE("re-extraction returning the same canonical set stops the loop") {
  const std::vector<AtomicClaim> c0{make_claim("c0", "Maybe true.")};
  testing::ScriptedScorer scorer({}, 0.2);
  testing::ScriptedNli nli;
  testing::LambdaChat adj(always_inconsistent);
  int calls = 0;
  RefineBackends b{&scorer, &nli, &adj, no_evidence, [&](const Refinement& ref) {
                     ++calls;
                     ParseResult p;
                     p.claims = ref.previous;
                     return p;
                   },
                   nullptr};
  const auto r = refine_loop(c0, b);
  CHECK(r.rounds == 1);
  CHECK(calls == 1);
  CHECK(r.claims.size() == 1);  // weak claims are kept
}

TEST_CASE("scenario d: a never-converging extractor is capped at four rounds") {
  testing::ScriptedScorer scorer({}, 0.2);
  testing::ScriptedNli nli;
  testing::LambdaChat adj(always_inconsistent);
  int calls = 0;
  RefineBackends b{&scorer, &nli, &adj, no_evidence, [&](const Refinement&) {
                     ++calls;
                     ParseResult p;
                     p.claims = {make_claim("n" + std::to_string(calls), "New wording " + std::to_string(calls) + ".")};
                     return p;
                   },
                   nullptr};
  const auto r = refine_loop({make_claim("c0", "Start.")}, b);
  CHECK(r.rounds == 4);
  CHECK(calls == 3);
  CHECK(r.reports.size() == 4);
  CHECK(r.reports.back().round == 4);

  CriticThresholds two;
  two.max_rounds = 2;
  calls = 0;
  CHECK(refine_loop({make_claim("c0", "Start.")}, b, two).rounds == 2);
}

TEST_CASE("extraction failure mid-loop keeps the last completed round") {
  testing::ScriptedScorer scorer({{"Bad.", 0.0}}, 0.2);
  testing::ScriptedNli nli;
  testing::LambdaChat adj(always_inconsistent);
  RefineBackends b{&scorer, &nli, &adj, no_evidence, [&](const Refinement&) -> ParseResult {
                     throw Error(ErrorKind::kExtraction, "extractor down");
                   },
                   nullptr};
  const auto r = refine_loop({make_claim("c0", "Weak."), make_claim("c1", "Bad.")}, b);
  REQUIRE(r.error);
  CHECK(r.error->find("extractor down") != std::string::npos);
  REQUIRE(r.claims.size() == 1);
  CHECK(r.claims[0].claim_id == "c0");
}

TEST_CASE("randomized scorers never leave an unsupported claim") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int it = 0; it < 200; ++it) {
    std::map<std::string, double> scores;
    std::vector<AtomicClaim> c0;
    for (int i = 0; i < 6; ++i) {
      const std::string text = "Claim " + std::to_string(it) + "-" + std::to_string(i) + ".";
      scores[text] = u(rng) < 0.3 ? u(rng) * 0.05 : u(rng);
      c0.push_back(make_claim("c" + std::to_string(i), text, i, i + 1));
    }
    testing::ScriptedScorer scorer(scores, 0.5);
    testing::ScriptedNli nli;
    testing::LambdaChat adj(always_inconsistent);
    RefineBackends b{&scorer, &nli, &adj, no_evidence, [&](const Refinement& ref) {
                       // Reintroduce everything, including previously dropped claims.
                       ParseResult p;
                       p.claims = c0;
                       (void)ref;
                       return p;
                     },
                     nullptr};
    const auto r = refine_loop(c0, b);
    REQUIRE(r.rounds <= 4);
    for (const auto& c : r.claims) {
      REQUIRE(c.support_score);
      REQUIRE(*c.support_score >= 0.05);
    }
    for (const auto& rep : r.reports) {
      for (const auto& id : rep.dropped_claim_ids) {
        const auto v = std::find_if(rep.verdicts.begin(), rep.verdicts.end(), [&](const auto& x) { return x.claim_id == id; });
        REQUIRE(v->band == SupportBand::kUnsupported);
      }
    }
  }
}

TEST_CASE("critic report JSON is complete") {
  CriticReport rep;
  rep.round = 2;
  rep.verdicts = {{"a", 0.3, SupportBand::kWeak}};
  rep.confirmed_contradictions = {{{"a", "b", 0.9}, true, "why", "hint"}};
  const auto j = to_json(rep);
  CHECK(j["round"] == 2);
  CHECK(j["verdicts"][0]["band"] == "weak");
  CHECK(j["confirmed_contradictions"][0]["repair_hint"] == "hint");
}
