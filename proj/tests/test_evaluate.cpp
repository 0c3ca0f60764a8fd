#include <doctest.h>

#include "craft/backends/mock.hpp"
#include "craft/error.hpp"
#include "craft/evaluate.hpp"
#include "craft/text.hpp"
#include "support.hpp"

using namespace craft;

namespace {

CoverageJudgment cov(bool covered, std::set<std::string> cited, std::set<std::string> gold) {
  return {"ref", covered, std::move(cited), std::move(gold)};
}

SubclaimJudgment pred(std::set<std::string> cited, std::set<std::string> gold) {
  SubclaimJudgment j;
  j.predicted_subclaim = "p";
  j.cited_videos = std::move(cited);
  j.gold_videos = std::move(gold);
  return j;
}

std::vector<std::string> as_tokens(const std::vector<int>& seq) {
  std::vector<std::string> out;
  for (int x : seq) out.push_back(std::string(1, static_cast<char>('a' + x)));
  return out;
}

std::string as_text(const std::vector<int>& seq) {
  std::string out;
  for (int x : seq) {
    if (!out.empty()) out += ' ';
    out += static_cast<char>('a' + x);
  }
  return out;
}

}  // namespace

TEST_CASE("sentence splitting") {
  CHECK(split_sentences("One. Two! Three? Four") == std::vector<std::string>{"One.", "Two!", "Three?", "Four"});
  CHECK(split_sentences("Rose 3.5 m. Then fell.") == std::vector<std::string>{"Rose 3.5 m.", "Then fell."});
  CHECK(split_sentences("").empty());
}

TEST_CASE("decomposition") {
  ExactMatchJudge judge;
  CHECK(decompose_subclaims("The water rose.", judge) == std::vector<std::string>{"The water rose."});
  judge.script_decomposition("Boats and trucks arrived.", {"Boats arrived.", "Trucks arrived."});
  CHECK(decompose_subclaims("Boats and trucks arrived.", judge).size() == 2);
  CHECK(decompose_subclaims("", judge).empty());

  struct Broken : Judge {
    std::vector<std::string> decompose(const std::string&) override { throw std::runtime_error("judge down"); }
    bool supports(const std::string&, const std::string&) override { return false; }
  } broken;
  try {
    decompose_subclaims("x", broken);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kEvaluation);
  }
}

TEST_CASE("reference precision and recall by hand") {
  ExactMatchJudge judge;
  const std::vector<std::string> refs{"A one.", "B two.", "C three.", "D four."};
  CHECK(reference_pr(refs, refs, judge) == std::pair<double, double>{1.0, 1.0});
  CHECK(reference_pr({"X.", "Y."}, refs, judge) == std::pair<double, double>{0.0, 0.0});
  const auto [p, r] = reference_pr({"A one.", "b two", "Unrelated."}, refs, judge);
  CHECK(p == doctest::Approx(2.0 / 3.0));
  CHECK(r == doctest::Approx(0.5));
  CHECK(reference_pr({}, refs, judge).first == 0.0);
}

TEST_CASE("citation precision and recall by hand") {
  const auto [p1, r1] = citation_pr({pred({"v1"}, {"v1"}), pred({"v2"}, {"v2", "v3"})}, {});
  CHECK(p1 == 1.0);
  CHECK(r1 == 0.0);
  const auto [p2, r2] = citation_pr({pred({"v1"}, {"v2"}), pred({"v1"}, {"v1"})},
                                    {cov(true, {"v1"}, {"v1"}), cov(true, {"v2"}, {"v2", "v9"}), cov(true, {"v3"}, {"v3"}),
                                     cov(true, {"v4"}, {"v5"}), cov(false, {}, {"v1"})});
  CHECK(p2 == 0.5);
  CHECK(r2 == doctest::Approx(0.75));
}

TEST_CASE("harmonic mean") {
  CHECK(f1(1.0, 1.0) == 1.0);
  CHECK(f1(0.0, 0.8) == 0.0);
  CHECK(f1(0.0, 0.0) == 0.0);
  CHECK(f1(0.5, 1.0) == doctest::Approx(2.0 / 3.0));
  for (double p = 0.0; p <= 1.0; p += 0.125) {
    for (double r = 0.0; r <= 1.0; r += 0.125) {
      const double f = f1(p, r);
      CHECK(f <= std::max(p, r) + 1e-12);
      CHECK(f <= (p + r) / 2 + 1e-12);
      CHECK((f == 0.0) == (p * r == 0.0));
    }
  }
}

TEST_CASE("macro average of six metrics") {
  CHECK(macro_average({0.760, 0.810, 0.783, 0.935, 0.512, 0.635}) == doctest::Approx(0.739).epsilon(0.0005 / 0.739));
  CHECK(macro_average({0, 0, 0, 0, 0, 0}) == 0.0);
  CHECK(macro_average({0.3, 0.3, 0.3, 0.3, 0.3, 0.3}) == doctest::Approx(0.3));
}

TEST_CASE("corpus F1 is a mean of per-query F1, not F1 of the means") {
  // Harmonic mean of the aggregate Cite-P and Cite-R differs from the printed Cite-F1.
  CHECK(f1(0.935, 0.512) == doctest::Approx(0.662).epsilon(0.001));
  MirageScores q1, q2;
  q1.cite_p = 1.0;
  q1.cite_r = 1.0;
  q1.cite_f1 = f1(1.0, 1.0);
  q2.cite_p = 1.0;
  q2.cite_r = 0.0;
  q2.cite_f1 = f1(1.0, 0.0);
  const auto agg = aggregate_scores({q1, q2});
  CHECK(agg.cite_f1 == doctest::Approx(0.5));
  CHECK(f1(agg.cite_p, agg.cite_r) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("ROUGE-L by hand") {
  CHECK(rouge_l("a b c d", "a c d") == doctest::Approx(6.0 / 7.0));
  CHECK(rouge_l("x y z", "x y z") == 1.0);
  CHECK(rouge_l("a b", "c d") == 0.0);
  CHECK(rouge_l("", "a") == 0.0);
  std::vector<std::string> w;
  CHECK(rouge_l("a", "", &w) == 0.0);
  CHECK(w.size() == 1);
  // No stemming: "rose" and "rises" differ.
  CHECK(rouge_l("water rises", "water rose") == doctest::Approx(0.5));
}

TEST_CASE("LCS agrees with the subset-enumeration oracle on short ternary sequences") {
  for (std::size_t la = 0; la <= 5; ++la) {
    for (std::size_t lb = 0; lb <= 5; ++lb) {
      for (std::size_t ia = 0; ia < testing::pow3(la); ++ia) {
        const auto a = testing::ternary(ia, la);
        const auto ta = as_tokens(a);
        for (std::size_t ib = 0; ib < testing::pow3(lb); ++ib) {
          const auto b = testing::ternary(ib, lb);
          REQUIRE(lcs_length(ta, as_tokens(b)) == testing::brute_force_lcs(a, b));
        }
      }
    }
  }
}

TEST_CASE("ROUGE-L agrees with the oracle formula on a sample of sequences") {
  for (std::size_t la = 1; la <= 4; ++la) {
    for (std::size_t lb = 1; lb <= 4; ++lb) {
      for (std::size_t ia = 0; ia < testing::pow3(la); ++ia) {
        for (std::size_t ib = 0; ib < testing::pow3(lb); ++ib) {
          const auto a = testing::ternary(ia, la), b = testing::ternary(ib, lb);
          const double l = static_cast<double>(testing::brute_force_lcs(a, b));
          const double expected = l == 0 ? 0.0 : 2 * (l / la) * (l / lb) / (l / la + l / lb);
          REQUIRE(rouge_l(as_text(a), as_text(b)) == doctest::Approx(expected));
        }
      }
    }
  }
}

TEST_CASE("query evaluation with the exact-match judge") {
  ExactMatchJudge judge;
  const ReferenceEntry ref{"q",
                           "A one. B two. C three.",
                           {{"A one.", {"v1"}}, {"B two.", {"v2"}}, {"C three.", {"v1", "v2"}}}};
  const Report report{"q", {{"A one.", {"v1"}}, {"B two.", {"v1"}}, {"Made up.", {"v2"}}}};
  std::vector<std::string> w;
  const auto q = evaluate_query(report, ref, judge, w);
  CHECK(q.scores.ref_p == doctest::Approx(2.0 / 3.0));
  CHECK(q.scores.ref_r == doctest::Approx(2.0 / 3.0));
  // Only "A one." cites a video that supports it.
  CHECK(q.scores.cite_p == doctest::Approx(1.0 / 3.0));
  // Covered: A (cited v1, gold v1: ok) and B (cited v1, gold v2: miss).
  CHECK(q.scores.cite_r == doctest::Approx(0.5));
  CHECK(q.scores.avg == doctest::Approx(macro_average({q.scores.ref_p, q.scores.ref_r, q.scores.ref_f1, q.scores.cite_p,
                                                       q.scores.cite_r, q.scores.cite_f1})));
  CHECK(q.predictions[0].gold_videos == std::set<std::string>{"v1"});
}

TEST_CASE("corpus evaluation excludes queries without gold videos and scores missing reports as empty") {
  ExactMatchJudge judge;
  const std::vector<ReferenceEntry> refs{{"q1", "A one.", {{"A one.", {"v1"}}}},
                                         {"q2", "B two.", {{"B two.", {"v2"}}}},
                                         {"q3", "C.", {{"C.", {}}}}};
  const std::vector<Report> reports{{"q1", {{"A one.", {"v1"}}}}, {"q9", {{"Stray.", {"v1"}}}}};
  const auto eval = evaluate_corpus(reports, refs, judge);
  CHECK(eval.excluded_queries == std::vector<std::string>{"q3"});
  REQUIRE(eval.queries.size() == 2);
  CHECK(eval.queries[0].scores.avg == doctest::Approx(1.0));
  CHECK(eval.queries[1].scores.avg == 0.0);
  CHECK(eval.aggregate.ref_f1 == doctest::Approx(0.5));
  CHECK(eval.rouge_l == doctest::Approx(0.5));
  CHECK(eval.warnings.size() >= 2);
  const auto table = format_table(eval);
  CHECK(table.find("ALL") != std::string::npos);
  CHECK(to_json(eval)["aggregate"]["avg"].get<double>() == doctest::Approx(eval.aggregate.avg));
}

TEST_CASE("NLI judge uses the entailment threshold") {
  backends::RuleNli nli;
  NliJudge judge(nli, 0.5);
  CHECK(judge.supports("Other text. The water rose.", "the water rose"));
  CHECK_FALSE(judge.supports("The bridge stands.", "The water rose."));
}

TEST_CASE("reference file parsing") {
  const auto refs = read_references(testing::golden_dir() / "references.jsonl");
  REQUIRE(refs.size() == 2);
  CHECK(refs[1].gold_videos() == std::set<std::string>{"v1", "v3"});
}
