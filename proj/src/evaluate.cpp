#include "craft/evaluate.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>

#include "craft/error.hpp"
#include "craft/text.hpp"

namespace craft {

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    cur += ch;
    if (ch != '.' && ch != '!' && ch != '?') continue;
    // Keep runs like "?!" or "..." together.
    while (i + 1 < text.size() && (text[i + 1] == '.' || text[i + 1] == '!' || text[i + 1] == '?')) cur += text[++i];
    if (i + 1 == text.size() || std::isspace(static_cast<unsigned char>(text[i + 1]))) {
      if (auto s = trim(cur); !s.empty()) out.push_back(std::move(s));
      cur.clear();
    }
  }
  if (auto s = trim(cur); !s.empty()) out.push_back(std::move(s));
  return out;
}

void ExactMatchJudge::script_decomposition(const std::string& text, std::vector<std::string> subclaims) {
  scripted_[text] = std::move(subclaims);
}

std::vector<std::string> ExactMatchJudge::decompose(const std::string& text) {
  if (const auto it = scripted_.find(text); it != scripted_.end()) return it->second;
  return split_sentences(text);
}

bool ExactMatchJudge::supports(const std::string& document, const std::string& subclaim) {
  const auto key = normalize_text(subclaim);
  if (key.empty()) return false;
  for (const auto& line : split_lines(document)) {
    for (const auto& s : split_sentences(line)) {
      if (normalize_text(s) == key) return true;
    }
  }
  return false;
}

std::vector<std::string> NliJudge::decompose(const std::string& text) { return split_sentences(text); }

bool NliJudge::supports(const std::string& document, const std::string& subclaim) {
  for (const auto& line : split_lines(document)) {
    for (const auto& s : split_sentences(line)) {
      const auto probs = nli_.nli_probs(s, subclaim);
      backends::check_distribution("nli", probs);
      if (probs.entailment >= threshold_) return true;
    }
  }
  return false;
}

std::set<std::string> ReferenceEntry::gold_videos() const {
  std::set<std::string> out;
  for (const auto& s : subclaims) out.insert(s.videos.begin(), s.videos.end());
  return out;
}

std::vector<ReferenceEntry> read_references(const std::filesystem::path& path) {
  std::vector<ReferenceEntry> out;
  for (const auto& row : read_jsonl_file(path)) {
    try {
      ReferenceEntry e;
      e.query_id = row.at("query_id").get<std::string>();
      e.reference_text = row.value("reference_text", std::string());
      for (const auto& s : row.value("subclaims", nlohmann::json::array())) {
        GoldSubclaim g;
        g.text = s.at("text").get<std::string>();
        for (const auto& v : s.value("videos", nlohmann::json::array())) g.videos.insert(v.get<std::string>());
        e.subclaims.push_back(std::move(g));
      }
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw_error(ErrorKind::kValidation, path.string() + ": bad reference row: " + ex.what());
    }
  }
  return out;
}

std::vector<std::string> decompose_subclaims(const std::string& text, Judge& judge) {
  if (trim(text).empty()) return {};
  try {
    return judge.decompose(text);
  } catch (const std::exception& e) {
    throw_error(ErrorKind::kEvaluation, std::string("subclaim decomposition failed: ") + e.what());
  }
}

namespace {

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

bool judged(Judge& judge, const std::string& document, const std::string& subclaim) {
  try {
    return judge.supports(document, subclaim);
  } catch (const Error& e) {
    throw_error(ErrorKind::kEvaluation, std::string("support judgment failed: ") + e.what());
  }
}

double ratio(std::size_t num, std::size_t den) { return den == 0 ? 0.0 : static_cast<double>(num) / den; }

}  // namespace

std::pair<double, double> reference_pr(const std::vector<std::string>& preds, const std::vector<std::string>& refs,
                                       Judge& judge) {
  const auto ref_doc = join(refs);
  const auto pred_doc = join(preds);
  std::size_t supported = 0, covered = 0;
  for (const auto& p : preds) supported += judged(judge, ref_doc, p) ? 1 : 0;
  for (const auto& r : refs) covered += judged(judge, pred_doc, r) ? 1 : 0;
  return {ratio(supported, preds.size()), ratio(covered, refs.size())};
}

std::pair<double, double> citation_pr(const std::vector<SubclaimJudgment>& preds,
                                      const std::vector<CoverageJudgment>& refs) {
  const auto intersects = [](const std::set<std::string>& a, const std::set<std::string>& b) {
    return std::any_of(a.begin(), a.end(), [&](const std::string& x) { return b.count(x) > 0; });
  };
  std::size_t precise = 0;
  for (const auto& p : preds) precise += intersects(p.cited_videos, p.gold_videos) ? 1 : 0;
  std::size_t covered = 0, attributed = 0;
  for (const auto& r : refs) {
    if (!r.covered) continue;
    ++covered;
    attributed += intersects(r.cited_videos, r.gold_videos) ? 1 : 0;
  }
  return {ratio(precise, preds.size()), ratio(attributed, covered)};
}

double f1(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

double macro_average(const std::vector<double>& metrics) {
  if (metrics.empty()) return 0.0;
  return std::accumulate(metrics.begin(), metrics.end(), 0.0) / static_cast<double>(metrics.size());
}

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double rouge_l(const std::string& pred_text, const std::string& ref_text, std::vector<std::string>* warnings) {
  const auto ref = tokenize(ref_text);
  if (ref.empty()) {
    if (warnings) warnings->push_back("empty reference text; ROUGE-L is 0");
    return 0.0;
  }
  const auto pred = tokenize(pred_text);
  if (pred.empty()) return 0.0;
  const auto l = static_cast<double>(lcs_length(pred, ref));
  return f1(l / pred.size(), l / ref.size());
}

QueryEvaluation evaluate_query(const Report& report, const ReferenceEntry& reference, Judge& judge,
                               std::vector<std::string>& warnings) {
  QueryEvaluation q;
  q.query_id = reference.query_id;

  std::vector<PredictedSubclaim> preds;
  std::string pred_text;
  for (const auto& st : report.statements) {
    pred_text += (pred_text.empty() ? "" : " ") + st.text;
    for (auto& s : decompose_subclaims(st.text, judge)) preds.push_back({std::move(s), st.citations});
  }
  std::vector<std::string> pred_texts, ref_texts;
  for (const auto& p : preds) pred_texts.push_back(p.text);
  for (const auto& r : reference.subclaims) ref_texts.push_back(r.text);

  // Evidence a gold video contributes: the reference subclaims attributed to it.
  std::map<std::string, std::vector<std::string>> video_evidence;
  for (const auto& r : reference.subclaims) {
    for (const auto& v : r.videos) video_evidence[v].push_back(r.text);
  }

  for (const auto& p : preds) {
    SubclaimJudgment j;
    j.predicted_subclaim = p.text;
    j.cited_videos = p.cited_videos;
    for (const auto& r : reference.subclaims) {
      if (judged(judge, r.text, p.text)) {
        j.matched_reference_subclaim = r.text;
        break;
      }
    }
    j.supported_by_reference = j.matched_reference_subclaim.has_value() || judged(judge, join(ref_texts), p.text);
    for (const auto& [video, evidence] : video_evidence) {
      if (judged(judge, join(evidence), p.text)) j.gold_videos.insert(video);
    }
    q.predictions.push_back(std::move(j));
  }
  for (const auto& r : reference.subclaims) {
    CoverageJudgment c;
    c.reference_subclaim = r.text;
    c.gold_videos = r.videos;
    for (const auto& p : preds) {
      if (judged(judge, p.text, r.text)) {
        c.covered = true;
        c.cited_videos = p.cited_videos;
        break;
      }
    }
    if (!c.covered) c.covered = judged(judge, join(pred_texts), r.text);
    q.coverage.push_back(std::move(c));
  }

  auto& s = q.scores;
  std::size_t supported = 0, covered = 0;
  for (const auto& j : q.predictions) supported += j.supported_by_reference ? 1 : 0;
  for (const auto& c : q.coverage) covered += c.covered ? 1 : 0;
  s.ref_p = ratio(supported, q.predictions.size());
  s.ref_r = ratio(covered, q.coverage.size());
  std::tie(s.cite_p, s.cite_r) = citation_pr(q.predictions, q.coverage);
  s.ref_f1 = f1(s.ref_p, s.ref_r);
  s.cite_f1 = f1(s.cite_p, s.cite_r);
  s.avg = macro_average({s.ref_p, s.ref_r, s.ref_f1, s.cite_p, s.cite_r, s.cite_f1});

  const std::string ref_text = reference.reference_text.empty() ? join(ref_texts) : reference.reference_text;
  q.rouge_l = rouge_l(pred_text, ref_text, &warnings);
  return q;
}

MirageScores aggregate_scores(const std::vector<MirageScores>& per_query) {
  MirageScores a;
  if (per_query.empty()) return a;
  const auto mean = [&](double MirageScores::*field) {
    double sum = 0;
    for (const auto& q : per_query) sum += q.*field;
    return sum / static_cast<double>(per_query.size());
  };
  a.ref_p = mean(&MirageScores::ref_p);
  a.ref_r = mean(&MirageScores::ref_r);
  a.ref_f1 = mean(&MirageScores::ref_f1);
  a.cite_p = mean(&MirageScores::cite_p);
  a.cite_r = mean(&MirageScores::cite_r);
  a.cite_f1 = mean(&MirageScores::cite_f1);
  a.avg = macro_average({a.ref_p, a.ref_r, a.ref_f1, a.cite_p, a.cite_r, a.cite_f1});
  return a;
}

CorpusEvaluation evaluate_corpus(const std::vector<Report>& reports, const std::vector<ReferenceEntry>& references,
                                 Judge& judge) {
  CorpusEvaluation out;
  std::map<std::string, const Report*> by_query;
  for (const auto& r : reports) by_query[r.query_id] = &r;

  std::vector<MirageScores> per_query;
  double rouge_sum = 0;
  for (const auto& ref : references) {
    if (ref.gold_videos().empty()) {
      out.excluded_queries.push_back(ref.query_id);
      continue;
    }
    Report empty{ref.query_id, {}};
    const Report* report = &empty;
    if (const auto it = by_query.find(ref.query_id); it != by_query.end()) {
      report = it->second;
    } else {
      out.warnings.push_back("no report for query " + ref.query_id + "; scored as empty");
    }
    auto q = evaluate_query(*report, ref, judge, out.warnings);
    per_query.push_back(q.scores);
    rouge_sum += q.rouge_l;
    out.queries.push_back(std::move(q));
  }
  for (const auto& [qid, _] : by_query) {
    const bool known = std::any_of(references.begin(), references.end(),
                                   [&](const ReferenceEntry& e) { return e.query_id == qid; });
    if (!known) out.warnings.push_back("report for query " + qid + " has no reference; ignored");
  }
  out.aggregate = aggregate_scores(per_query);
  out.rouge_l = out.queries.empty() ? 0.0 : rouge_sum / static_cast<double>(out.queries.size());
  return out;
}

namespace {

nlohmann::ordered_json scores_json(const MirageScores& s) {
  nlohmann::ordered_json j;
  j["ref_p"] = s.ref_p;
  j["ref_r"] = s.ref_r;
  j["ref_f1"] = s.ref_f1;
  j["cite_p"] = s.cite_p;
  j["cite_r"] = s.cite_r;
  j["cite_f1"] = s.cite_f1;
  j["avg"] = s.avg;
  return j;
}

}  // namespace

nlohmann::ordered_json to_json(const CorpusEvaluation& eval) {
  nlohmann::ordered_json j;
  j["aggregate"] = scores_json(eval.aggregate);
  j["aggregate"]["rouge_l"] = eval.rouge_l;
  j["queries"] = nlohmann::ordered_json::array();
  for (const auto& q : eval.queries) {
    auto qj = scores_json(q.scores);
    qj["rouge_l"] = q.rouge_l;
    nlohmann::ordered_json row;
    row["query_id"] = q.query_id;
    row["scores"] = std::move(qj);
    row["predicted_subclaims"] = q.predictions.size();
    row["reference_subclaims"] = q.coverage.size();
    j["queries"].push_back(std::move(row));
  }
  j["excluded_queries"] = eval.excluded_queries;
  j["warnings"] = eval.warnings;
  return j;
}

std::string format_table(const CorpusEvaluation& eval) {
  const std::vector<std::string> header = {"query", "ref_p", "ref_r", "ref_f1", "cite_p", "cite_r", "cite_f1", "avg",
                                           "rouge_l"};
  std::vector<std::vector<std::string>> rows{header};
  const auto row_for = [](const std::string& name, const MirageScores& s, double rl) {
    return std::vector<std::string>{name,
                                    format_fixed(s.ref_p, 3),
                                    format_fixed(s.ref_r, 3),
                                    format_fixed(s.ref_f1, 3),
                                    format_fixed(s.cite_p, 3),
                                    format_fixed(s.cite_r, 3),
                                    format_fixed(s.cite_f1, 3),
                                    format_fixed(s.avg, 3),
                                    format_fixed(rl, 3)};
  };
  for (const auto& q : eval.queries) rows.push_back(row_for(q.query_id, q.scores, q.rouge_l));
  rows.push_back(row_for("ALL", eval.aggregate, eval.rouge_l));

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  std::string out;
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t c = 0; c < r.size(); ++c) {
      const std::string pad(width[c] - r[c].size(), ' ');
      line += c == 0 ? r[c] + pad : "  " + pad + r[c];
    }
    out += line + "\n";
  }
  return out;
}

}  // namespace craft
