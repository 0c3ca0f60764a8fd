#include "craft/consolidate.hpp"

#include <algorithm>
#include <map>

#include <spdlog/spdlog.h>

#include "craft/error.hpp"
#include "craft/prompt_format.hpp"
#include "craft/text.hpp"

using nlohmann::json;

namespace craft {

EvidencePool pool_evidence(const std::string& query_id,
                           const std::vector<std::pair<std::string, std::vector<AtomicClaim>>>& per_video) {
  EvidencePool pool{query_id, {}};
  for (const auto& [video_id, claims] : per_video) {
    pool.records.insert(pool.records.end(), claims.begin(), claims.end());
  }
  return pool;
}

ClaimPacket rescore_and_rank(const EvidencePool& pool, backends::EntailmentScorer& entailment, const EvidenceFn& evidence,
                             std::size_t k, std::vector<std::string>& warnings) {
  if (k == 0) throw_error(ErrorKind::kInvalidInput, "packet size k must be at least 1");
  std::vector<AtomicClaim> scored = pool.records;
  for (auto& c : scored) {
    try {
      const double s = entailment.entailment_score(c.text, evidence(c));
      backends::check_score("entailment", s);
      c.support_score = s;
    } catch (const Error& e) {
      warnings.push_back("rescoring failed for " + c.claim_id + ", keeping previous score: " + e.what());
      if (!c.support_score) c.support_score = 0.0;
    }
  }
  std::stable_sort(scored.begin(), scored.end(), [](const AtomicClaim& a, const AtomicClaim& b) {
    if (*a.support_score != *b.support_score) return *a.support_score > *b.support_score;
    return a.claim_id < b.claim_id;
  });
  if (scored.size() > k) scored.resize(k);
  return {pool.query_id, std::move(scored)};
}

namespace {

constexpr std::string_view kReportFormat =
    "Write report statements for the persona and query using only information present in the claim packet.\n"
    "Do not add new entities, numbers, dates, or causal links.\n"
    "When several claims support the same fact, state the fact once and cite all of them.\n"
    "Output one statement per line in the form\n"
    "<statement> [C1, C3]\n"
    "citing the packet handles that support it. Output nothing else.";

std::set<std::string> packet_numerals(const ClaimPacket& packet) {
  std::set<std::string> out;
  for (const auto& c : packet.ranked) {
    for (auto n : extract_numerals(c.text)) {
      out.insert(n);
      n.erase(std::remove(n.begin(), n.end(), ','), n.end());
      out.insert(n);
    }
  }
  return out;
}

struct ParsedStatement {
  ReportStatement statement;
  std::vector<std::string> violations;
};

std::vector<ParsedStatement> parse_report(const std::string& reply, const ClaimPacket& packet,
                                          std::vector<std::string>& warnings) {
  std::vector<ParsedStatement> out;
  for (const auto& raw : split_lines(reply)) {
    std::string line = trim(raw);
    if (line.empty()) continue;
    if (starts_with(line, "- ")) line = trim(line.substr(2));
    const auto open = line.rfind('[');
    if (open == std::string::npos || line.back() != ']') {
      warnings.push_back("report line without citations skipped: " + line);
      continue;
    }
    ReportStatement st;
    st.text = trim(line.substr(0, open));
    std::string handles = line.substr(open + 1, line.size() - open - 2);
    std::replace(handles.begin(), handles.end(), ';', ',');
    std::size_t pos = 0;
    bool bad_handle = false;
    while (pos <= handles.size()) {
      const auto comma = handles.find(',', pos);
      const std::string h = trim(handles.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
      pos = comma == std::string::npos ? handles.size() + 1 : comma + 1;
      if (h.empty()) continue;
      std::size_t rank = 0;
      if (h.size() >= 2 && (h[0] == 'C' || h[0] == 'c')) rank = std::strtoul(h.c_str() + 1, nullptr, 10);
      if (rank == 0 || rank > packet.ranked.size()) {
        bad_handle = true;
        continue;
      }
      st.citations.insert(packet.ranked[rank - 1].source_video_id);
    }
    if (bad_handle) warnings.push_back("unknown packet handle in report line: " + line);
    if (st.text.empty() || st.citations.empty()) {
      warnings.push_back("report line without a valid citation skipped: " + line);
      continue;
    }
    auto violations = numeral_violations(st.text, packet);
    out.push_back({std::move(st), std::move(violations)});
  }
  return out;
}

}  // namespace

std::vector<std::string> numeral_violations(const std::string& statement, const ClaimPacket& packet) {
  const auto allowed = packet_numerals(packet);
  std::vector<std::string> out;
  for (auto n : extract_numerals(statement)) {
    std::string plain = n;
    plain.erase(std::remove(plain.begin(), plain.end(), ','), plain.end());
    if (allowed.count(n) == 0 && allowed.count(plain) == 0) out.push_back(n);
  }
  return out;
}

backends::PromptDocument build_report_prompt(const PersonaQuery& pq, const ClaimPacket& packet,
                                             const std::vector<std::string>& guard_violations) {
  std::string u;
  u += std::string(prompt::kPersonaTitle) + "\n" + pq.persona_title + "\n\n";
  u += std::string(prompt::kPersonaBackground) + "\n" + pq.persona_background + "\n\n";
  u += std::string(prompt::kQuery) + "\n" + pq.query_text + "\n\n";
  u += std::string(prompt::kClaimPacket) + "\n";
  for (std::size_t i = 0; i < packet.ranked.size(); ++i) {
    const auto& c = packet.ranked[i];
    u += "C" + std::to_string(i + 1) + " (score " + format_fixed(c.support_score.value_or(0.0), 3) + ", video " +
         c.source_video_id + ", " + to_string(c.modality) + " " + format_seconds(c.span.start_s) + "-" +
         format_seconds(c.span.end_s) + "): " + c.text + "\n";
  }
  if (!guard_violations.empty()) {
    u += "\n" + std::string(prompt::kGuardViolations) + "\nThese numbers do not appear in the claim packet: ";
    for (std::size_t i = 0; i < guard_violations.size(); ++i) u += (i ? ", " : "") + guard_violations[i];
    u += ". Rewrite the report without them.\n";
  }
  u += "\n" + std::string(prompt::kOutputFormat) + "\n" + std::string(kReportFormat) + "\n";
  return {"You write citation-backed report statements from a claim packet. [" + std::string(prompt::kPromptVersion) +
              "]",
          u};
}

Report generate_report(const PersonaQuery& pq, const ClaimPacket& packet, backends::ChatBackend& llm,
                       bool retry_on_guard, std::vector<std::string>& warnings) {
  Report report{packet.query_id, {}};
  if (packet.ranked.empty()) {
    warnings.push_back("empty claim packet for query " + packet.query_id + "; report is empty");
    return report;
  }

  auto parsed = parse_report(llm.chat_complete(build_report_prompt(pq, packet), backends::ChatRole::kConsolidate),
                             packet, warnings);
  std::vector<std::string> violations;
  for (const auto& p : parsed) violations.insert(violations.end(), p.violations.begin(), p.violations.end());

  if (!violations.empty() && retry_on_guard) {
    std::sort(violations.begin(), violations.end());
    violations.erase(std::unique(violations.begin(), violations.end()), violations.end());
    warnings.push_back("numeral guard rejected statements for query " + packet.query_id + "; retrying once");
    try {
      parsed = parse_report(
          llm.chat_complete(build_report_prompt(pq, packet, violations), backends::ChatRole::kConsolidate), packet,
          warnings);
    } catch (const Error& e) {
      warnings.push_back(std::string("guard retry failed: ") + e.what());
    }
  }

  for (auto& p : parsed) {
    if (!p.violations.empty()) {
      warnings.push_back("dropped statement with numerals absent from the packet: " + p.statement.text);
      continue;
    }
    report.statements.push_back(std::move(p.statement));
  }
  return report;
}

Report merge_citations(const Report& report) {
  Report out{report.query_id, {}};
  std::map<std::string, std::size_t> index;
  for (const auto& st : report.statements) {
    const auto key = normalize_text(st.text);
    if (const auto it = index.find(key); it != index.end()) {
      out.statements[it->second].citations.insert(st.citations.begin(), st.citations.end());
    } else {
      index.emplace(key, out.statements.size());
      out.statements.push_back(st);
    }
  }
  return out;
}

Report remap_ids(const Report& report, const ChunkMap& map) {
  Report out{report.query_id, {}};
  std::set<std::string> unknown;
  for (const auto& st : report.statements) {
    ReportStatement mapped{st.text, {}};
    for (const auto& c : st.citations) {
      if (map.contains_chunk(c)) {
        mapped.citations.insert(map.parent_of(c));
      } else if (map.is_parent(c)) {
        mapped.citations.insert(c);
      } else {
        unknown.insert(c);
      }
    }
    out.statements.push_back(std::move(mapped));
  }
  if (!unknown.empty()) {
    std::string list;
    for (const auto& u : unknown) list += (list.empty() ? "" : ", ") + u;
    throw_error(ErrorKind::kRemap, "query " + report.query_id + ": unknown citation ids: " + list);
  }
  return merge_citations(out);
}

nlohmann::ordered_json to_json(const Report& report) {
  nlohmann::ordered_json j;
  j["query_id"] = report.query_id;
  auto statements = nlohmann::ordered_json::array();
  for (const auto& st : report.statements) {
    nlohmann::ordered_json sj;
    sj["text"] = st.text;
    sj["citations"] = std::vector<std::string>(st.citations.begin(), st.citations.end());
    statements.push_back(std::move(sj));
  }
  j["report"] = std::move(statements);
  return j;
}

Report report_from_json(const json& j) {
  Report r;
  r.query_id = j.at("query_id").get<std::string>();
  for (const auto& sj : j.at("report")) {
    ReportStatement st;
    st.text = sj.at("text").get<std::string>();
    for (const auto& c : sj.at("citations")) st.citations.insert(c.get<std::string>());
    r.statements.push_back(std::move(st));
  }
  return r;
}

std::string to_jsonl(const std::vector<Report>& reports) {
  std::string out;
  for (const auto& r : reports) out += to_json(r).dump() + "\n";
  return out;
}

void write_jsonl(const std::vector<Report>& reports, const std::filesystem::path& path) {
  write_file_atomic(path, to_jsonl(reports));
}

std::vector<Report> read_reports(const std::filesystem::path& path) {
  std::vector<Report> out;
  for (const auto& row : read_jsonl_file(path)) out.push_back(report_from_json(row));
  return out;
}

}  // namespace craft
