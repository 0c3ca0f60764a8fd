#pragma once

#include <filesystem>
#include <functional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "craft/backends/backend.hpp"
#include "craft/extraction.hpp"
#include "craft/ingest.hpp"

namespace craft {

struct EvidencePool {
  std::string query_id;
  std::vector<AtomicClaim> records;
};

/// Concatenation of the per-video claim sets in the given video order. No
/// deduplication: the same fact from two videos stays two records.
EvidencePool pool_evidence(const std::string& query_id,
                           const std::vector<std::pair<std::string, std::vector<AtomicClaim>>>& per_video);

struct ClaimPacket {
  std::string query_id;
  std::vector<AtomicClaim> ranked;
};

using EvidenceFn = std::function<backends::EvidenceRef(const AtomicClaim&)>;

/// Rescores every record against its source video and keeps the top k by
/// score, ties broken by claim_id. Nothing is removed by thresholding. A
/// record whose rescoring fails keeps its previous score (0 if it had none)
/// and adds a warning.
ClaimPacket rescore_and_rank(const EvidencePool& pool, backends::EntailmentScorer& entailment, const EvidenceFn& evidence,
                             std::size_t k, std::vector<std::string>& warnings);

struct ReportStatement {
  std::string text;
  std::set<std::string> citations;

  bool operator==(const ReportStatement&) const = default;
};

struct Report {
  std::string query_id;
  std::vector<ReportStatement> statements;

  bool operator==(const Report&) const = default;
};

backends::PromptDocument build_report_prompt(const PersonaQuery& pq, const ClaimPacket& packet,
                                             const std::vector<std::string>& guard_violations = {});

/// Numerals in `statement` that appear in no packet claim.
std::vector<std::string> numeral_violations(const std::string& statement, const ClaimPacket& packet);

/// Statements are lines of the form `<text> [C1, C4]`, where Cn is the
/// 1-based rank of a packet claim; citations become the cited claims'
/// source video ids. Lines without a valid citation are skipped with a
/// warning. A statement with a numeral absent from the packet triggers one
/// retry (when `retry_on_guard`); statements that still violate are dropped.
Report generate_report(const PersonaQuery& pq, const ClaimPacket& packet, backends::ChatBackend& llm,
                       bool retry_on_guard, std::vector<std::string>& warnings);

/// Statements with the same normalized text become one statement citing the
/// union, at the position of the first occurrence.
Report merge_citations(const Report& report);

/// Chunk-level citations replaced by parent video ids, then merged again.
/// Throws kRemap naming every citation the map does not know.
Report remap_ids(const Report& report, const ChunkMap& map);

nlohmann::ordered_json to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);

/// `{"query_id": ..., "report": [{"text": ..., "citations": [...]}]}`, one line per report.
std::string to_jsonl(const std::vector<Report>& reports);
void write_jsonl(const std::vector<Report>& reports, const std::filesystem::path& path);
std::vector<Report> read_reports(const std::filesystem::path& path);

}  // namespace craft
