#include "craft/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

#include "craft/backends/instrumented.hpp"
#include "craft/backends/mock.hpp"
#include "craft/backends/remote.hpp"
#include "craft/critic.hpp"
#include "craft/dks.hpp"
#include "craft/error.hpp"
#include "craft/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace craft {

// ---------------------------------------------------------------------------
// Backend factory

namespace {

json fixture_for(const PipelineConfig& c, const backends::BackendConfig& b) {
  return b.script_path.empty() ? json::object() : backends::load_fixture(c.resolve(b.script_path).string());
}

std::shared_ptr<backends::ChatBackend> make_chat(const PipelineConfig& c, const std::string& role) {
  const auto& b = c.backend(role);
  if (b.kind == backends::BackendKind::kRemote) return std::make_shared<backends::RemoteChat>(b);
  return backends::ScriptedChat::from_fixture(fixture_for(c, b), b.strict);
}

}  // namespace

backends::Backends make_backends(const PipelineConfig& c) {
  using backends::BackendKind;
  backends::Backends out;
  out.counts = std::make_shared<backends::CallCounts>();
  const auto cap = c.max_concurrency;
  const auto remote = [&](const std::string& role) { return c.backend(role).kind == BackendKind::kRemote; };

  {
    const auto& b = c.backend("embed");
    std::shared_ptr<backends::Embedder> e;
    if (remote("embed")) e = std::make_shared<backends::RemoteEmbedder>(b);
    else e = std::make_shared<backends::HashEmbedder>();
    out.embed = backends::instrument(e, out.counts, cap);
  }
  for (const auto* role : {"asr_primary", "asr_fallback"}) {
    const auto& b = c.backend(role);
    std::shared_ptr<backends::AsrBackend> a;
    if (remote(role)) {
      a = std::make_shared<backends::RemoteAsr>(role, b);
    } else {
      a = std::make_shared<backends::FixtureAsr>(
          std::set<std::string>(b.supported_languages.begin(), b.supported_languages.end()), b.strict);
    }
    auto wrapped = backends::instrument(a, role, out.counts, cap);
    (std::string(role) == "asr_primary" ? out.asr_primary : out.asr_fallback) = wrapped;
  }
  {
    const auto& b = c.backend("translate");
    std::shared_ptr<backends::Translator> t;
    if (remote("translate")) {
      t = std::make_shared<backends::RemoteTranslator>(b);
    } else {
      const auto fx = fixture_for(c, b);
      t = std::make_shared<backends::FixtureTranslator>(
          fx.value("translations", json::object()).get<std::map<std::string, std::string>>(), b.strict);
    }
    out.translate = backends::instrument(t, out.counts, cap);
  }
  {
    auto router = std::make_shared<backends::ChatRouter>();
    auto chat = backends::instrument(make_chat(c, "chat"), out.counts, cap);
    router->set(backends::ChatRole::kExtract, chat);
    router->set(backends::ChatRole::kConsolidate, chat);
    router->set(backends::ChatRole::kPersona, chat);
    router->set(backends::ChatRole::kAdjudicate, backends::instrument(make_chat(c, "adjudicator"), out.counts, cap));
    out.chat = router;
  }
  {
    const auto& b = c.backend("entailment");
    std::shared_ptr<backends::EntailmentScorer> e;
    if (remote("entailment")) {
      e = std::make_shared<backends::RemoteEntailment>(b);
    } else {
      const auto fx = fixture_for(c, b);
      e = std::make_shared<backends::OverlapEntailment>(
          fx.value("entailment", json::object()).get<std::map<std::string, double>>());
    }
    out.entailment = backends::instrument(e, out.counts, cap);
  }
  {
    const auto& b = c.backend("nli");
    std::shared_ptr<backends::NliBackend> n;
    if (remote("nli")) n = std::make_shared<backends::RemoteNli>(b);
    else n = backends::RuleNli::from_fixture(fixture_for(c, b));
    out.nli = backends::instrument(n, out.counts, cap);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Manifest and helpers

const char* to_string(Stage s) {
  switch (s) {
    case Stage::kIngest: return "ingest";
    case Stage::kTranscribe: return "transcribe";
    case Stage::kDks: return "dks";
    case Stage::kExtract: return "extract";
    case Stage::kConsolidate: return "consolidate";
    case Stage::kEvaluate: return "evaluate";
  }
  return "ingest";
}

std::optional<Stage> stage_from_string(const std::string& s) {
  for (auto st : {Stage::kIngest, Stage::kTranscribe, Stage::kDks, Stage::kExtract, Stage::kConsolidate,
                  Stage::kEvaluate}) {
    if (s == to_string(st)) return st;
  }
  return std::nullopt;
}

ordered_json to_json(const RunManifest& m) {
  ordered_json j;
  j["config_digest"] = m.config_digest;
  auto stages = ordered_json::array();
  for (const auto& s : m.stages) {
    ordered_json sj;
    sj["stage"] = s.name;
    sj["counts"] = s.counts;
    if (m.record_timings) sj["seconds"] = s.seconds;
    stages.push_back(std::move(sj));
  }
  j["stages"] = std::move(stages);
  j["backend_calls"] = m.backend_calls;
  auto warnings = m.warnings;
  std::sort(warnings.begin(), warnings.end());
  j["warnings"] = warnings;
  return j;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex mu;
  std::vector<std::thread> threads;
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&] {
      while (true) {
        const auto i = next.fetch_add(1);
        if (i >= n) return;
        {
          std::lock_guard lock(mu);
          if (first) return;
        }
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!first) first = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (first) std::rethrow_exception(first);
}

// ---------------------------------------------------------------------------
// Evidence

void EvidenceBuilder::add_chunk(const VideoChunk& chunk, const std::string& media_path, std::vector<FrameRef> frames) {
  chunks_[chunk.chunk_id] = {chunk, media_path, std::move(frames)};
}

void EvidenceBuilder::add_transcript(const Transcript& t) { transcripts_[t.video_id] = t; }

backends::EvidenceRef EvidenceBuilder::operator()(const AtomicClaim& claim) const {
  const auto it = chunks_.find(claim.source_video_id);
  if (it == chunks_.end()) throw_error(ErrorKind::kLookup, "no evidence for chunk " + claim.source_video_id);
  const auto& info = it->second;
  backends::EvidenceRef ev;
  ev.video_id = info.chunk.chunk_id;
  ev.parent_video_id = info.chunk.parent_video_id;
  ev.start_s = claim.span.start_s;
  ev.end_s = claim.span.end_s;
  ev.media_path = info.media_path;

  if (const auto t = transcripts_.find(info.chunk.parent_video_id); t != transcripts_.end() && t->second.usable()) {
    const auto& tr = t->second;
    if (is_english(tr.language)) {
      std::string window;
      for (const auto& s : tr.segments) {
        const bool overlaps = s.start_s < claim.span.end_s && s.end_s > claim.span.start_s;
        const bool contains_point = s.start_s <= claim.span.start_s && claim.span.start_s <= s.end_s;
        if (overlaps || contains_point) window += (window.empty() ? "" : " ") + s.text;
      }
      ev.transcript_window = window;
    } else {
      ev.transcript_window = tr.english_text.value_or("");
    }
  }

  const FrameRef* nearest = nullptr;
  for (const auto& f : info.frames) {
    if (f.timestamp_s >= claim.span.start_s && f.timestamp_s <= claim.span.end_s) ev.frame_paths.push_back(f.frame_path);
    if (nearest == nullptr ||
        std::abs(f.timestamp_s - claim.span.start_s) < std::abs(nearest->timestamp_s - claim.span.start_s)) {
      nearest = &f;
    }
  }
  if (ev.frame_paths.empty() && nearest != nullptr) ev.frame_paths.push_back(nearest->frame_path);
  return ev;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

[[noreturn]] void missing(Stage needed_by, Stage run_first, const std::string& what) {
  throw_error(ErrorKind::kPrerequisite, std::string(to_string(needed_by)) + " needs " + what + "; run '" +
                                            to_string(run_first) + "' first");
}

std::vector<AtomicClaim> read_claims(const fs::path& path) {
  std::vector<AtomicClaim> out;
  for (const auto& row : read_jsonl_file(path)) out.push_back(claim_from_json(row));
  return out;
}

void write_claims(const fs::path& path, const std::vector<AtomicClaim>& claims) {
  std::string out;
  for (const auto& c : claims) out += to_json(c).dump() + "\n";
  write_file_atomic(path, out);
}

}  // namespace

Pipeline::Pipeline(PipelineConfig config, backends::Backends backends)
    : config_(std::move(config)), backends_(std::move(backends)), cache_(config_.cache_root()) {}

void Pipeline::warn(const std::string& message) {
  spdlog::warn("{}", message);
  warnings_.push_back(message);
}

void Pipeline::load_inputs() {
  if (inputs_loaded_) return;
  const fs::path corpus = config_.resolve(config_.corpus);
  videos_ = read_corpus_manifest(corpus);
  for (auto& v : videos_) {
    if (!v.media_path.empty() && fs::path(v.media_path).is_relative()) {
      v.media_path = (corpus.parent_path() / v.media_path).lexically_normal().string();
    }
    video_by_id_[v.video_id] = v;
  }
  queries_ = read_queries(config_.resolve(config_.queries));
  for (const auto& q : queries_) {
    for (const auto& vid : q.video_ids) {
      if (video_by_id_.count(vid) == 0) {
        throw_error(ErrorKind::kValidation, "query " + q.query_id + " names unknown video " + vid);
      }
    }
  }
  inputs_loaded_ = true;
}

std::vector<VideoChunk> Pipeline::require_chunks(Stage needed_by) const {
  const auto path = cache_ / "ingest" / "chunks.jsonl";
  if (!fs::exists(path)) missing(needed_by, Stage::kIngest, "the chunk map");
  return read_chunks(path);
}

fs::path Pipeline::claims_dir(const std::string& query_id, const std::string& video_id) const {
  return cache_ / "claims" / query_id / video_id;
}

PersonaQuery Pipeline::persona_for(const PersonaQuery& pq, bool synthesize) {
  if (pq.has_persona()) return pq;
  PersonaQuery out = pq;
  const auto path = cache_ / "personas" / (pq.query_id + ".json");
  if (fs::exists(path)) {
    const auto j = read_json_file(path);
    out.persona_title = j.value("title", std::string());
    out.persona_background = j.value("background", std::string());
    return out;
  }
  if (!synthesize) missing(Stage::kConsolidate, Stage::kExtract, "the synthesized persona for " + pq.query_id);
  try {
    const auto persona = synthesize_persona(pq.query_text, {}, *backends_.chat);
    out.persona_title = persona.title;
    out.persona_background = persona.background;
  } catch (const Error& e) {
    if (!config_.persona_fail_open) throw;
    warn("persona synthesis failed for query " + pq.query_id + ", continuing without a persona");
  }
  ordered_json j;
  j["title"] = out.persona_title;
  j["background"] = out.persona_background;
  write_file_atomic(path, j.dump(2) + "\n");
  return out;
}

StageStats Pipeline::run_stage(Stage stage) {
  load_inputs();
  const auto t0 = std::chrono::steady_clock::now();
  spdlog::info("[{}] start", to_string(stage));
  StageStats stats;
  switch (stage) {
    case Stage::kIngest: stats = ingest(); break;
    case Stage::kTranscribe: stats = transcribe(); break;
    case Stage::kDks: stats = dks(); break;
    case Stage::kExtract: stats = extract(); break;
    case Stage::kConsolidate: stats = consolidate(); break;
    case Stage::kEvaluate: stats = evaluate(); break;
  }
  stats.name = to_string(stage);
  stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  spdlog::info("[{}] done in {:.3f}s", stats.name, stats.seconds);
  stages_.push_back(stats);
  return stats;
}

RunManifest Pipeline::run_all(bool with_evaluate) {
  for (auto s : {Stage::kIngest, Stage::kTranscribe, Stage::kDks, Stage::kExtract, Stage::kConsolidate}) run_stage(s);
  if (with_evaluate) run_stage(Stage::kEvaluate);
  write_manifest();
  return manifest();
}

RunManifest Pipeline::manifest() const {
  RunManifest m;
  m.config_digest = config_digest(config_);
  m.stages = stages_;
  m.backend_calls = backends_.counts ? backends_.counts->snapshot() : std::map<std::string, std::size_t>{};
  m.warnings = warnings_;
  m.record_timings = config_.record_timings;
  return m;
}

void Pipeline::write_manifest() const { write_file_atomic(manifest_path(), to_json(manifest()).dump(2) + "\n"); }

StageStats Pipeline::ingest() {
  std::vector<VideoChunk> chunks;
  for (const auto& v : videos_) {
    auto vc = chunk_video(v, config_.chunk_max_s);
    chunks.insert(chunks.end(), vc.begin(), vc.end());
  }
  fs::create_directories(cache_ / "ingest");
  write_chunk_map(cache_ / "ingest" / "chunks.jsonl", chunks);

  std::string cmd = config_.frame_cmd;
  const std::string dir_token = "{config_dir}";
  for (auto p = cmd.find(dir_token); p != std::string::npos; p = cmd.find(dir_token, p)) {
    const auto quoted = shell_quote(fs::absolute(config_.base_dir).lexically_normal().string());
    cmd.replace(p, dir_token.size(), quoted);
    p += quoted.size();
  }
  FrameExtractor extractor(cmd, cache_);
  std::vector<std::size_t> frame_counts(chunks.size(), 0);
  parallel_for(chunks.size(), config_.workers, [&](std::size_t i) {
    const auto& c = chunks[i];
    const auto frames = extractor.extract(c, video_by_id_.at(c.parent_video_id).media_path, config_.dks_fps);
    frame_counts[i] = frames.size();
    spdlog::debug("[ingest] chunk={} frames={}", c.chunk_id, frames.size());
  });

  StageStats s;
  s.counts["videos"] = videos_.size();
  s.counts["chunks"] = chunks.size();
  s.counts["frames"] = std::accumulate(frame_counts.begin(), frame_counts.end(), std::size_t{0});
  s.counts["frame_commands"] = extractor.commands_run();
  return s;
}

StageStats Pipeline::transcribe() {
  TranscriptCache cache(cache_);
  AsrPair asr{backends_.asr_primary, backends_.asr_fallback};
  std::vector<Transcript> results(videos_.size());
  parallel_for(videos_.size(), config_.workers, [&](std::size_t i) {
    results[i] = transcribe_and_translate(videos_[i], asr, *backends_.translate, cache, config_.degeneracy);
  });

  StageStats s;
  s.counts["videos"] = videos_.size();
  std::size_t degenerate = 0, fallback = 0, translated = 0;
  for (const auto& t : results) {
    if (!t.usable()) ++degenerate;
    if (t.backend_used == AsrBackendUsed::kFallback) ++fallback;
    if (t.usable() && !is_english(t.language) && t.english_text) ++translated;
    for (const auto& w : t.warnings) warn("transcript " + t.video_id + ": " + w);
  }
  s.counts["degenerate"] = degenerate;
  s.counts["fallback_asr"] = fallback;
  s.counts["translated"] = translated;
  return s;
}

StageStats Pipeline::dks() {
  const auto chunks = require_chunks(Stage::kDks);
  const auto store = make_chunk_store(chunks);
  FrameExtractor manifests("", cache_);
  ClipStore clips(cache_);

  std::vector<std::pair<const PersonaQuery*, std::string>> tasks;
  for (const auto& q : queries_) {
    for (const auto& v : q.video_ids) tasks.emplace_back(&q, v);
  }
  std::vector<char> reused(tasks.size(), 0);
  std::vector<std::size_t> selected(tasks.size(), 0);
  parallel_for(tasks.size(), config_.workers, [&](std::size_t i) {
    const auto& [q, vid] = tasks[i];
    if (const auto cached = clips.load(q->query_id, vid)) {
      reused[i] = 1;
      selected[i] = cached->selected.size();
      return;
    }
    const auto it = store.find(vid);
    if (it == store.end()) missing(Stage::kDks, Stage::kIngest, "chunks for video " + vid);
    std::vector<std::vector<FrameRef>> per_chunk;
    for (const auto& c : it->second) {
      const auto path = manifests.manifest_path(c.chunk_id);
      if (!fs::exists(path)) missing(Stage::kDks, Stage::kIngest, "the frame manifest of " + c.chunk_id);
      per_chunk.push_back(read_frame_manifest(path));
    }
    const auto frames = concat_manifests(per_chunk);
    const auto scores = score_frames(frames, q->query_text, *backends_.embed, config_.dks_batch_size);
    const auto clip = select_keyframes(scores, config_.dks_budget, q->query_id, vid);
    clips.store(clip);
    selected[i] = clip.selected.size();
    spdlog::debug("[dks] query={} video={} candidates={} selected={}", q->query_id, vid, frames.size(),
                  clip.selected.size());
  });

  StageStats s;
  s.counts["pairs"] = tasks.size();
  s.counts["reused"] = static_cast<std::size_t>(std::count(reused.begin(), reused.end(), 1));
  s.counts["keyframes"] = std::accumulate(selected.begin(), selected.end(), std::size_t{0});
  return s;
}

StageStats Pipeline::extract() {
  const auto chunks = require_chunks(Stage::kExtract);
  const auto store = make_chunk_store(chunks);
  TranscriptCache tcache(cache_);
  ClipStore clips(cache_);
  FrameExtractor manifests("", cache_);

  EvidenceBuilder evidence;
  for (const auto& c : chunks) {
    const auto path = manifests.manifest_path(c.chunk_id);
    if (!fs::exists(path)) missing(Stage::kExtract, Stage::kIngest, "the frame manifest of " + c.chunk_id);
    evidence.add_chunk(c, video_by_id_.at(c.parent_video_id).media_path, read_frame_manifest(path));
  }
  std::map<std::string, Transcript> transcripts;
  for (const auto& q : queries_) {
    for (const auto& vid : q.video_ids) {
      if (transcripts.count(vid)) continue;
      auto t = tcache.load(vid);
      if (!t) missing(Stage::kExtract, Stage::kTranscribe, "the transcript of " + vid);
      evidence.add_transcript(*t);
      transcripts.emplace(vid, std::move(*t));
    }
  }

  std::vector<PersonaQuery> personas;
  for (const auto& q : queries_) personas.push_back(persona_for(q, true));

  struct Task {
    const PersonaQuery* pq;
    std::string video_id;
  };
  struct Outcome {
    bool reused = false;
    std::size_t initial = 0, final_claims = 0, rounds = 0, rejected = 0;
    std::vector<std::string> warnings;
  };
  std::vector<Task> tasks;
  for (const auto& pq : personas) {
    for (const auto& v : pq.video_ids) tasks.push_back({&pq, v});
  }
  std::vector<Outcome> outcomes(tasks.size());

  CriticThresholds th = config_.critic;
  parallel_for(tasks.size(), config_.workers, [&](std::size_t i) {
    const auto& pq = *tasks[i].pq;
    const auto& vid = tasks[i].video_id;
    auto& out = outcomes[i];
    const auto dir = claims_dir(pq.query_id, vid);
    const auto final_path = dir / "final.jsonl";
    if (fs::exists(final_path)) {
      out.reused = true;
      out.final_claims = read_claims(final_path).size();
      return;
    }
    const auto& meta = video_by_id_.at(vid);
    VideoContext ctx{vid, meta.duration_s, meta.media_path, store.count(vid) ? store.at(vid) : std::vector<VideoChunk>{}};
    const auto visual = resolve_visual_input(pq.query_id, vid, clips, store);
    if (!visual.is_clip()) {
      out.warnings.push_back("no keyframe clip for " + pq.query_id + "/" + vid + "; using raw chunks");
    }
    const std::optional<Transcript> transcript = transcripts.at(vid);
    const std::string tag = pq.query_id + "/" + vid;

    const auto raw = extract_claims(build_prompt(pq, ctx, visual, transcript), *backends_.chat, pq.query_id, vid);
    write_file_atomic(dir / "round1.txt", raw);
    auto parsed = parse_claims(raw, pq.query_id, ctx, 1);
    out.initial = parsed.claims.size();
    out.rejected = parsed.rejected.size();
    for (const auto& w : parsed.warnings) out.warnings.push_back(tag + ": " + w);
    spdlog::info("[extract] query={} video={} claims={} rejected={}", pq.query_id, vid, parsed.claims.size(),
                 parsed.rejected.size());

    RefineBackends rb;
    rb.entailment = backends_.entailment.get();
    rb.nli = backends_.nli.get();
    rb.adjudicator = backends_.chat.get();
    rb.evidence = [&](const AtomicClaim& c) { return evidence(c); };
    rb.reextract = [&](const Refinement& r) {
      const int round = r.round + 1;
      const auto text =
          extract_claims(build_prompt(pq, ctx, visual, transcript, &r), *backends_.chat, pq.query_id, vid);
      write_file_atomic(dir / ("round" + std::to_string(round) + ".txt"), text);
      auto next = parse_claims(text, pq.query_id, ctx, round);
      out.rejected += next.rejected.size();
      return next;
    };
    rb.on_report = [&](const CriticReport& report) {
      write_file_atomic(cache_ / "critic" / pq.query_id / vid / ("round" + std::to_string(report.round) + ".json"),
                        to_json(report).dump(2) + "\n");
      spdlog::info("[critic] query={} video={} round={} dropped={} contradictions={}", pq.query_id, vid,
                   report.round, report.dropped_claim_ids.size(), report.confirmed_contradictions.size());
    };
    auto result = refine_loop(std::move(parsed.claims), rb, th, std::move(parsed.rejected));
    for (const auto& w : result.warnings) out.warnings.push_back(tag + ": " + w);
    if (result.error) out.warnings.push_back(tag + ": re-extraction failed, keeping the previous round: " + *result.error);
    out.final_claims = result.claims.size();
    out.rounds = static_cast<std::size_t>(result.rounds);
    write_claims(final_path, result.claims);
  });

  StageStats s;
  s.counts["pairs"] = tasks.size();
  for (auto& o : outcomes) {
    s.counts["reused"] += o.reused ? 1 : 0;
    s.counts["claims_initial"] += o.initial;
    s.counts["claims_final"] += o.final_claims;
    s.counts["critic_rounds"] += o.rounds;
    s.counts["rejected_lines"] += o.rejected;
    for (auto& w : o.warnings) warn(w);
  }
  return s;
}

StageStats Pipeline::consolidate() {
  const auto chunks = require_chunks(Stage::kConsolidate);
  ChunkMap map;
  for (const auto& c : chunks) map.add(c);
  TranscriptCache tcache(cache_);
  FrameExtractor manifests("", cache_);

  EvidenceBuilder evidence;
  for (const auto& c : chunks) {
    const auto path = manifests.manifest_path(c.chunk_id);
    if (!fs::exists(path)) missing(Stage::kConsolidate, Stage::kIngest, "the frame manifest of " + c.chunk_id);
    evidence.add_chunk(c, video_by_id_.at(c.parent_video_id).media_path, read_frame_manifest(path));
  }
  for (const auto& v : videos_) {
    if (auto t = tcache.load(v.video_id)) evidence.add_transcript(*t);
  }

  std::vector<PersonaQuery> personas;
  std::vector<std::vector<std::pair<std::string, std::vector<AtomicClaim>>>> per_query;
  for (const auto& q : queries_) {
    std::vector<std::pair<std::string, std::vector<AtomicClaim>>> sets;
    for (const auto& vid : q.video_ids) {
      const auto path = claims_dir(q.query_id, vid) / "final.jsonl";
      if (!fs::exists(path)) missing(Stage::kConsolidate, Stage::kExtract, "refined claims for " + q.query_id + "/" + vid);
      sets.emplace_back(vid, read_claims(path));
    }
    per_query.push_back(std::move(sets));
    personas.push_back(persona_for(q, false));
  }

  std::vector<Report> reports(queries_.size());
  std::vector<std::vector<std::string>> warnings(queries_.size());
  std::vector<std::size_t> packet_sizes(queries_.size(), 0);
  parallel_for(queries_.size(), config_.workers, [&](std::size_t i) {
    const auto& pq = personas[i];
    const auto pool = pool_evidence(pq.query_id, per_query[i]);
    const auto packet = rescore_and_rank(
        pool, *backends_.entailment, [&](const AtomicClaim& c) { return evidence(c); }, config_.top_k, warnings[i]);
    packet_sizes[i] = packet.ranked.size();
    auto report = generate_report(pq, packet, *backends_.chat, config_.retry_on_guard, warnings[i]);
    reports[i] = remap_ids(merge_citations(report), map);
    spdlog::info("[consolidate] query={} packet={} statements={}", pq.query_id, packet.ranked.size(),
                 reports[i].statements.size());
  });
  write_jsonl(reports, submission_path());

  StageStats s;
  s.counts["queries"] = queries_.size();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    s.counts["packet_claims"] += packet_sizes[i];
    s.counts["statements"] += reports[i].statements.size();
    for (const auto& w : warnings[i]) warn(w);
  }
  return s;
}

StageStats Pipeline::evaluate() {
  if (config_.references.empty()) {
    throw_error(ErrorKind::kValidation, "config key 'evaluate.references': required for the evaluate stage");
  }
  if (!fs::exists(submission_path())) missing(Stage::kEvaluate, Stage::kConsolidate, "the submission file");
  const auto reports = read_reports(submission_path());
  const auto references = read_references(config_.resolve(config_.references));

  std::unique_ptr<Judge> judge;
  if (config_.judge == "nli") judge = std::make_unique<NliJudge>(*backends_.nli, config_.judge_threshold);
  else judge = std::make_unique<ExactMatchJudge>();
  auto eval = evaluate_corpus(reports, references, *judge);
  write_file_atomic(config_.output_path(config_.metrics), to_json(eval).dump(2) + "\n");
  for (const auto& w : eval.warnings) warn(w);

  StageStats s;
  s.counts["queries"] = eval.queries.size();
  s.counts["excluded"] = eval.excluded_queries.size();
  evaluation_ = std::move(eval);
  return s;
}

}  // namespace craft
