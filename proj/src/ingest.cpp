#include "craft/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sys/wait.h>

#include <nlohmann/json.hpp>

#include "craft/error.hpp"
#include "craft/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace craft {

std::string make_chunk_id(const std::string& parent_id, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "#%03zu", index);
  return parent_id + buf;
}

std::vector<VideoChunk> chunk_video(const VideoMeta& meta, double max_chunk_s) {
  if (!(meta.duration_s > 0.0) || !std::isfinite(meta.duration_s)) {
    throw_error(ErrorKind::kInvalidInput, "video " + meta.video_id + " has non-positive duration");
  }
  if (!(max_chunk_s > 0.0)) throw_error(ErrorKind::kInvalidInput, "max_chunk_s must be positive");

  const auto count = static_cast<std::size_t>(std::ceil(meta.duration_s / max_chunk_s));
  std::vector<VideoChunk> chunks;
  chunks.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double start = static_cast<double>(i) * max_chunk_s;
    const double end = std::min(static_cast<double>(i + 1) * max_chunk_s, meta.duration_s);
    if (!(end > start)) break;
    chunks.push_back({make_chunk_id(meta.video_id, i), meta.video_id, start, end});
  }
  return chunks;
}

bool looks_like_chunk_id(const std::string& id) {
  const auto hash = id.rfind('#');
  if (hash == std::string::npos || hash == 0 || id.size() - hash - 1 < 3) return false;
  return std::all_of(id.begin() + static_cast<std::ptrdiff_t>(hash) + 1, id.end(),
                     [](unsigned char c) { return std::isdigit(c) != 0; });
}

void ChunkMap::add(const VideoChunk& chunk) { add(chunk.chunk_id, chunk.parent_video_id); }

void ChunkMap::add(const std::string& chunk_id, const std::string& parent_id) {
  const auto [it, inserted] = entries_.emplace(chunk_id, parent_id);
  if (!inserted && it->second != parent_id) {
    throw_error(ErrorKind::kValidation, "chunk " + chunk_id + " mapped to both " + it->second + " and " + parent_id);
  }
  parents_.insert(parent_id);
}

std::string ChunkMap::parent_of(const std::string& id) const {
  if (const auto it = entries_.find(id); it != entries_.end()) return it->second;
  if (looks_like_chunk_id(id)) throw_error(ErrorKind::kLookup, "unknown chunk id " + id);
  return id;
}

std::string parent_of(const std::string& chunk_id, const ChunkMap& map) { return map.parent_of(chunk_id); }

std::string expand_command(const std::string& tmpl, const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string::npos) {
        const auto key = tmpl.substr(i + 1, close - i - 1);
        if (const auto it = values.find(key); it != values.end()) {
          out += shell_quote(it->second);
          i = close + 1;
          continue;
        }
      }
    }
    out += tmpl[i++];
  }
  return out;
}

FrameExtractor::FrameExtractor(std::string command_template, fs::path cache_root)
    : command_template_(std::move(command_template)), cache_root_(std::move(cache_root)) {}

fs::path FrameExtractor::manifest_path(const std::string& chunk_id) const {
  return cache_root_ / "frames" / (chunk_id + ".jsonl");
}

std::vector<FrameRef> FrameExtractor::extract(const VideoChunk& chunk, const std::string& media_path,
                                              double rate_fps) const {
  if (!(rate_fps > 0.0)) throw_error(ErrorKind::kInvalidInput, "frame rate must be positive");
  const auto manifest = manifest_path(chunk.chunk_id);
  if (fs::exists(manifest)) return read_frame_manifest(manifest);

  if (command_template_.empty()) throw_error(ErrorKind::kIngest, "ingest.frame_cmd is not configured");
  if (!fs::exists(media_path)) throw_error(ErrorKind::kIo, "media file not found: " + media_path);

  const fs::path outdir = cache_root_ / "frames" / chunk.chunk_id;
  fs::remove_all(outdir);
  fs::create_directories(outdir);

  char fps_buf[32];
  std::snprintf(fps_buf, sizeof fps_buf, "%g", rate_fps);
  const std::string cmd = expand_command(command_template_, {
                                                                {"input", media_path},
                                                                {"start", format_fixed(chunk.start_s, 3)},
                                                                {"end", format_fixed(chunk.end_s, 3)},
                                                                {"fps", fps_buf},
                                                                {"outdir", outdir.string()},
                                                            });
  ++commands_run_;
  std::string diagnostics;
  FILE* pipe = ::popen(("(" + cmd + ") 2>&1").c_str(), "r");
  if (pipe == nullptr) throw_error(ErrorKind::kIngest, "cannot spawn frame command for " + chunk.chunk_id);
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) diagnostics += buf;
  const int status = ::pclose(pipe);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw_error(ErrorKind::kIngest, "frame command failed for " + chunk.chunk_id + ": " + trim(diagnostics));
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(outdir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());

  std::vector<FrameRef> frames;
  for (std::size_t i = 0; i < files.size(); ++i) {
    const double t = chunk.start_s + static_cast<double>(i) / rate_fps;
    if (t >= chunk.end_s) break;
    frames.push_back({i, t, files[i].string()});
  }
  const double expected = std::ceil(chunk.duration() * rate_fps);
  if (std::abs(static_cast<double>(frames.size()) - expected) > 1.0) {
    throw_error(ErrorKind::kIngest, "frame command for " + chunk.chunk_id + " produced " +
                                        std::to_string(frames.size()) + " frames, expected about " +
                                        format_fixed(expected, 0));
  }
  write_frame_manifest(manifest, frames);
  return frames;
}

std::vector<FrameRef> read_frame_manifest(const fs::path& path) {
  std::vector<FrameRef> frames;
  for (const auto& row : read_jsonl_file(path)) {
    frames.push_back({row.at("frame_index").get<std::size_t>(), row.at("timestamp_s").get<double>(),
                      row.at("frame_path").get<std::string>()});
  }
  return frames;
}

void write_frame_manifest(const fs::path& path, const std::vector<FrameRef>& frames) {
  std::string out;
  for (const auto& f : frames) {
    nlohmann::ordered_json row;
    row["frame_index"] = f.frame_index;
    row["timestamp_s"] = f.timestamp_s;
    row["frame_path"] = f.frame_path;
    out += row.dump() + "\n";
  }
  write_file_atomic(path, out);
}

std::vector<VideoMeta> read_corpus_manifest(const fs::path& path) {
  std::vector<VideoMeta> videos;
  std::set<std::string> seen;
  for (const auto& row : read_jsonl_file(path)) {
    VideoMeta meta;
    try {
      meta.video_id = row.at("video_id").get<std::string>();
      meta.duration_s = row.at("duration_s").get<double>();
      meta.language = row.value("language", std::string("und"));
      meta.media_path = row.value("media_path", std::string());
    } catch (const json::exception& e) {
      throw_error(ErrorKind::kValidation, path.string() + ": " + e.what());
    }
    if (meta.duration_s < 0.0) throw_error(ErrorKind::kValidation, "negative duration for " + meta.video_id);
    if (!seen.insert(meta.video_id).second) throw_error(ErrorKind::kValidation, "duplicate video_id " + meta.video_id);
    videos.push_back(std::move(meta));
  }
  return videos;
}

void write_chunk_map(const fs::path& path, const std::vector<VideoChunk>& chunks) {
  std::string out;
  for (const auto& c : chunks) {
    nlohmann::ordered_json row;
    row["chunk_id"] = c.chunk_id;
    row["parent_video_id"] = c.parent_video_id;
    row["start_s"] = c.start_s;
    row["end_s"] = c.end_s;
    out += row.dump() + "\n";
  }
  write_file_atomic(path, out);
}

std::vector<VideoChunk> read_chunks(const fs::path& path) {
  std::vector<VideoChunk> chunks;
  for (const auto& row : read_jsonl_file(path)) {
    chunks.push_back({row.at("chunk_id").get<std::string>(), row.at("parent_video_id").get<std::string>(),
                      row.at("start_s").get<double>(), row.at("end_s").get<double>()});
  }
  return chunks;
}

}  // namespace craft
