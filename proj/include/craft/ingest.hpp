#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace craft {

struct VideoMeta {
  std::string video_id;
  double duration_s = 0.0;
  std::string language = "und";
  std::string media_path;
};

struct VideoChunk {
  std::string chunk_id;
  std::string parent_video_id;
  double start_s = 0.0;
  double end_s = 0.0;

  double duration() const { return end_s - start_s; }
  bool operator==(const VideoChunk&) const = default;
};

inline constexpr double kDefaultMaxChunkSeconds = 120.0;

/// `<parent_id>#<index>`, index zero-padded to three digits.
std::string make_chunk_id(const std::string& parent_id, std::size_t index);

/// Greedy full-length chunks with a shorter final remainder.
/// Throws kInvalidInput for a non-positive duration or max_chunk_s.
std::vector<VideoChunk> chunk_video(const VideoMeta& meta, double max_chunk_s = kDefaultMaxChunkSeconds);

/// chunk_id -> parent_video_id. A chunk can only ever have one parent.
class ChunkMap {
 public:
  void add(const VideoChunk& chunk);
  void add(const std::string& chunk_id, const std::string& parent_id);

  /// Parent for a known chunk id. Ids that are not chunk-formatted pass
  /// through unchanged; an unknown chunk-formatted id is a lookup error.
  std::string parent_of(const std::string& id) const;

  bool contains_chunk(const std::string& chunk_id) const { return entries_.count(chunk_id) != 0; }
  bool is_parent(const std::string& id) const { return parents_.count(id) != 0; }
  const std::map<std::string, std::string>& entries() const { return entries_; }
  const std::set<std::string>& parents() const { return parents_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::string> entries_;
  std::set<std::string> parents_;
};

/// True for ids shaped like make_chunk_id() output.
bool looks_like_chunk_id(const std::string& id);

std::string parent_of(const std::string& chunk_id, const ChunkMap& map);

struct FrameRef {
  std::size_t frame_index = 0;
  double timestamp_s = 0.0;
  std::string frame_path;

  bool operator==(const FrameRef&) const = default;
};

/// Runs an external frame-extraction command per chunk. The template may use
/// {input} {start} {end} {fps} {outdir}; each frame the command writes into
/// {outdir} becomes one manifest entry, in filename order, at
/// start + i / fps.
class FrameExtractor {
 public:
  FrameExtractor(std::string command_template, std::filesystem::path cache_root);

  /// Cached at `<cache>/frames/<chunk_id>.jsonl`; a cache hit does not run
  /// the command.
  std::vector<FrameRef> extract(const VideoChunk& chunk, const std::string& media_path, double rate_fps) const;

  std::filesystem::path manifest_path(const std::string& chunk_id) const;
  std::size_t commands_run() const { return commands_run_.load(); }

 private:
  std::string command_template_;
  std::filesystem::path cache_root_;
  mutable std::atomic<std::size_t> commands_run_{0};
};

/// Expands `{name}` placeholders; values are shell-quoted.
std::string expand_command(const std::string& tmpl, const std::map<std::string, std::string>& values);

std::vector<FrameRef> read_frame_manifest(const std::filesystem::path& path);
void write_frame_manifest(const std::filesystem::path& path, const std::vector<FrameRef>& frames);

/// One JSON object per line: video_id, duration_s, language, media_path.
/// Rejects negative durations and duplicate ids.
std::vector<VideoMeta> read_corpus_manifest(const std::filesystem::path& path);

void write_chunk_map(const std::filesystem::path& path, const std::vector<VideoChunk>& chunks);
std::vector<VideoChunk> read_chunks(const std::filesystem::path& path);

}  // namespace craft
