#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "craft/backends/backend.hpp"
#include "craft/ingest.hpp"

namespace craft {

struct FrameScore {
  std::size_t frame_index = 0;
  double timestamp_s = 0.0;
  double score = 0.0;
  std::string frame_path;

  bool operator==(const FrameScore&) const = default;
};

struct KeyframeClip {
  std::string query_id;
  std::string video_id;
  std::vector<FrameScore> selected;
  std::size_t budget = 0;

  bool operator==(const KeyframeClip&) const = default;
};

/// Cosine similarity of every candidate frame's image embedding to the query's
/// text embedding, in candidate order. Images are embedded in batches.
std::vector<FrameScore> score_frames(const std::vector<FrameRef>& candidates, const std::string& query_text,
                                     backends::Embedder& embed, std::size_t batch_size = 64);

/// Budgeted keyframe selection by recursive temporal bisection.
///
/// A segment with more candidates than budget b is split at the midpoint of
/// its first and last timestamps. Each half is weighted by the sum of its top
/// ceil(b/2) scores after subtracting the global minimum score, and gets
/// round(b * w_half / (w_L + w_R)) frames clamped to [1, b-1] (ceil(b/2) for
/// the left half when both weights are zero), then capped by the half's size
/// with the excess moved to the other half. b = 1 picks the best frame, the
/// earliest on ties.
///
/// `scores` must be in strictly increasing timestamp order. The result has
/// min(budget, |scores|) frames in temporal order, and for b >= 2 each half of
/// the full time range contributes at least one frame.
KeyframeClip select_keyframes(const std::vector<FrameScore>& scores, std::size_t budget,
                              const std::string& query_id = {}, const std::string& video_id = {});

/// Per-chunk manifests of one video joined in time order with frame indices
/// renumbered across the whole video.
std::vector<FrameRef> concat_manifests(const std::vector<std::vector<FrameRef>>& per_chunk);

nlohmann::ordered_json to_json(const KeyframeClip& clip);
KeyframeClip clip_from_json(const nlohmann::json& j);

/// `<cache>/dks/<query_id>/<video_id>.json`
class ClipStore {
 public:
  explicit ClipStore(std::filesystem::path cache_root) : root_(std::move(cache_root)) {}

  std::filesystem::path path_for(const std::string& query_id, const std::string& video_id) const;
  std::optional<KeyframeClip> load(const std::string& query_id, const std::string& video_id) const;
  void store(const KeyframeClip& clip) const;

 private:
  std::filesystem::path root_;
};

/// Chunks of each parent video, in time order.
using ChunkStore = std::map<std::string, std::vector<VideoChunk>>;

ChunkStore make_chunk_store(const std::vector<VideoChunk>& chunks);

struct VisualInput {
  std::optional<KeyframeClip> clip;
  std::vector<VideoChunk> chunks;

  bool is_clip() const { return clip.has_value(); }
};

/// The DKS clip for (query, video) when one exists, else the video's raw
/// chunks. Throws kLookup when the video is in neither store.
VisualInput resolve_visual_input(const std::string& query_id, const std::string& video_id, const ClipStore& clips,
                                 const ChunkStore& chunks);

}  // namespace craft
