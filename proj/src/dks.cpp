#include "craft/dks.hpp"

#include <algorithm>
#include <cmath>

#include "craft/error.hpp"
#include "craft/text.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace craft {

std::vector<FrameScore> score_frames(const std::vector<FrameRef>& candidates, const std::string& query_text,
                                     backends::Embedder& embed, std::size_t batch_size) {
  if (candidates.empty()) throw_error(ErrorKind::kInvalidInput, "no candidate frames to score");
  if (batch_size == 0) batch_size = candidates.size();

  const std::string query[] = {query_text};
  const auto text_vec = embed.embed_text(query);
  if (text_vec.size() != 1) {
    throw BackendError(ErrorKind::kBackendContract, "embed", "text embedding arity mismatch");
  }

  std::vector<FrameScore> out;
  out.reserve(candidates.size());
  for (std::size_t begin = 0; begin < candidates.size(); begin += batch_size) {
    const std::size_t end = std::min(begin + batch_size, candidates.size());
    std::vector<std::string> paths;
    for (std::size_t i = begin; i < end; ++i) paths.push_back(candidates[i].frame_path);
    const auto image_vecs = embed.embed_image(paths);
    if (image_vecs.size() != paths.size()) {
      throw BackendError(ErrorKind::kBackendContract, "embed", "image embedding arity mismatch");
    }
    for (std::size_t i = begin; i < end; ++i) {
      const auto& c = candidates[i];
      out.push_back({c.frame_index, c.timestamp_s, backends::cosine(image_vecs[i - begin], text_vec[0]), c.frame_path});
    }
  }
  return out;
}

namespace {

class Bisector {
 public:
  Bisector(const std::vector<FrameScore>& scores, double global_min) : s_(scores), min_(global_min) {}

  void select(std::size_t lo, std::size_t hi, std::size_t b, std::vector<FrameScore>& out) const {
    const std::size_t n = hi - lo;
    if (b == 0 || n == 0) return;
    if (n <= b) {
      out.insert(out.end(), s_.begin() + static_cast<std::ptrdiff_t>(lo), s_.begin() + static_cast<std::ptrdiff_t>(hi));
      return;
    }
    if (b == 1) {
      std::size_t best = lo;
      for (std::size_t i = lo + 1; i < hi; ++i) {
        if (s_[i].score > s_[best].score) best = i;
      }
      out.push_back(s_[best]);
      return;
    }

    const double mid_t = (s_[lo].timestamp_s + s_[hi - 1].timestamp_s) / 2.0;
    std::size_t split = lo;
    while (split < hi && s_[split].timestamp_s < mid_t) ++split;
    const std::size_t n_left = split - lo;
    const std::size_t n_right = hi - split;

    const std::size_t top = (b + 1) / 2;
    const double w_left = top_weight(lo, split, top);
    const double w_right = top_weight(split, hi, top);

    std::size_t b_left;
    if (w_left + w_right <= 0.0) {
      b_left = (b + 1) / 2;
    } else {
      const double share = std::round(static_cast<double>(b) * w_left / (w_left + w_right));
      b_left = static_cast<std::size_t>(std::clamp(share, 1.0, static_cast<double>(b - 1)));
    }
    b_left = std::min(b_left, n_left);
    std::size_t b_right = b - b_left;
    if (b_right > n_right) {
      b_right = n_right;
      b_left = b - b_right;
    }
    select(lo, split, b_left, out);
    select(split, hi, b_right, out);
  }

 private:
  double top_weight(std::size_t lo, std::size_t hi, std::size_t k) const {
    std::vector<double> shifted;
    shifted.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) shifted.push_back(s_[i].score - min_);
    const std::size_t take = std::min(k, shifted.size());
    std::partial_sort(shifted.begin(), shifted.begin() + static_cast<std::ptrdiff_t>(take), shifted.end(),
                      std::greater<>());
    double w = 0.0;
    for (std::size_t i = 0; i < take; ++i) w += shifted[i];
    return w;
  }

  const std::vector<FrameScore>& s_;
  double min_;
};

}  // namespace

KeyframeClip select_keyframes(const std::vector<FrameScore>& scores, std::size_t budget, const std::string& query_id,
                              const std::string& video_id) {
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (!(scores[i].timestamp_s > scores[i - 1].timestamp_s)) {
      throw_error(ErrorKind::kInvalidInput, "frame timestamps must be strictly increasing");
    }
  }
  KeyframeClip clip{query_id, video_id, {}, budget};
  if (scores.empty() || budget == 0) return clip;
  double global_min = scores.front().score;
  for (const auto& s : scores) global_min = std::min(global_min, s.score);
  clip.selected.reserve(std::min(budget, scores.size()));
  Bisector(scores, global_min).select(0, scores.size(), budget, clip.selected);
  return clip;
}

std::vector<FrameRef> concat_manifests(const std::vector<std::vector<FrameRef>>& per_chunk) {
  std::vector<FrameRef> out;
  for (const auto& chunk : per_chunk) {
    for (const auto& f : chunk) {
      if (!out.empty() && !(f.timestamp_s > out.back().timestamp_s)) continue;
      out.push_back({out.size(), f.timestamp_s, f.frame_path});
    }
  }
  return out;
}

nlohmann::ordered_json to_json(const KeyframeClip& clip) {
  nlohmann::ordered_json j;
  j["query_id"] = clip.query_id;
  j["video_id"] = clip.video_id;
  j["budget"] = clip.budget;
  auto sel = nlohmann::ordered_json::array();
  for (const auto& f : clip.selected) {
    nlohmann::ordered_json fj;
    fj["frame_index"] = f.frame_index;
    fj["timestamp_s"] = f.timestamp_s;
    fj["score"] = f.score;
    fj["frame_path"] = f.frame_path;
    sel.push_back(std::move(fj));
  }
  j["selected"] = std::move(sel);
  return j;
}

KeyframeClip clip_from_json(const json& j) {
  KeyframeClip clip;
  clip.query_id = j.at("query_id").get<std::string>();
  clip.video_id = j.at("video_id").get<std::string>();
  clip.budget = j.at("budget").get<std::size_t>();
  for (const auto& f : j.at("selected")) {
    clip.selected.push_back({f.at("frame_index").get<std::size_t>(), f.at("timestamp_s").get<double>(),
                             f.at("score").get<double>(), f.at("frame_path").get<std::string>()});
  }
  return clip;
}

fs::path ClipStore::path_for(const std::string& query_id, const std::string& video_id) const {
  return root_ / "dks" / query_id / (video_id + ".json");
}

std::optional<KeyframeClip> ClipStore::load(const std::string& query_id, const std::string& video_id) const {
  const auto p = path_for(query_id, video_id);
  if (!fs::exists(p)) return std::nullopt;
  return clip_from_json(read_json_file(p));
}

void ClipStore::store(const KeyframeClip& clip) const {
  write_file_atomic(path_for(clip.query_id, clip.video_id), to_json(clip).dump(2) + "\n");
}

ChunkStore make_chunk_store(const std::vector<VideoChunk>& chunks) {
  ChunkStore store;
  for (const auto& c : chunks) store[c.parent_video_id].push_back(c);
  for (auto& [_, list] : store) {
    std::sort(list.begin(), list.end(), [](const VideoChunk& a, const VideoChunk& b) { return a.start_s < b.start_s; });
  }
  return store;
}

VisualInput resolve_visual_input(const std::string& query_id, const std::string& video_id, const ClipStore& clips,
                                 const ChunkStore& chunks) {
  VisualInput input;
  if (auto clip = clips.load(query_id, video_id)) {
    input.clip = std::move(clip);
  }
  if (const auto it = chunks.find(video_id); it != chunks.end()) input.chunks = it->second;
  if (!input.clip && input.chunks.empty()) {
    throw_error(ErrorKind::kLookup, "no keyframe clip or chunks for video " + video_id + " (query " + query_id + ")");
  }
  return input;
}

}  // namespace craft
