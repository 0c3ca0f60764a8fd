#include "craft/config.hpp"

#include <algorithm>

#include "craft/error.hpp"
#include "craft/text.hpp"

using nlohmann::json;
using nlohmann::ordered_json;

namespace craft {

namespace {

ordered_json backend_json(const backends::BackendConfig& b) {
  ordered_json j;
  j["kind"] = b.kind == backends::BackendKind::kRemote ? "remote" : "mock";
  j["endpoint"] = b.endpoint;
  j["model_name"] = b.model_name;
  j["timeout_s"] = b.timeout_s;
  j["max_retries"] = b.max_retries;
  j["backoff_s"] = b.backoff_s;
  j["script"] = b.script_path;
  j["strict"] = b.strict;
  j["supported_languages"] = b.supported_languages;
  return j;
}

[[noreturn]] void invalid(const std::string& key, const std::string& why) {
  throw_error(ErrorKind::kValidation, "config key '" + key + "': " + why);
}

bool same_type(const json& def, const json& v) {
  if (def.is_number_float()) return v.is_number();
  if (def.is_number_unsigned()) return v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
  if (def.is_number_integer()) return v.is_number_integer();
  return def.type() == v.type();
}

// Overlays `src` onto `dst`, accepting only keys and types present in `dst`.
void merge_checked(json& dst, const json& src, const std::string& prefix) {
  if (!src.is_object()) invalid(prefix.empty() ? "<root>" : prefix, "expected an object");
  for (const auto& [key, value] : src.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    if (!dst.contains(key)) invalid(name, "unknown key");
    auto& slot = dst[key];
    if (slot.is_object()) {
      merge_checked(slot, value, name);
    } else if (!same_type(slot, value)) {
      invalid(name, "expected " + std::string(slot.type_name()) + ", got " + value.type_name());
    } else {
      slot = value;
    }
  }
}

std::string normalize_key(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  return key;
}

double number(const json& j, const char* key) { return j.at(key).get<double>(); }

}  // namespace

PipelineConfig::PipelineConfig() {
  for (const auto& role : kBackendRoles) backends[role] = {};
}

std::filesystem::path PipelineConfig::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : base_dir / p;
}

std::filesystem::path PipelineConfig::output_path(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() ? p : cache_root() / p;
}

const backends::BackendConfig& PipelineConfig::backend(const std::string& role) const {
  const auto it = backends.find(role);
  if (it == backends.end()) throw_error(ErrorKind::kLookup, "no backend configured for role " + role);
  return it->second;
}

ordered_json default_config_json() { return to_json(PipelineConfig{}); }

ordered_json to_json(const PipelineConfig& c) {
  ordered_json j;
  j["corpus"] = c.corpus;
  j["queries"] = c.queries;
  j["cache_dir"] = c.cache_dir;
  j["output"] = {{"submission", c.submission}, {"manifest", c.manifest}};
  j["ingest"] = {{"chunk_max_s", c.chunk_max_s}, {"frame_cmd", c.frame_cmd}};
  j["transcripts"] = {{"ttr_threshold", c.degeneracy.ttr},
                      {"ttr_min_tokens", c.degeneracy.min_tokens_for_ttr},
                      {"max_token_run", c.degeneracy.max_run},
                      {"trigram_share", c.degeneracy.trigram_share}};
  j["dks"] = {{"fps", c.dks_fps}, {"budget", c.dks_budget}, {"batch_size", c.dks_batch_size}};
  j["extract"] = {{"persona_fail_open", c.persona_fail_open}};
  j["critic"] = {{"max_rounds", c.critic.max_rounds},
                 {"unsupported_threshold", c.critic.unsupported},
                 {"weak_threshold", c.critic.weak},
                 {"contradiction_threshold", c.critic.contradiction}};
  j["consolidate"] = {{"top_k", c.top_k}, {"retry_on_guard", c.retry_on_guard}};
  j["evaluate"] = {{"references", c.references},
                   {"judge", c.judge},
                   {"judge_threshold", c.judge_threshold},
                   {"metrics", c.metrics}};
  ordered_json b;
  b["max_concurrency"] = c.max_concurrency;
  for (const auto& role : kBackendRoles) b[role] = backend_json(c.backend(role));
  j["backends"] = std::move(b);
  j["parallelism"] = {{"workers", c.workers}};
  j["run"] = {{"record_timings", c.record_timings}};
  return j;
}

void apply_override(json& tree, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw_error(ErrorKind::kValidation, "override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = normalize_key(trim(assignment.substr(0, eq)));
  const std::string raw = trim(assignment.substr(eq + 1));

  json* node = &tree;
  std::size_t pos = 0;
  std::string leaf;
  while (true) {
    const auto dot = key.find('.', pos);
    leaf = key.substr(pos, dot == std::string::npos ? std::string::npos : dot - pos);
    if (!node->is_object() || !node->contains(leaf)) invalid(key, "unknown key");
    if (dot == std::string::npos) break;
    node = &(*node)[leaf];
    pos = dot + 1;
  }
  json& slot = (*node)[leaf];
  if (slot.is_object()) invalid(key, "is a section, not a value");

  json value;
  if (slot.is_string()) {
    value = raw;
  } else if (slot.is_array()) {
    // JSON array, or a comma-separated list of strings.
    value = json::parse(raw, nullptr, false);
    if (!value.is_array()) {
      value = json::array();
      std::size_t p = 0;
      while (p <= raw.size()) {
        const auto comma = raw.find(',', p);
        const auto item = trim(raw.substr(p, comma == std::string::npos ? std::string::npos : comma - p));
        if (!item.empty()) value.push_back(item);
        p = comma == std::string::npos ? raw.size() + 1 : comma + 1;
      }
    }
  } else {
    value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) invalid(key, "cannot parse value '" + raw + "'");
  }
  if (!same_type(slot, value)) invalid(key, "expected " + std::string(slot.type_name()) + ", got '" + raw + "'");
  slot = std::move(value);
}

PipelineConfig config_from_json(const json& file_values, const std::vector<std::string>& overrides) {
  json tree = json::parse(default_config_json().dump());
  if (!file_values.is_null()) merge_checked(tree, file_values, "");
  for (const auto& o : overrides) apply_override(tree, o);

  PipelineConfig c;
  c.corpus = tree["corpus"];
  c.queries = tree["queries"];
  c.cache_dir = tree["cache_dir"];
  c.submission = tree["output"]["submission"];
  c.manifest = tree["output"]["manifest"];
  c.chunk_max_s = number(tree["ingest"], "chunk_max_s");
  c.frame_cmd = tree["ingest"]["frame_cmd"];
  const auto& t = tree["transcripts"];
  c.degeneracy.ttr = number(t, "ttr_threshold");
  c.degeneracy.min_tokens_for_ttr = t["ttr_min_tokens"];
  c.degeneracy.max_run = t["max_token_run"];
  c.degeneracy.trigram_share = number(t, "trigram_share");
  c.dks_fps = number(tree["dks"], "fps");
  c.dks_budget = tree["dks"]["budget"];
  c.dks_batch_size = tree["dks"]["batch_size"];
  c.persona_fail_open = tree["extract"]["persona_fail_open"];
  const auto& cr = tree["critic"];
  c.critic.max_rounds = cr["max_rounds"];
  c.critic.unsupported = number(cr, "unsupported_threshold");
  c.critic.weak = number(cr, "weak_threshold");
  c.critic.contradiction = number(cr, "contradiction_threshold");
  c.top_k = tree["consolidate"]["top_k"];
  c.retry_on_guard = tree["consolidate"]["retry_on_guard"];
  const auto& ev = tree["evaluate"];
  c.references = ev["references"];
  c.judge = ev["judge"];
  c.judge_threshold = number(ev, "judge_threshold");
  c.metrics = ev["metrics"];
  c.max_concurrency = tree["backends"]["max_concurrency"];
  for (const auto& role : kBackendRoles) {
    const auto& bj = tree["backends"][role];
    backends::BackendConfig b;
    const std::string kind = bj["kind"];
    if (kind == "mock") {
      b.kind = backends::BackendKind::kMock;
    } else if (kind == "remote") {
      b.kind = backends::BackendKind::kRemote;
    } else {
      invalid("backends." + role + ".kind", "expected 'mock' or 'remote', got '" + kind + "'");
    }
    b.endpoint = bj["endpoint"];
    b.model_name = bj["model_name"];
    b.timeout_s = number(bj, "timeout_s");
    b.max_retries = bj["max_retries"];
    b.backoff_s = number(bj, "backoff_s");
    b.script_path = bj["script"];
    b.strict = bj["strict"];
    b.supported_languages = bj["supported_languages"].get<std::vector<std::string>>();
    c.backends[role] = std::move(b);
  }
  c.workers = tree["parallelism"]["workers"];
  c.record_timings = tree["run"]["record_timings"];
  validate(c);
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides) {
  json file_values;
  std::filesystem::path base = ".";
  if (!path.empty()) {
    if (!std::filesystem::exists(path)) throw_error(ErrorKind::kIo, "config file not found: " + path.string());
    const std::string text = read_file(path);
    if (!trim(text).empty()) {
      file_values = json::parse(text, nullptr, false);
      if (file_values.is_discarded()) throw_error(ErrorKind::kValidation, "config file is not valid JSON: " + path.string());
    }
    base = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
  }
  auto c = config_from_json(file_values, overrides);
  c.base_dir = base;
  return c;
}

void set_backend_mode(PipelineConfig& config, backends::BackendKind kind) {
  for (auto& [role, b] : config.backends) b.kind = kind;
  validate(config);
}

void validate(const PipelineConfig& c) {
  const auto unit = [](const std::string& key, double v) {
    if (!(v >= 0.0 && v <= 1.0)) invalid(key, "must be in [0,1], got " + format_fixed(v, 4));
  };
  unit("critic.unsupported_threshold", c.critic.unsupported);
  unit("critic.weak_threshold", c.critic.weak);
  unit("critic.contradiction_threshold", c.critic.contradiction);
  unit("transcripts.ttr_threshold", c.degeneracy.ttr);
  unit("transcripts.trigram_share", c.degeneracy.trigram_share);
  unit("evaluate.judge_threshold", c.judge_threshold);
  if (!(c.critic.unsupported > 0.0)) invalid("critic.unsupported_threshold", "must be greater than 0");
  if (!(c.critic.unsupported < c.critic.weak)) {
    invalid("critic.unsupported_threshold", "must be below critic.weak_threshold (" +
                                                format_fixed(c.critic.unsupported, 4) + " >= " +
                                                format_fixed(c.critic.weak, 4) + ")");
  }
  if (c.critic.max_rounds < 1) invalid("critic.max_rounds", "must be at least 1");
  if (!(c.chunk_max_s > 0.0)) invalid("ingest.chunk_max_s", "must be positive");
  if (!(c.dks_fps > 0.0)) invalid("dks.fps", "must be positive");
  if (c.dks_budget < 1) invalid("dks.budget", "must be positive");
  if (c.dks_batch_size < 1) invalid("dks.batch_size", "must be positive");
  if (c.top_k < 1) invalid("consolidate.top_k", "must be positive");
  if (c.degeneracy.min_tokens_for_ttr < 1) invalid("transcripts.ttr_min_tokens", "must be positive");
  if (c.degeneracy.max_run < 2) invalid("transcripts.max_token_run", "must be at least 2");
  if (c.workers < 1) invalid("parallelism.workers", "must be positive");
  if (c.max_concurrency < 1) invalid("backends.max_concurrency", "must be positive");
  if (c.judge != "exact" && c.judge != "nli") invalid("evaluate.judge", "expected 'exact' or 'nli'");
  for (const auto& [role, b] : c.backends) {
    if (b.kind == backends::BackendKind::kRemote && b.endpoint.empty()) {
      invalid("backends." + role + ".endpoint", "required for a remote backend");
    }
    if (!(b.timeout_s > 0.0)) invalid("backends." + role + ".timeout_s", "must be positive");
    if (b.max_retries < 0) invalid("backends." + role + ".max_retries", "must not be negative");
    if (b.backoff_s < 0.0) invalid("backends." + role + ".backoff_s", "must not be negative");
  }
}

std::string config_digest(const PipelineConfig& config) {
  auto j = to_json(config);
  j.erase("cache_dir");
  return hex64(fnv1a64(j.dump()));
}

}  // namespace craft
