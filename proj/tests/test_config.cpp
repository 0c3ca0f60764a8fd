#include <doctest.h>

#include "craft/config.hpp"
#include "craft/error.hpp"
#include "support.hpp"

using namespace craft;
using testing::TempDir;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::kIo;
}

std::string message_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST_CASE("an empty config file yields the documented defaults") {
  TempDir dir;
  testing::write_text(dir / "empty.json", "");
  const auto c = load_config(dir / "empty.json");
  CHECK(c.chunk_max_s == 120.0);
  CHECK(c.degeneracy.ttr == 0.18);
  CHECK(c.degeneracy.min_tokens_for_ttr == 20);
  CHECK(c.degeneracy.max_run == 8);
  CHECK(c.degeneracy.trigram_share == 0.40);
  CHECK(c.critic.max_rounds == 4);
  CHECK(c.critic.unsupported == 0.05);
  CHECK(c.critic.weak == 0.5);
  CHECK(c.critic.contradiction == 0.5);
  CHECK(c.top_k == 50);
  CHECK(c.retry_on_guard);
  CHECK(c.backend("chat").kind == backends::BackendKind::kMock);
  CHECK(c.base_dir == dir.path());
  CHECK(to_json(c) == to_json(load_config("")));

  testing::write_text(dir / "braces.json", "{}");
  CHECK(to_json(load_config(dir / "braces.json")) == to_json(c));
}

TEST_CASE("threshold ordering is validated") {
  TempDir dir;
  testing::write_text(dir / "bad.json", R"({"critic": {"unsupported_threshold": 0.6, "weak_threshold": 0.5}})");
  CHECK(kind_of([&] { load_config(dir / "bad.json"); }) == ErrorKind::kValidation);
  CHECK(message_of([&] { load_config(dir / "bad.json"); }).find("critic.unsupported_threshold") != std::string::npos);
  CHECK(kind_of([] { load_config("", {"critic.weak_threshold=1.5"}); }) == ErrorKind::kValidation);
  CHECK(kind_of([] { load_config("", {"critic.max_rounds=0"}); }) == ErrorKind::kValidation);
  CHECK(kind_of([] { load_config("", {"dks.budget=0"}); }) == ErrorKind::kValidation);
  CHECK(kind_of([] { load_config("", {"evaluate.judge=llm"}); }) == ErrorKind::kValidation);
}

TEST_CASE("unknown keys and wrong types name the key") {
  TempDir dir;
  testing::write_text(dir / "typo.json", R"({"critic": {"max_round": 2}})");
  CHECK(message_of([&] { load_config(dir / "typo.json"); }).find("critic.max_round") != std::string::npos);
  testing::write_text(dir / "type.json", R"({"dks": {"budget": "many"}})");
  CHECK(message_of([&] { load_config(dir / "type.json"); }).find("dks.budget") != std::string::npos);
  testing::write_text(dir / "junk.json", "{not json");
  CHECK(kind_of([&] { load_config(dir / "junk.json"); }) == ErrorKind::kValidation);
  CHECK(kind_of([] { load_config("", {"nokey"}); }) == ErrorKind::kValidation);
  CHECK(kind_of([] { load_config("", {"critic=3"}); }) == ErrorKind::kValidation);
  CHECK(kind_of([] { load_config("/nonexistent/config.json"); }) == ErrorKind::kIo);
}

TEST_CASE("overrides win over file values and accept dashed keys") {
  TempDir dir;
  testing::write_text(dir / "c.json", R"({"critic": {"max_rounds": 3}, "dks": {"fps": 2.0}})");
  const auto c = load_config(dir / "c.json", {"critic.max-rounds=2", "consolidate.top_k=7",
                                              "backends.asr_primary.supported_languages=en,zh"});
  CHECK(c.critic.max_rounds == 2);
  CHECK(c.dks_fps == 2.0);
  CHECK(c.top_k == 7);
  CHECK(c.backend("asr_primary").supported_languages == std::vector<std::string>{"en", "zh"});
}

TEST_CASE("remote backends need an endpoint") {
  CHECK(kind_of([] { load_config("", {"backends.nli.kind=remote"}); }) == ErrorKind::kValidation);
  const auto c = load_config("", {"backends.nli.kind=remote", "backends.nli.endpoint=http://localhost:9"});
  CHECK(c.backend("nli").kind == backends::BackendKind::kRemote);
  auto all = load_config("");
  CHECK(kind_of([&] { set_backend_mode(all, backends::BackendKind::kRemote); }) == ErrorKind::kValidation);
}

TEST_CASE("serialization round trip") {
  TempDir dir;
  testing::write_text(dir / "c.json", R"({"corpus": "x.jsonl", "critic": {"weak_threshold": 0.6}, "backends": {"chat": {"model_name": "m"}}})");
  const auto c = load_config(dir / "c.json");
  const auto j = to_json(c);
  CHECK(j["corpus"] == "x.jsonl");
  CHECK(j["critic"]["weak_threshold"] == 0.6);
  CHECK(j["backends"]["chat"]["model_name"] == "m");
  CHECK(to_json(config_from_json(nlohmann::json::parse(j.dump()))) == j);
  // Same key structure as the defaults.
  std::function<void(const nlohmann::ordered_json&, const nlohmann::ordered_json&)> same_keys =
      [&](const nlohmann::ordered_json& x, const nlohmann::ordered_json& y) {
        REQUIRE(x.is_object() == y.is_object());
        if (!x.is_object()) return;
        REQUIRE(x.size() == y.size());
        for (const auto& [k, v] : x.items()) {
          REQUIRE(y.contains(k));
          same_keys(v, y[k]);
        }
      };
  same_keys(j, default_config_json());
}

TEST_CASE("relative paths resolve against the config directory") {
  TempDir dir;
  testing::write_text(dir / "sub" / "c.json", R"({"cache_dir": "cache", "output": {"submission": "/abs/out.jsonl"}})");
  const auto c = load_config(dir / "sub" / "c.json");
  CHECK(c.resolve("corpus.jsonl") == dir / "sub" / "corpus.jsonl");
  CHECK(c.cache_root() == dir / "sub" / "cache");
  CHECK(c.output_path(c.manifest) == dir / "sub" / "cache" / "run_manifest.json");
  CHECK(c.output_path(c.submission) == std::filesystem::path("/abs/out.jsonl"));
}

TEST_CASE("the digest ignores the cache location but not the settings") {
  const auto a = load_config("", {"cache_dir=/tmp/a"});
  const auto b = load_config("", {"cache_dir=/tmp/b"});
  const auto c = load_config("", {"consolidate.top_k=5"});
  CHECK(config_digest(a) == config_digest(b));
  CHECK(config_digest(a) != config_digest(c));
  CHECK(config_digest(a).size() == 16);
}
