#include <doctest.h>

#include "craft/backends/instrumented.hpp"
#include "craft/backends/mock.hpp"
#include "craft/error.hpp"
#include "craft/text.hpp"
#include "craft/transcripts.hpp"
#include "support.hpp"

using namespace craft;
using namespace craft::backends;
using testing::TempDir;

namespace {

std::string repeat(const std::string& tok, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) s += (i ? " " : "") + tok;
  return s;
}

struct Asr {
  std::shared_ptr<CallCounts> counts = std::make_shared<CallCounts>();
  AsrPair pair;
  std::shared_ptr<Translator> translator;

  explicit Asr(std::set<std::string> primary_langs, std::map<std::string, std::string> table = {}) {
    pair.primary = instrument(std::make_shared<FixtureAsr>(std::move(primary_langs), true), "asr_primary", counts, 1);
    pair.fallback = instrument(std::make_shared<FixtureAsr>(std::set<std::string>{}, true), "asr_fallback", counts, 1);
    translator = instrument(std::make_shared<FixtureTranslator>(std::move(table), true), counts, 1);
  }
};

void write_sidecar(const std::filesystem::path& media, const std::vector<std::pair<double, std::string>>& segs) {
  nlohmann::json j;
  j["segments"] = nlohmann::json::array();
  for (const auto& [t, text] : segs) j["segments"].push_back({{"start_s", t}, {"end_s", t + 2}, {"text", text}});
  testing::write_text(media, "");
  testing::write_text(media.string() + ".asr.json", j.dump());
}

}  // namespace

TEST_CASE("type-token ratio") {
  CHECK(type_token_ratio({"a", "a", "b", "b", "c"}) == doctest::Approx(0.6));
  CHECK(type_token_ratio({"x"}) == 1.0);
  CHECK_THROWS_AS(type_token_ratio({}), Error);
}

TEST_CASE("run and trigram helpers") {
  CHECK(longest_token_run({"a", "b", "b", "b", "a"}) == 3);
  CHECK(longest_token_run({}) == 0);
  CHECK(max_trigram_share({"a", "b"}) == 0.0);
  CHECK(max_trigram_share(tokenize("a b c a b c a b c d")) == doctest::Approx(0.375));
}

TEST_CASE("twenty copies of one token are low_ttr") {
  const auto v = is_degenerate(repeat("uh", 20));
  CHECK(v.flagged);
  CHECK(v.reason == DegeneracyReason::kLowTtr);
  CHECK(v.metric_value == doctest::Approx(0.05));
}

TEST_CASE("nineteen identical tokens fall below the TTR minimum and trip the run rule") {
  const auto v = is_degenerate(repeat("uh", 19));
  CHECK(v.flagged);
  CHECK(v.reason == DegeneracyReason::kTokenRun);
  CHECK(v.metric_value == 19);
}

TEST_CASE("eight consecutive repeats inside diverse text") {
  const std::string text = "we saw the " + repeat("stop", 8) + " sign near old mill road today";
  REQUIRE(tokenize(text).size() == 17);
  const auto v = is_degenerate(text);
  CHECK(v.flagged);
  CHECK(v.reason == DegeneracyReason::kTokenRun);
  CHECK(v.metric_value == 8);
  // Seven repeats stay under the run threshold.
  CHECK_FALSE(is_degenerate("we saw the " + repeat("stop", 7) + " sign near old mill road today").flagged);
}

TEST_CASE("trigram share just below and at the threshold") {
  const auto below = is_degenerate("a b c a b c a b c d");
  CHECK_FALSE(below.flagged);
  const auto at = is_degenerate("a b c x a b c");
  CHECK(at.flagged);
  CHECK(at.reason == DegeneracyReason::kTrigramDominance);
  CHECK(at.metric_value == doctest::Approx(0.4));
}

TEST_CASE("ordinary speech is not flagged") {
  CHECK_FALSE(is_degenerate("The water level rose quickly and residents moved to higher ground.").flagged);
  CHECK_FALSE(is_degenerate("").flagged);
}

TEST_CASE("unsupported language goes straight to the fallback") {
  TempDir dir;
  write_sidecar(dir / "v.media", {{0, "Hola a todos."}});
  Asr asr({"en", "zh"});
  TranscriptCache cache(dir.path());
  const auto t = transcribe({"v", 10, "my", (dir / "v.media").string()}, asr.pair, cache);
  CHECK(t.backend_used == AsrBackendUsed::kFallback);
  CHECK(asr.counts->get("asr_primary") == 0);
  CHECK(asr.counts->get("asr_fallback") == 1);
}

TEST_CASE("supported language uses the primary") {
  TempDir dir;
  write_sidecar(dir / "v.media", {{0, "Hello there."}, {3, "Second line."}});
  Asr asr({"en"});
  TranscriptCache cache(dir.path());
  const auto t = transcribe({"v", 10, "en", (dir / "v.media").string()}, asr.pair, cache);
  CHECK(t.backend_used == AsrBackendUsed::kPrimary);
  CHECK(t.full_text == "Hello there. Second line.");
  CHECK(asr.counts->get("asr_primary") == 1);
  CHECK(asr.counts->get("asr_fallback") == 0);
}

class FailingAsr : public AsrBackend {
 public:
  const std::set<std::string>& supported_languages() const override { return langs_; }
  AsrResult asr_transcribe(const std::string&, const std::string&) override {
    throw BackendError(ErrorKind::kBackend, "asr_primary", "HTTP 503");
  }

 private:
  std::set<std::string> langs_{"en"};
};

TEST_CASE("primary failure falls back") {
  TempDir dir;
  write_sidecar(dir / "v.media", {{0, "Hello."}});
  Asr asr({"en"});
  asr.pair.primary = instrument(std::make_shared<FailingAsr>(), "asr_primary", asr.counts, 1);
  TranscriptCache cache(dir.path());
  const auto t = transcribe({"v", 10, "en", (dir / "v.media").string()}, asr.pair, cache);
  CHECK(t.backend_used == AsrBackendUsed::kFallback);
  CHECK(t.full_text == "Hello.");
  CHECK(asr.counts->get("asr_primary") == 1);
  CHECK(asr.counts->get("asr_fallback") == 1);
}

TEST_CASE("both ASR backends failing is a transcription error naming both") {
  TempDir dir;
  testing::write_text(dir / "v.media", "");
  Asr asr({"en"});
  asr.pair.primary = std::make_shared<FailingAsr>();
  TranscriptCache cache(dir.path());
  try {
    transcribe({"v", 10, "en", (dir / "v.media").string()}, asr.pair, cache);
    FAIL("expected failure");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kTranscription);
    CHECK(std::string(e.what()).find("primary ASR failed") != std::string::npos);
  }
}

TEST_CASE("transcripts are cached and reused without backend calls") {
  TempDir dir;
  write_sidecar(dir / "v.media", {{0, "Hello there."}});
  Asr asr({"en"});
  TranscriptCache cache(dir.path());
  const VideoMeta m{"v", 10, "en", (dir / "v.media").string()};
  const auto first = transcribe_and_translate(m, asr.pair, *asr.translator, cache);
  const auto calls = asr.counts->total();
  const auto second = transcribe_and_translate(m, asr.pair, *asr.translator, cache);
  CHECK(asr.counts->total() == calls);
  CHECK(to_json(first) == to_json(second));
  CHECK(second.english_text == std::optional<std::string>("Hello there."));
}

TEST_CASE("degenerate transcripts are cached with their verdict and never translated") {
  TempDir dir;
  write_sidecar(dir / "v.media", {{0, repeat("uh", 10)}});
  Asr asr({});
  TranscriptCache cache(dir.path());
  const auto t = transcribe_and_translate({"v", 10, "ne", (dir / "v.media").string()}, asr.pair, *asr.translator, cache);
  CHECK_FALSE(t.usable());
  CHECK_FALSE(t.english_text.has_value());
  CHECK(asr.counts->get("translate") == 0);
  const auto cached = cache.load("v");
  REQUIRE(cached);
  CHECK(cached->degeneracy.flagged);
  CHECK(cached->degeneracy.reason == DegeneracyReason::kTokenRun);
}

TEST_CASE("non-English transcripts are translated once") {
  TempDir dir;
  write_sidecar(dir / "v.media", {{0, "Bonjour."}});
  Asr asr({"en"}, {{"Bonjour.", "Hello."}});
  TranscriptCache cache(dir.path());
  const VideoMeta m{"v", 10, "fr", (dir / "v.media").string()};
  const auto t = transcribe_and_translate(m, asr.pair, *asr.translator, cache);
  CHECK(t.english_text == std::optional<std::string>("Hello."));
  CHECK(t.full_text == "Bonjour.");
  transcribe_and_translate(m, asr.pair, *asr.translator, cache);
  CHECK(asr.counts->get("translate") == 1);
}

TEST_CASE("translator failure leaves english_text empty with a warning") {
  Transcript t;
  t.video_id = "v";
  t.language = "fr";
  t.full_text = "Bonjour.";
  FixtureTranslator strict({}, true);
  const auto out = translate_if_needed(t, strict);
  CHECK_FALSE(out.english_text.has_value());
  CHECK(out.warnings.size() == 1);
}

TEST_CASE("transcript JSON round trip") {
  Transcript t;
  t.video_id = "v";
  t.language = "my";
  t.segments = {{0, 1.5, "a"}, {2, 3, "b"}};
  t.full_text = "a b";
  t.english_text = "A B";
  t.backend_used = AsrBackendUsed::kFallback;
  t.degeneracy = {true, DegeneracyReason::kTrigramDominance, 0.5};
  t.warnings = {"w"};
  CHECK(to_json(transcript_from_json(nlohmann::json::parse(to_json(t).dump()))) == to_json(t));
}
