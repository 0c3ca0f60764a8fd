#pragma once

// In-process HTTP server speaking the backend wire contract, answering from
// the deterministic mocks. Used to run the contract suite through the remote
// clients and to inject faults.

#include <functional>
#include <map>
#include <set>
#include <mutex>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "craft/backends/mock.hpp"
#include "craft/backends/remote.hpp"

namespace testing {

class WireServer {
 public:
  /// Return true from a fault hook to answer with `status` instead.
  using Fault = std::function<bool(const std::string& path, int& status, std::string& body)>;

  explicit WireServer(nlohmann::json fixture = nlohmann::json::object(), std::set<std::string> asr_languages = {})
      : chat_(craft::backends::ScriptedChat::from_fixture(fixture, false)),
        nli_(craft::backends::RuleNli::from_fixture(fixture)),
        asr_(std::move(asr_languages), true),
        translator_(fixture.value("translations", std::map<std::string, std::string>{}), false) {
    using nlohmann::json;
    route("/v1/chat/completions", [this](const json& req) {
      craft::backends::PromptDocument p;
      for (const auto& m : req.at("messages")) {
        if (m.at("role") == "system") p.system = m.at("content");
        if (m.at("role") == "user") p.user = m.at("content");
      }
      const std::string text = chat_->chat_complete(p, craft::backends::ChatRole::kExtract);
      return json{{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", text}}}}}}};
    });
    route("/v1/embeddings", [this](const json& req) {
      const auto inputs = req.at("input").get<std::vector<std::string>>();
      const auto vecs = req.at("modality") == "image" ? embed_.embed_image(inputs) : embed_.embed_text(inputs);
      json data = json::array();
      for (std::size_t i = 0; i < vecs.size(); ++i) data.push_back({{"index", i}, {"embedding", vecs[i].values}});
      return json{{"data", data}};
    });
    route("/v1/nli", [this](const json& req) {
      const auto p = nli_->nli_probs(req.at("premise"), req.at("hypothesis"));
      return json{{"entailment", p.entailment}, {"neutral", p.neutral}, {"contradiction", p.contradiction}};
    });
    route("/v1/entailment", [this](const json& req) {
      craft::backends::EvidenceRef e;
      const auto& ev = req.at("evidence");
      e.video_id = ev.at("video_id");
      e.transcript_window = ev.at("transcript");
      e.frame_paths = ev.at("frames").get<std::vector<std::string>>();
      return json{{"score", entail_.entailment_score(req.at("claim"), e)}};
    });
    route("/v1/translate", [this](const json& req) {
      return json{{"text", translator_.translate(req.at("text"), req.at("source_language"))}};
    });
    server_.Post("/v1/asr", [this](const httplib::Request& rq, httplib::Response& rs) {
      if (fault(rq.path, rs)) return;
      const auto req = json::parse(rq.body);
      const std::string lang = req.at("language");
      if (!asr_.accepts(lang)) {
        rs.status = 422;
        rs.set_content(json{{"error", {{"code", "unsupported_language"}, {"message", lang}}}}.dump(), "application/json");
        return;
      }
      const auto r = asr_.asr_transcribe(req.at("media_path"), lang);
      json segs = json::array();
      for (const auto& s : r.segments) segs.push_back({{"start_s", s.start_s}, {"end_s", s.end_s}, {"text", s.text}});
      rs.set_content(json{{"language", r.language}, {"segments", segs}}.dump(), "application/json");
    });

    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~WireServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

  craft::backends::BackendConfig config(double timeout_s = 5.0, int retries = 2) const {
    craft::backends::BackendConfig c;
    c.kind = craft::backends::BackendKind::kRemote;
    c.endpoint = endpoint();
    c.model_name = "contract-model";
    c.timeout_s = timeout_s;
    c.max_retries = retries;
    c.backoff_s = 0.001;
    return c;
  }

  void set_fault(Fault f) {
    std::lock_guard lock(mu_);
    fault_ = std::move(f);
  }

  int hits(const std::string& path) {
    std::lock_guard lock(mu_);
    return hits_[path];
  }

  nlohmann::json last_request(const std::string& path) {
    std::lock_guard lock(mu_);
    return last_[path];
  }

  std::string last_response_body(const std::string& path) {
    std::lock_guard lock(mu_);
    return last_body_[path];
  }

 private:
  void route(const std::string& path, std::function<nlohmann::json(const nlohmann::json&)> fn) {
    server_.Post(path, [this, path, fn](const httplib::Request& rq, httplib::Response& rs) {
      if (fault(rq.path, rs)) return;
      const auto req = nlohmann::json::parse(rq.body);
      const auto body = fn(req).dump();
      {
        std::lock_guard lock(mu_);
        last_[path] = req;
        last_body_[path] = body;
      }
      rs.set_content(body, "application/json");
    });
  }

  bool fault(const std::string& path, httplib::Response& rs) {
    Fault f;
    {
      std::lock_guard lock(mu_);
      ++hits_[path];
      f = fault_;
    }
    int status = 200;
    std::string body;
    if (f && f(path, status, body)) {
      rs.status = status;
      rs.set_content(body, "application/json");
      return true;
    }
    return false;
  }

  std::shared_ptr<craft::backends::ScriptedChat> chat_;
  std::shared_ptr<craft::backends::RuleNli> nli_;
  craft::backends::HashEmbedder embed_;
  craft::backends::OverlapEntailment entail_;
  craft::backends::FixtureAsr asr_;
  craft::backends::FixtureTranslator translator_;

  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
  std::mutex mu_;
  Fault fault_;
  std::map<std::string, int> hits_;
  std::map<std::string, nlohmann::json> last_;
  std::map<std::string, std::string> last_body_;
};

}  // namespace testing
