#pragma once

#include <cstdlib>
#include <optional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "feedsim/agent.hpp"
#include "feedsim/error.hpp"

namespace feedsim {

/// Chat backend settings, normally read from the environment:
///   FEEDSIM_CHAT_ENDPOINT     full URL of an OpenAI-compatible /chat/completions endpoint
///   FEEDSIM_CHAT_MODEL        model name
///   FEEDSIM_CHAT_API_KEY      bearer token (optional for local servers)
///   FEEDSIM_CHAT_TIMEOUT      request timeout in seconds (default 30)
///   FEEDSIM_CHAT_TEMPERATURE  sampling temperature (unset: server default)
///   FEEDSIM_JUDGE_MODE        "scripted" or "llm"; overrides the pack's judgeMode
struct BackendConfig {
  std::string endpoint;
  std::string model;
  std::string api_key;
  int timeout_seconds = 30;
  std::optional<double> temperature;
  std::optional<JudgeMode> judge_mode;

  bool live() const { return !endpoint.empty() && !model.empty(); }

  static BackendConfig from_env() {
    auto env = [](const char* k) -> std::string {
      const char* v = std::getenv(k);
      return v ? v : "";
    };
    BackendConfig c;
    c.endpoint = env("FEEDSIM_CHAT_ENDPOINT");
    c.model = env("FEEDSIM_CHAT_MODEL");
    c.api_key = env("FEEDSIM_CHAT_API_KEY");
    if (auto t = env("FEEDSIM_CHAT_TIMEOUT"); !t.empty()) c.timeout_seconds = std::max(1, std::atoi(t.c_str()));
    if (auto t = env("FEEDSIM_CHAT_TEMPERATURE"); !t.empty()) c.temperature = std::atof(t.c_str());
    if (auto m = env("FEEDSIM_JUDGE_MODE"); !m.empty()) {
      if (m == "scripted" || m == "Scripted") c.judge_mode = JudgeMode::Scripted;
      else if (m == "llm" || m == "LlmJudge") c.judge_mode = JudgeMode::LlmJudge;
      else fail(ErrorCode::BadRequest, "FEEDSIM_JUDGE_MODE must be 'scripted' or 'llm'");
    }
    return c;
  }
};

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl split_url(const std::string& url) {
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorCode::BadRequest, "endpoint must be an absolute URL: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

inline constexpr std::string_view kJudgeSystemPrompt =
    "You classify one chat message from a social media simulation. "
    "Decide whether the message satisfies the criterion. "
    "Answer with a single JSON object and nothing else: "
    "{\"value\": true or false, \"confidence\": number between 0 and 1, \"rationale\": short string}.";

/// OpenAI-compatible chat completions over HTTP(S). Stateless between calls.
class LiveBackend : public ChatBackend {
 public:
  explicit LiveBackend(BackendConfig cfg) : cfg_(std::move(cfg)), url_(split_url(cfg_.endpoint)) {}

  std::string complete(const CompletionRequest& r) override {
    nlohmann::json messages = nlohmann::json::array();
    messages.push_back({{"role", "system"}, {"content", r.system_prompt}});
    for (const auto& m : r.messages) messages.push_back({{"role", m.role}, {"content", m.content}});
    if (r.messages.empty()) messages.push_back({{"role", "user"}, {"content", "(continue)"}});
    return post(messages);
  }

  JudgeResult judge(const JudgeRequest& r) override {
    nlohmann::json messages = nlohmann::json::array(
        {{{"role", "system"}, {"content", std::string(kJudgeSystemPrompt)}},
         {{"role", "user"}, {"content", "Criterion: " + r.criterion + "\nMessage: " + r.text}}});
    const std::string text = post(messages);
    auto open = text.find('{');
    auto close = text.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open)
      fail(ErrorCode::BackendUnavailable, "judge reply is not JSON");
    try {
      auto j = nlohmann::json::parse(text.substr(open, close - open + 1));
      JudgeResult out;
      out.value = j.at("value").get<bool>();
      out.confidence = j.value("confidence", 0.5);
      out.rationale = j.value("rationale", "");
      return out;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::BackendUnavailable, std::string("judge reply unreadable: ") + e.what());
    }
  }

  const BackendConfig& config() const { return cfg_; }

 private:
  std::string post(const nlohmann::json& messages) {
    nlohmann::json body{{"model", cfg_.model}, {"messages", messages}};
    if (cfg_.temperature) body["temperature"] = *cfg_.temperature;
    httplib::Client cli(url_.origin);
    cli.set_connection_timeout(cfg_.timeout_seconds, 0);
    cli.set_read_timeout(cfg_.timeout_seconds, 0);
    cli.set_write_timeout(cfg_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    auto res = cli.Post(url_.path, headers, body.dump(), "application/json");
    if (!res) fail(ErrorCode::BackendUnavailable, "chat endpoint unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200)
      fail(ErrorCode::BackendUnavailable, "chat endpoint returned HTTP " + std::to_string(res->status),
           {{"status", res->status}});
    try {
      auto j = nlohmann::json::parse(res->body);
      std::string content = j.at("choices").at(0).at("message").at("content").get<std::string>();
      if (is_blank(content)) fail(ErrorCode::BackendUnavailable, "chat endpoint returned an empty message");
      return content;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorCode::BackendUnavailable, std::string("unexpected chat response: ") + e.what());
    }
  }

  BackendConfig cfg_;
  ParsedUrl url_;
};

}  // namespace feedsim
