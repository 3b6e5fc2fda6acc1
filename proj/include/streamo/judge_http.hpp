#pragma once

#include <chrono>
#include <cstdlib>
#include <string>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "streamo/judge.hpp"

namespace streamo {

/// Where the judge service lives. api_key_env names an environment variable;
/// the key itself never appears in config files.
struct JudgeEndpoint {
  std::string base_url;  // scheme://host:port
  std::string path = "/v1/chat/completions";
  std::string model = "judge";
  std::string api_key_env;
};

/// Chat-style JSON-over-HTTP transport. A fresh connection per call keeps the
/// backend safe under batch_judge's worker threads.
class HttpJudgeBackend : public JudgeBackend {
 public:
  explicit HttpJudgeBackend(JudgeEndpoint endpoint)
      : endpoint_(std::move(endpoint)) {
    if (endpoint_.base_url.empty())
      throw ConfigError("judge endpoint base_url is empty");
  }

  std::string respond(const JudgeRequest& request,
                      const std::string& prompt) override {
    nlohmann::json body;
    body["model"] = endpoint_.model;
    body["temperature"] = request.temperature;
    body["messages"] = nlohmann::json::array(
        {nlohmann::json{{"role", "user"}, {"content", prompt}}});

    httplib::Client client(endpoint_.base_url);
    const auto timeout =
        std::chrono::milliseconds(static_cast<long>(request.timeout_s * 1000.0));
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    if (!endpoint_.api_key_env.empty()) {
      if (const char* key = std::getenv(endpoint_.api_key_env.c_str()))
        client.set_default_headers(
            {{"Authorization", std::string("Bearer ") + key}});
    }

    const auto res =
        client.Post(endpoint_.path, body.dump(), "application/json");
    if (!res)
      throw JudgeUnavailable("connection to " + endpoint_.base_url +
                             " failed: " + httplib::to_string(res.error()));
    if (res->status != 200)
      throw JudgeUnavailable("judge returned HTTP " +
                             std::to_string(res->status));
    // A 200 with a body the protocol does not describe is not retryable.
    try {
      const auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("message").at("content")
          .get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw JudgeProtocolError(std::string("malformed judge response: ") +
                               e.what());
    }
  }

 private:
  JudgeEndpoint endpoint_;
};

}  // namespace streamo
