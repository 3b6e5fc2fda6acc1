#pragma once

#include <memory>
#include <utility>

#include "streamo/config.hpp"
#include "streamo/judge.hpp"
#include "streamo/judge_http.hpp"

namespace streamo {

inline std::unique_ptr<JudgeBackend> make_judge_backend(const JudgeSection& s) {
  switch (s.backend) {
    case JudgeBackendKind::AlwaysFirst:
      return std::make_unique<AlwaysFirstBackend>();
    case JudgeBackendKind::CoinFlip:
      return std::make_unique<CoinFlipBackend>(s.coin_seed);
    case JudgeBackendKind::PreferSubstring:
      return std::make_unique<PreferSubstringBackend>(s.marker);
    case JudgeBackendKind::Fixture:
      if (s.fixtures.empty())
        throw ConfigError("judge.fixtures is required for the fixture backend");
      return std::make_unique<FixtureBackend>(s.fixtures);
    case JudgeBackendKind::Http: {
      JudgeEndpoint endpoint;
      endpoint.base_url = s.base_url;
      endpoint.path = s.path;
      endpoint.model = s.model;
      endpoint.api_key_env = s.api_key_env;
      return std::make_unique<HttpJudgeBackend>(std::move(endpoint));
    }
  }
  throw ConfigError("unhandled judge backend");
}

inline JudgeClient make_judge_client(const JudgeSection& s) {
  JudgeClientConfig config;
  config.backoff_ms = s.backoff_ms;
  return JudgeClient(make_judge_backend(s), config);
}

}  // namespace streamo
