#pragma once

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamo/errors.hpp"
#include "streamo/prompts.hpp"

namespace streamo {

enum class JudgeTemplate { PairwisePreference, ContentMatch };

enum class JudgeDecision { A, B, Tie, Yes, No };

inline std::string judge_decision_name(JudgeDecision d) {
  switch (d) {
    case JudgeDecision::A:
      return "A";
    case JudgeDecision::B:
      return "B";
    case JudgeDecision::Tie:
      return "TIE";
    case JudgeDecision::Yes:
      return "YES";
    case JudgeDecision::No:
      return "NO";
  }
  return "A";
}

struct JudgeRequest {
  JudgeTemplate template_id = JudgeTemplate::PairwisePreference;
  std::map<std::string, std::string> slots;
  double temperature = 0.0;
  double timeout_s = 10.0;
  int retries = 2;
};

struct JudgeVerdict {
  JudgeDecision decision = JudgeDecision::A;
  std::string raw_text;
  double latency_ms = 0.0;

  bool operator==(const JudgeVerdict&) const = default;
};

namespace detail {

inline std::string_view template_text(JudgeTemplate id) {
  switch (id) {
    case JudgeTemplate::PairwisePreference:
      return prompts::kPairwiseJudgeTemplate;
    case JudgeTemplate::ContentMatch:
      return prompts::kContentMatchJudgeTemplate;
  }
  return prompts::kPairwiseJudgeTemplate;
}

/// Fills {slot} placeholders. Every placeholder in the template must have a
/// value; unused extra slots are rejected too, so typos surface immediately.
inline std::string render_template(std::string_view text,
                                   const std::map<std::string, std::string>& slots) {
  std::string out;
  std::vector<std::string> seen;
  size_t i = 0;
  while (i < text.size()) {
    const size_t open = text.find('{', i);
    if (open == std::string_view::npos) {
      out.append(text.substr(i));
      break;
    }
    out.append(text.substr(i, open - i));
    const size_t close = text.find('}', open);
    if (close == std::string_view::npos)
      throw ConfigError("unterminated slot in judge template");
    const std::string name(text.substr(open + 1, close - open - 1));
    const auto it = slots.find(name);
    if (it == slots.end())
      throw ConfigError("judge template slot \"" + name + "\" is not filled");
    seen.push_back(name);
    out.append(it->second);
    i = close + 1;
  }
  for (const auto& [name, value] : slots)
    if (std::find(seen.begin(), seen.end(), name) == seen.end())
      throw ConfigError("slot \"" + name +
                        "\" is not referenced by the template");
  return out;
}

inline std::string trim_copy(const std::string& text) {
  size_t b = 0, e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  return text.substr(b, e - b);
}

/// Anchored verdict grammar: after trimming, the whole reply must be one of
/// the template's declared answer forms, case-insensitively. Anything else is
/// a protocol error, never a default.
inline JudgeDecision parse_verdict(JudgeTemplate id, const std::string& raw) {
  std::string token = trim_copy(raw);
  std::transform(token.begin(), token.end(), token.begin(), [](unsigned char c) {
    return static_cast<char>(std::toupper(c));
  });
  if (id == JudgeTemplate::PairwisePreference) {
    if (token == "A") return JudgeDecision::A;
    if (token == "B") return JudgeDecision::B;
    if (token == "TIE") return JudgeDecision::Tie;
    throw JudgeProtocolError("expected A, B or TIE, got \"" + raw + "\"");
  }
  if (token == "YES") return JudgeDecision::Yes;
  if (token == "NO") return JudgeDecision::No;
  throw JudgeProtocolError("expected YES or NO, got \"" + raw + "\"");
}

}  // namespace detail

/// Produces raw reply text for a rendered prompt. Implementations must be
/// safe to call from several threads at once.
class JudgeBackend {
 public:
  virtual ~JudgeBackend() = default;
  virtual std::string respond(const JudgeRequest& request,
                              const std::string& prompt) = 0;
};

/// Always answers with the first listed form (A or YES).
class AlwaysFirstBackend : public JudgeBackend {
 public:
  std::string respond(const JudgeRequest& request, const std::string&) override {
    return request.template_id == JudgeTemplate::PairwisePreference ? "A"
                                                                    : "YES";
  }
};

/// Seeded coin flip over the two non-tie forms.
class CoinFlipBackend : public JudgeBackend {
 public:
  explicit CoinFlipBackend(uint64_t seed) : rng_(seed) {}

  std::string respond(const JudgeRequest& request, const std::string&) override {
    std::lock_guard<std::mutex> lock(mutex_);
    const bool first = std::uniform_int_distribution<int>(0, 1)(rng_) == 0;
    if (request.template_id == JudgeTemplate::PairwisePreference)
      return first ? "A" : "B";
    return first ? "YES" : "NO";
  }

 private:
  std::mutex mutex_;
  std::mt19937_64 rng_;
};

/// Prefers whichever pairwise slot contains the marker substring; ties when
/// both or neither do. Content-match says YES on equal trimmed texts.
class PreferSubstringBackend : public JudgeBackend {
 public:
  explicit PreferSubstringBackend(std::string marker)
      : marker_(std::move(marker)) {}

  std::string respond(const JudgeRequest& request, const std::string&) override {
    if (request.template_id == JudgeTemplate::ContentMatch) {
      const auto a = request.slots.find("prediction");
      const auto b = request.slots.find("reference");
      return a != request.slots.end() && b != request.slots.end() &&
                     detail::trim_copy(a->second) == detail::trim_copy(b->second)
                 ? "YES"
                 : "NO";
    }
    const bool in_a =
        request.slots.at("output_a").find(marker_) != std::string::npos;
    const bool in_b =
        request.slots.at("output_b").find(marker_) != std::string::npos;
    if (in_a == in_b) return "TIE";
    return in_a ? "A" : "B";
  }

 private:
  std::string marker_;
};

/// Wraps another backend and sleeps before answering, for throughput tests.
class LatencyBackend : public JudgeBackend {
 public:
  LatencyBackend(std::unique_ptr<JudgeBackend> inner, int delay_ms)
      : inner_(std::move(inner)), delay_ms_(delay_ms) {}

  std::string respond(const JudgeRequest& request,
                      const std::string& prompt) override {
    std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms_));
    return inner_->respond(request, prompt);
  }

 private:
  std::unique_ptr<JudgeBackend> inner_;
  int delay_ms_;
};

/// Fails the first n attempts with a transport error, then delegates.
class FlakyBackend : public JudgeBackend {
 public:
  FlakyBackend(std::unique_ptr<JudgeBackend> inner, int failures)
      : inner_(std::move(inner)), remaining_(failures) {}

  std::string respond(const JudgeRequest& request,
                      const std::string& prompt) override {
    if (remaining_.fetch_sub(1) > 0)
      throw JudgeUnavailable("simulated transport failure");
    return inner_->respond(request, prompt);
  }

 private:
  std::unique_ptr<JudgeBackend> inner_;
  std::atomic<int> remaining_;
};

/// Replays recorded prompt/response pairs from a JSONL fixture file, one
/// {"prompt": ..., "response": ...} object per line. Unknown prompts fail
/// rather than guessing.
class FixtureBackend : public JudgeBackend {
 public:
  explicit FixtureBackend(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open fixtures " + path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(line);
      } catch (const nlohmann::json::parse_error& e) {
        throw SchemaViolation(path + ":" + std::to_string(line_no) + ": " +
                              e.what());
      }
      if (!j.contains("prompt") || !j.contains("response"))
        throw SchemaViolation(path + ":" + std::to_string(line_no) +
                              ": fixture needs prompt and response");
      replies_[j["prompt"].get<std::string>()] = j["response"].get<std::string>();
    }
  }

  std::string respond(const JudgeRequest&, const std::string& prompt) override {
    const auto it = replies_.find(prompt);
    if (it == replies_.end())
      throw JudgeUnavailable("no fixture recorded for this prompt");
    return it->second;
  }

  static void record(const std::string& path,
                     const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open fixtures " + path + " for writing");
    for (const auto& [prompt, response] : pairs) {
      nlohmann::json j;
      j["prompt"] = prompt;
      j["response"] = response;
      out << j.dump() << '\n';
    }
  }

 private:
  std::map<std::string, std::string> replies_;
};

struct JudgeClientConfig {
  // Base delay of the exponential backoff between attempts; tests set 0.
  int backoff_ms = 100;
};

class JudgeClient {
 public:
  explicit JudgeClient(std::unique_ptr<JudgeBackend> backend,
                       JudgeClientConfig config = {})
      : backend_(std::move(backend)), config_(config) {}

  JudgeVerdict judge(const JudgeRequest& request) const {
    const std::string prompt =
        detail::render_template(detail::template_text(request.template_id),
                                request.slots);
    std::string last_error = "no attempts made";
    const int attempts = request.retries + 1;
    for (int attempt = 0; attempt < attempts; ++attempt) {
      if (attempt > 0 && config_.backoff_ms > 0)
        std::this_thread::sleep_for(
            std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
      const auto start = std::chrono::steady_clock::now();
      std::string raw;
      try {
        raw = backend_->respond(request, prompt);
      } catch (const JudgeProtocolError&) {
        throw;
      } catch (const Error& e) {
        last_error = e.what();
        continue;
      }
      const auto elapsed = std::chrono::duration<double, std::milli>(
          std::chrono::steady_clock::now() - start);
      JudgeVerdict verdict;
      verdict.decision = detail::parse_verdict(request.template_id, raw);
      verdict.raw_text = raw;
      verdict.latency_ms = elapsed.count();
      return verdict;
    }
    throw JudgeUnavailable("gave up after " + std::to_string(attempts) +
                           " attempts: " + last_error);
  }

 private:
  std::unique_ptr<JudgeBackend> backend_;
  JudgeClientConfig config_;
};

/// One batch entry: either a verdict or that request's error message.
struct JudgeOutcome {
  std::optional<JudgeVerdict> verdict;
  std::optional<std::string> error;
};

inline std::vector<JudgeOutcome> batch_judge(const JudgeClient& client,
                                             const std::vector<JudgeRequest>& requests,
                                             int max_in_flight) {
  if (max_in_flight < 1) throw DomainError("max_in_flight must be >= 1");
  std::vector<JudgeOutcome> outcomes(requests.size());
  std::atomic<size_t> next{0};
  const auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        outcomes[i].verdict = client.judge(requests[i]);
      } catch (const Error& e) {
        outcomes[i].error = e.what();
      }
    }
  };
  const int threads =
      std::min<int>(max_in_flight, static_cast<int>(requests.size()));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  return outcomes;
}

}  // namespace streamo
