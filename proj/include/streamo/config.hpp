#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamo/engine.hpp"
#include "streamo/judge.hpp"
#include "streamo/loss.hpp"
#include "streamo/model.hpp"
#include "streamo/synth.hpp"

namespace streamo {

enum class JudgeBackendKind {
  AlwaysFirst,
  CoinFlip,
  PreferSubstring,
  Fixture,
  Http,
};

inline std::string judge_backend_name(JudgeBackendKind kind) {
  switch (kind) {
    case JudgeBackendKind::AlwaysFirst:
      return "always_first";
    case JudgeBackendKind::CoinFlip:
      return "coin_flip";
    case JudgeBackendKind::PreferSubstring:
      return "prefer_substring";
    case JudgeBackendKind::Fixture:
      return "fixture";
    case JudgeBackendKind::Http:
      return "http";
  }
  return "always_first";
}

inline JudgeBackendKind parse_judge_backend(const std::string& name) {
  if (name == "always_first") return JudgeBackendKind::AlwaysFirst;
  if (name == "coin_flip") return JudgeBackendKind::CoinFlip;
  if (name == "prefer_substring") return JudgeBackendKind::PreferSubstring;
  if (name == "fixture") return JudgeBackendKind::Fixture;
  if (name == "http") return JudgeBackendKind::Http;
  throw ConfigError("unknown judge backend \"" + name + "\"");
}

struct SynthSection {
  SyntheticConfig generator;
  int64_t episodes = 200;
};

struct ModelSection {
  ToyModelConfig model;
  int curve_every = 10;
};

struct LossSection {
  LossMode mode = LossMode::Focal;
  double gamma = 2.0;
  // Per-state scales used only in fixed_scale mode, order
  // {silence, standby, response}.
  std::array<double, 3> fixed_weights{0.3, 1.3, 2.0};

  LossConfig to_loss_config() const {
    LossConfig config;
    config.mode = mode;
    config.gamma = gamma;
    if (mode == LossMode::FixedScale) config.fixed_weights = fixed_weights;
    return config;
  }
};

struct EngineSection {
  OverflowPolicy overflow_policy = OverflowPolicy::Error;
};

struct EvalSection {
  double delta_t = 3.0;
  bool debias = true;
};

struct JudgeSection {
  JudgeBackendKind backend = JudgeBackendKind::AlwaysFirst;
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model = "judge";
  std::string api_key_env;
  double timeout_s = 10.0;
  int retries = 2;
  int backoff_ms = 100;
  std::string fixtures;
  std::string marker = "assistant";
  uint64_t coin_seed = 7;
};

struct ToolkitConfig {
  SynthSection synth;
  ModelSection model;
  LossSection loss;
  EngineSection engine;
  EvalSection eval;
  JudgeSection judge;
};

namespace detail {

inline std::string config_trim(const std::string& text) {
  size_t b = 0, e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  return text.substr(b, e - b);
}

inline int64_t config_int(const std::string& value, const std::string& key) {
  size_t used = 0;
  int64_t parsed = 0;
  try {
    parsed = std::stoll(value, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": \"" + value + "\" is not an integer");
  }
  if (used != value.size())
    throw ConfigError(key + ": \"" + value + "\" is not an integer");
  return parsed;
}

inline double config_double(const std::string& value, const std::string& key) {
  size_t used = 0;
  double parsed = 0.0;
  try {
    parsed = std::stod(value, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": \"" + value + "\" is not a number");
  }
  if (used != value.size())
    throw ConfigError(key + ": \"" + value + "\" is not a number");
  return parsed;
}

inline bool config_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1" || value == "yes" || value == "on")
    return true;
  if (value == "false" || value == "0" || value == "no" || value == "off")
    return false;
  throw ConfigError(key + ": \"" + value + "\" is not a boolean");
}

using ConfigSetter = std::function<void(ToolkitConfig&, const std::string&)>;

/// Every recognized "section.key", with its parser. The same table drives
/// file parsing, environment overrides, and the unknown-key rejection.
inline const std::map<std::string, ConfigSetter>& config_setters() {
  static const std::map<std::string, ConfigSetter> table = [] {
    std::map<std::string, ConfigSetter> t;
    const auto as_int32 = [](int64_t v, const std::string& key) {
      if (v < INT32_MIN || v > INT32_MAX)
        throw ConfigError(key + ": value out of range");
      return static_cast<int32_t>(v);
    };

    t["synth.vocab_size"] = [as_int32](ToolkitConfig& c, const std::string& v) {
      c.synth.generator.vocab_size =
          as_int32(config_int(v, "synth.vocab_size"), "synth.vocab_size");
    };
    t["synth.num_turns"] = [](ToolkitConfig& c, const std::string& v) {
      c.synth.generator.num_turns =
          static_cast<int>(config_int(v, "synth.num_turns"));
    };
    t["synth.tokens_per_turn"] = [](ToolkitConfig& c, const std::string& v) {
      c.synth.generator.tokens_per_turn =
          static_cast<int>(config_int(v, "synth.tokens_per_turn"));
    };
    t["synth.event_rate"] = [](ToolkitConfig& c, const std::string& v) {
      c.synth.generator.event_rate = config_double(v, "synth.event_rate");
    };
    t["synth.event_len_min"] = [](ToolkitConfig& c, const std::string& v) {
      c.synth.generator.event_len_min =
          static_cast<int>(config_int(v, "synth.event_len_min"));
    };
    t["synth.event_len_max"] = [](ToolkitConfig& c, const std::string& v) {
      c.synth.generator.event_len_max =
          static_cast<int>(config_int(v, "synth.event_len_max"));
    };
    t["synth.ratio_silence"] = [](ToolkitConfig& c, const std::string& v) {
      c.synth.generator.target_state_ratio[0] =
          config_double(v, "synth.ratio_silence");
    };
    t["synth.ratio_standby"] = [](ToolkitConfig& c, const std::string& v) {
      c.synth.generator.target_state_ratio[1] =
          config_double(v, "synth.ratio_standby");
    };
    t["synth.ratio_response"] = [](ToolkitConfig& c, const std::string& v) {
      c.synth.generator.target_state_ratio[2] =
          config_double(v, "synth.ratio_response");
    };
    t["synth.seed"] = [](ToolkitConfig& c, const std::string& v) {
      c.synth.generator.seed =
          static_cast<uint64_t>(config_int(v, "synth.seed"));
    };
    t["synth.episodes"] = [](ToolkitConfig& c, const std::string& v) {
      c.synth.episodes = config_int(v, "synth.episodes");
    };

    t["model.vocab_size"] = [as_int32](ToolkitConfig& c, const std::string& v) {
      c.model.model.vocab_size =
          as_int32(config_int(v, "model.vocab_size"), "model.vocab_size");
    };
    t["model.embed_dim"] = [](ToolkitConfig& c, const std::string& v) {
      c.model.model.embed_dim =
          static_cast<int>(config_int(v, "model.embed_dim"));
    };
    t["model.context_window"] = [](ToolkitConfig& c, const std::string& v) {
      c.model.model.context_window =
          static_cast<int>(config_int(v, "model.context_window"));
    };
    t["model.num_layers"] = [](ToolkitConfig& c, const std::string& v) {
      c.model.model.num_layers =
          static_cast<int>(config_int(v, "model.num_layers"));
    };
    t["model.hidden_dim"] = [](ToolkitConfig& c, const std::string& v) {
      c.model.model.hidden_dim =
          static_cast<int>(config_int(v, "model.hidden_dim"));
    };
    t["model.learning_rate"] = [](ToolkitConfig& c, const std::string& v) {
      c.model.model.optimizer.learning_rate =
          config_double(v, "model.learning_rate");
    };
    t["model.steps"] = [](ToolkitConfig& c, const std::string& v) {
      c.model.model.optimizer.steps =
          static_cast<int>(config_int(v, "model.steps"));
    };
    t["model.batch_size"] = [](ToolkitConfig& c, const std::string& v) {
      c.model.model.optimizer.batch_size =
          static_cast<int>(config_int(v, "model.batch_size"));
    };
    t["model.seed"] = [](ToolkitConfig& c, const std::string& v) {
      c.model.model.optimizer.seed =
          static_cast<uint64_t>(config_int(v, "model.seed"));
    };
    t["model.curve_every"] = [](ToolkitConfig& c, const std::string& v) {
      c.model.curve_every = static_cast<int>(config_int(v, "model.curve_every"));
    };

    t["loss.mode"] = [](ToolkitConfig& c, const std::string& v) {
      c.loss.mode = parse_loss_mode(v);
    };
    t["loss.gamma"] = [](ToolkitConfig& c, const std::string& v) {
      c.loss.gamma = config_double(v, "loss.gamma");
    };
    t["loss.fixed_silence"] = [](ToolkitConfig& c, const std::string& v) {
      c.loss.fixed_weights[0] = config_double(v, "loss.fixed_silence");
    };
    t["loss.fixed_standby"] = [](ToolkitConfig& c, const std::string& v) {
      c.loss.fixed_weights[1] = config_double(v, "loss.fixed_standby");
    };
    t["loss.fixed_response"] = [](ToolkitConfig& c, const std::string& v) {
      c.loss.fixed_weights[2] = config_double(v, "loss.fixed_response");
    };

    t["engine.overflow_policy"] = [](ToolkitConfig& c, const std::string& v) {
      if (v == "error")
        c.engine.overflow_policy = OverflowPolicy::Error;
      else if (v == "drop_oldest")
        c.engine.overflow_policy = OverflowPolicy::DropOldest;
      else
        throw ConfigError("engine.overflow_policy: \"" + v +
                          "\" is not error or drop_oldest");
    };

    t["eval.delta_t"] = [](ToolkitConfig& c, const std::string& v) {
      c.eval.delta_t = config_double(v, "eval.delta_t");
    };
    t["eval.debias"] = [](ToolkitConfig& c, const std::string& v) {
      c.eval.debias = config_bool(v, "eval.debias");
    };

    t["judge.backend"] = [](ToolkitConfig& c, const std::string& v) {
      c.judge.backend = parse_judge_backend(v);
    };
    t["judge.base_url"] = [](ToolkitConfig& c, const std::string& v) {
      c.judge.base_url = v;
    };
    t["judge.path"] = [](ToolkitConfig& c, const std::string& v) {
      c.judge.path = v;
    };
    t["judge.model"] = [](ToolkitConfig& c, const std::string& v) {
      c.judge.model = v;
    };
    t["judge.api_key_env"] = [](ToolkitConfig& c, const std::string& v) {
      c.judge.api_key_env = v;
    };
    t["judge.timeout_s"] = [](ToolkitConfig& c, const std::string& v) {
      c.judge.timeout_s = config_double(v, "judge.timeout_s");
    };
    t["judge.retries"] = [](ToolkitConfig& c, const std::string& v) {
      c.judge.retries = static_cast<int>(config_int(v, "judge.retries"));
    };
    t["judge.backoff_ms"] = [](ToolkitConfig& c, const std::string& v) {
      c.judge.backoff_ms = static_cast<int>(config_int(v, "judge.backoff_ms"));
    };
    t["judge.fixtures"] = [](ToolkitConfig& c, const std::string& v) {
      c.judge.fixtures = v;
    };
    t["judge.marker"] = [](ToolkitConfig& c, const std::string& v) {
      c.judge.marker = v;
    };
    t["judge.coin_seed"] = [](ToolkitConfig& c, const std::string& v) {
      c.judge.coin_seed = static_cast<uint64_t>(config_int(v, "judge.coin_seed"));
    };
    return t;
  }();
  return table;
}

inline void apply_config_value(ToolkitConfig& config, const std::string& key,
                               const std::string& value,
                               const std::string& where) {
  const auto& table = config_setters();
  const auto it = table.find(key);
  if (it == table.end())
    throw ConfigError(where + ": unknown configuration key \"" + key + "\"");
  it->second(config, value);
}

}  // namespace detail

/// Plain-text configuration: "[section]" headers, "key = value" lines, full
/// lines starting with '#' or ';' as comments. Unknown sections or keys are
/// rejected with their location.
inline void load_config_file(ToolkitConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  std::string line;
  std::string section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string where = path + ":" + std::to_string(line_no);
    const std::string trimmed = detail::config_trim(line);
    if (trimmed.empty() || trimmed[0] == '#' || trimmed[0] == ';') continue;
    if (trimmed.front() == '[') {
      if (trimmed.back() != ']')
        throw ConfigError(where + ": unterminated section header");
      section = detail::config_trim(trimmed.substr(1, trimmed.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const size_t eq = trimmed.find('=');
    if (eq == std::string::npos)
      throw ConfigError(where + ": expected key = value");
    const std::string key = detail::config_trim(trimmed.substr(0, eq));
    const std::string value = detail::config_trim(trimmed.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (section.empty())
      throw ConfigError(where + ": key \"" + key + "\" outside any section");
    detail::apply_config_value(config, section + "." + key, value, where);
  }
}

/// Environment overrides: STREAMO_<SECTION>_<KEY> in upper case, e.g.
/// STREAMO_MODEL_STEPS. Applied on top of file values; flags still win.
inline void apply_env_overrides(ToolkitConfig& config) {
  for (const auto& [key, setter] : detail::config_setters()) {
    std::string env_name = "STREAMO_";
    for (const char c : key)
      env_name += c == '.' ? '_'
                           : static_cast<char>(std::toupper(
                                 static_cast<unsigned char>(c)));
    if (const char* value = std::getenv(env_name.c_str()))
      setter(config, value);
  }
}

/// The effective configuration, echoed into output manifests.
inline nlohmann::ordered_json config_to_json(const ToolkitConfig& c) {
  nlohmann::ordered_json j;
  j["synth"] = {{"vocab_size", c.synth.generator.vocab_size},
                {"num_turns", c.synth.generator.num_turns},
                {"tokens_per_turn", c.synth.generator.tokens_per_turn},
                {"event_rate", c.synth.generator.event_rate},
                {"event_len_min", c.synth.generator.event_len_min},
                {"event_len_max", c.synth.generator.event_len_max},
                {"ratio_silence", c.synth.generator.target_state_ratio[0]},
                {"ratio_standby", c.synth.generator.target_state_ratio[1]},
                {"ratio_response", c.synth.generator.target_state_ratio[2]},
                {"seed", c.synth.generator.seed},
                {"episodes", c.synth.episodes}};
  j["model"] = {{"vocab_size", c.model.model.vocab_size},
                {"embed_dim", c.model.model.embed_dim},
                {"context_window", c.model.model.context_window},
                {"num_layers", c.model.model.num_layers},
                {"hidden_dim", c.model.model.hidden_dim},
                {"learning_rate", c.model.model.optimizer.learning_rate},
                {"steps", c.model.model.optimizer.steps},
                {"batch_size", c.model.model.optimizer.batch_size},
                {"seed", c.model.model.optimizer.seed},
                {"curve_every", c.model.curve_every}};
  j["loss"] = {{"mode", std::string(loss_mode_name(c.loss.mode))},
               {"gamma", c.loss.gamma},
               {"fixed_silence", c.loss.fixed_weights[0]},
               {"fixed_standby", c.loss.fixed_weights[1]},
               {"fixed_response", c.loss.fixed_weights[2]}};
  j["engine"] = {{"overflow_policy",
                  c.engine.overflow_policy == OverflowPolicy::Error
                      ? "error"
                      : "drop_oldest"}};
  j["eval"] = {{"delta_t", c.eval.delta_t}, {"debias", c.eval.debias}};
  j["judge"] = {{"backend", judge_backend_name(c.judge.backend)},
                {"base_url", c.judge.base_url},
                {"path", c.judge.path},
                {"model", c.judge.model},
                {"api_key_env", c.judge.api_key_env},
                {"timeout_s", c.judge.timeout_s},
                {"retries", c.judge.retries},
                {"backoff_ms", c.judge.backoff_ms},
                {"fixtures", c.judge.fixtures},
                {"marker", c.judge.marker},
                {"coin_seed", c.judge.coin_seed}};
  return j;
}

}  // namespace streamo
