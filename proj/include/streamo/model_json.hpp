#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamo/dialogue_json.hpp"
#include "streamo/model.hpp"

namespace streamo {

inline constexpr int kCheckpointSchemaVersion = 1;

inline nlohmann::ordered_json model_config_to_json(const ToyModelConfig& c) {
  nlohmann::ordered_json j;
  j["vocab_size"] = c.vocab_size;
  j["embed_dim"] = c.embed_dim;
  j["context_window"] = c.context_window;
  j["num_layers"] = c.num_layers;
  j["hidden_dim"] = c.hidden_dim;
  j["optimizer"] = {{"learning_rate", c.optimizer.learning_rate},
                    {"steps", c.optimizer.steps},
                    {"batch_size", c.optimizer.batch_size},
                    {"seed", c.optimizer.seed}};
  return j;
}

inline ToyModelConfig model_config_from_json(const nlohmann::ordered_json& j) {
  ToyModelConfig c;
  c.vocab_size = detail::require_field(j, "vocab_size", "$.config").get<int32_t>();
  c.embed_dim = detail::require_field(j, "embed_dim", "$.config").get<int>();
  c.context_window =
      detail::require_field(j, "context_window", "$.config").get<int>();
  c.num_layers = detail::require_field(j, "num_layers", "$.config").get<int>();
  c.hidden_dim = detail::require_field(j, "hidden_dim", "$.config").get<int>();
  const auto& opt = detail::require_field(j, "optimizer", "$.config");
  c.optimizer.learning_rate =
      detail::require_field(opt, "learning_rate", "$.config.optimizer").get<double>();
  c.optimizer.steps =
      detail::require_field(opt, "steps", "$.config.optimizer").get<int>();
  c.optimizer.batch_size =
      detail::require_field(opt, "batch_size", "$.config.optimizer").get<int>();
  c.optimizer.seed =
      detail::require_field(opt, "seed", "$.config.optimizer").get<uint64_t>();
  return c;
}

/// Checkpoint layout: schema version, kind tag, config, interned words and
/// the flat parameter vector. Doubles survive the JSON round trip exactly
/// because the serializer prints shortest-round-trip representations.
inline nlohmann::ordered_json toy_checkpoint_to_json(const ToyModel& model) {
  nlohmann::ordered_json j;
  j["schema_version"] = kCheckpointSchemaVersion;
  j["kind"] = "toy";
  j["config"] = model_config_to_json(model.config);
  j["words"] = model.codec.words();
  j["params"] = model.params;
  return j;
}

inline ToyModel toy_checkpoint_from_json(const nlohmann::ordered_json& j) {
  const int version = detail::require_field(j, "schema_version", "$").get<int>();
  if (version != kCheckpointSchemaVersion)
    throw SchemaViolation("unsupported checkpoint schema_version " +
                          std::to_string(version));
  const auto kind = detail::require_string(j, "kind", "$");
  if (kind != "toy")
    throw SchemaViolation("expected checkpoint kind \"toy\", got \"" + kind +
                          "\"");
  ToyModel model(model_config_from_json(detail::require_field(j, "config", "$")));
  const auto& words = detail::require_field(j, "words", "$");
  if (!words.is_array()) throw SchemaViolation("$.words: expected an array");
  TextCodec fresh(model.layout);
  for (const auto& w : words) {
    if (!w.is_string()) throw SchemaViolation("$.words: expected strings");
    fresh.intern_word(w.get<std::string>());
  }
  model.codec = fresh;
  const auto& params = detail::require_field(j, "params", "$");
  if (!params.is_array()) throw SchemaViolation("$.params: expected an array");
  if (params.size() != model.params.size())
    throw SchemaViolation("$.params: expected " +
                          std::to_string(model.params.size()) + " values, got " +
                          std::to_string(params.size()));
  for (size_t i = 0; i < model.params.size(); ++i) {
    if (!params[i].is_number())
      throw SchemaViolation("$.params: expected numbers");
    model.params[i] = params[i].get<double>();
  }
  return model;
}

inline void save_toy_checkpoint(const ToyModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << toy_checkpoint_to_json(model).dump() << '\n';
  if (!out) throw IoError("failed writing " + path);
}

inline ToyModel load_toy_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path + " for reading");
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::ordered_json::parse_error& e) {
    throw SchemaViolation(path + ": " + e.what());
  }
  return toy_checkpoint_from_json(j);
}

inline std::string curve_to_csv(const std::vector<CurvePoint>& curve) {
  std::string out = "step,loss,recall_silence,recall_standby,recall_response\n";
  char line[160];
  for (const auto& p : curve) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.9g\n", p.step,
                  p.loss, p.recall_silence, p.recall_standby, p.recall_response);
    out += line;
  }
  return out;
}

inline nlohmann::ordered_json state_report_to_json(const StateEvalReport& r) {
  nlohmann::ordered_json j;
  j["turns"] = r.turns;
  const char* names[3] = {"silence", "standby", "response"};
  for (int s = 0; s < 3; ++s) {
    const auto& sc = r.per_state[static_cast<size_t>(s)];
    j["per_state"][names[s]] = {{"precision", sc.precision},
                                {"recall", sc.recall},
                                {"f1", sc.f1}};
  }
  nlohmann::ordered_json conf = nlohmann::ordered_json::array();
  for (int g = 0; g < 3; ++g) {
    nlohmann::ordered_json row = nlohmann::ordered_json::array();
    for (int p = 0; p < 3; ++p)
      row.push_back(r.confusion[static_cast<size_t>(g)][static_cast<size_t>(p)]);
    conf.push_back(row);
  }
  j["confusion"] = conf;
  j["timing_f1"] = r.timing_f1;
  return j;
}

}  // namespace streamo
