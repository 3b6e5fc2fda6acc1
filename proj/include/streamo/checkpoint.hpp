#pragma once

#include <fstream>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "streamo/dialogue_json.hpp"
#include "streamo/engine.hpp"
#include "streamo/model_json.hpp"

namespace streamo {

/// Oracle checkpoints carry the gold dialogue the scripted model replays.
inline nlohmann::ordered_json oracle_checkpoint_to_json(
    const StreamingDialogue& dialogue) {
  nlohmann::ordered_json j;
  j["schema_version"] = kCheckpointSchemaVersion;
  j["kind"] = "oracle";
  j["dialogue"] = dialogue_to_json(dialogue);
  return j;
}

inline void save_oracle_checkpoint(const StreamingDialogue& dialogue,
                                   const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << oracle_checkpoint_to_json(dialogue).dump() << '\n';
  if (!out) throw IoError("failed writing " + path);
}

/// Loads either checkpoint kind behind the TokenModel interface.
inline std::unique_ptr<TokenModel> load_any_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path + " for reading");
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::ordered_json::parse_error& e) {
    throw SchemaViolation(path + ": " + e.what());
  }
  const auto kind = detail::require_string(j, "kind", "$");
  if (kind == "toy")
    return std::make_unique<ToyTokenModel>(toy_checkpoint_from_json(j));
  if (kind == "oracle") {
    const int version = detail::require_field(j, "schema_version", "$").get<int>();
    if (version != kCheckpointSchemaVersion)
      throw SchemaViolation("unsupported checkpoint schema_version " +
                            std::to_string(version));
    return std::make_unique<ScriptedModel>(
        dialogue_from_json(detail::require_field(j, "dialogue", "$")));
  }
  throw SchemaViolation("unknown checkpoint kind \"" + kind + "\"");
}

}  // namespace streamo
