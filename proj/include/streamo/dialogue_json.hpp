#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamo/dialogue.hpp"
#include "streamo/errors.hpp"

namespace streamo {

// ordered_json keeps insertion order so serialized lines are byte-stable.
using json = nlohmann::ordered_json;

inline constexpr int kDialogueSchemaVersion = 1;

inline json dialogue_to_json(const StreamingDialogue& dialogue) {
  validate_dialogue(dialogue);
  json doc;
  doc["schema_version"] = kDialogueSchemaVersion;
  doc["task"] = task_name(dialogue.task_kind);
  doc["system_prompt"] = dialogue.system_prompt;
  doc["turns"] = json::array();
  for (const auto& turn : dialogue.turns) {
    json jt;
    jt["interval"] = format_time_marker(turn.interval);
    jt["frames"] = turn.frames;
    if (turn.user_text.has_value()) jt["user_text"] = *turn.user_text;
    jt["state"] = state_surface(turn.state);
    if (turn.response_text.has_value()) jt["response_text"] = *turn.response_text;
    doc["turns"].push_back(std::move(jt));
  }
  return doc;
}

namespace detail {

inline const json& require_field(const json& obj, const char* key,
                                 const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw SchemaViolation(path + "." + key + ": missing field");
  return *it;
}

inline std::string require_string(const json& obj, const char* key,
                                  const std::string& path) {
  const json& value = require_field(obj, key, path);
  if (!value.is_string())
    throw SchemaViolation(path + "." + key + ": expected string");
  return value.get<std::string>();
}

}  // namespace detail

inline StreamingDialogue dialogue_from_json(const json& doc) {
  if (!doc.is_object()) throw SchemaViolation("$: expected object");
  const json& version = detail::require_field(doc, "schema_version", "$");
  if (!version.is_number_integer() ||
      version.get<int>() != kDialogueSchemaVersion)
    throw SchemaViolation("$.schema_version: expected " +
                          std::to_string(kDialogueSchemaVersion));
  StreamingDialogue dialogue;
  dialogue.task_kind = parse_task_name(detail::require_string(doc, "task", "$"));
  dialogue.system_prompt = detail::require_string(doc, "system_prompt", "$");
  const json& turns = detail::require_field(doc, "turns", "$");
  if (!turns.is_array()) throw SchemaViolation("$.turns: expected array");
  for (size_t i = 0; i < turns.size(); ++i) {
    const std::string path = "$.turns[" + std::to_string(i) + "]";
    const json& jt = turns[i];
    if (!jt.is_object()) throw SchemaViolation(path + ": expected object");
    DialogueTurn turn;
    try {
      turn.interval =
          parse_time_marker(detail::require_string(jt, "interval", path));
    } catch (const MalformedMarker& err) {
      throw SchemaViolation(path + ".interval: " + err.what());
    }
    const json& frames = detail::require_field(jt, "frames", path);
    if (!frames.is_array())
      throw SchemaViolation(path + ".frames: expected array");
    for (const auto& frame : frames) {
      if (!frame.is_number_integer())
        throw SchemaViolation(path + ".frames: expected integer ids");
      turn.frames.push_back(frame.get<int32_t>());
    }
    if (jt.contains("user_text"))
      turn.user_text = detail::require_string(jt, "user_text", path);
    try {
      turn.state = parse_state_token(detail::require_string(jt, "state", path));
    } catch (const SchemaViolation& err) {
      throw SchemaViolation(path + ".state: " + err.what());
    }
    if (jt.contains("response_text"))
      turn.response_text = detail::require_string(jt, "response_text", path);
    for (const auto& [key, value] : jt.items()) {
      (void)value;
      if (key != "interval" && key != "frames" && key != "user_text" &&
          key != "state" && key != "response_text")
        throw SchemaViolation(path + "." + key + ": unknown field");
    }
    dialogue.turns.push_back(std::move(turn));
  }
  validate_dialogue(dialogue);
  return dialogue;
}

inline std::string dialogue_to_line(const StreamingDialogue& dialogue) {
  return dialogue_to_json(dialogue).dump();
}

inline StreamingDialogue dialogue_from_line(const std::string& line) {
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::parse_error& err) {
    throw SchemaViolation(std::string("invalid JSON: ") + err.what());
  }
  return dialogue_from_json(doc);
}

inline void write_dialogues(const std::string& file_path,
                            const std::vector<StreamingDialogue>& dialogues) {
  std::ofstream out(file_path);
  if (!out) throw IoError("cannot open " + file_path + " for writing");
  for (const auto& dialogue : dialogues) out << dialogue_to_line(dialogue) << '\n';
  if (!out) throw IoError("failed writing " + file_path);
}

inline std::vector<StreamingDialogue> read_dialogues(
    const std::string& file_path) {
  std::ifstream in(file_path);
  if (!in) throw IoError("cannot open " + file_path);
  std::vector<StreamingDialogue> dialogues;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      dialogues.push_back(dialogue_from_line(line));
    } catch (const SchemaViolation& err) {
      throw SchemaViolation(file_path + ":" + std::to_string(line_no) + ": " +
                            err.what());
    }
  }
  return dialogues;
}

}  // namespace streamo
