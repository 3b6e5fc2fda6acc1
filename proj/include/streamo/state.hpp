#pragma once

#include <array>
#include <string_view>

#include "streamo/errors.hpp"

namespace streamo {

/// The three per-turn decision states. The surface forms below are the
/// canonical spellings used in dialogue files and emission logs.
enum class StateToken { Silence = 0, Standby = 1, Response = 2 };

inline constexpr int kNumStates = 3;

inline constexpr std::string_view state_surface(StateToken state) {
  switch (state) {
    case StateToken::Silence:
      return "<Silence>";
    case StateToken::Standby:
      return "<Standby>";
    case StateToken::Response:
      return "<Response>";
  }
  return "<Silence>";
}

inline StateToken parse_state_token(std::string_view text) {
  if (text == "<Silence>") return StateToken::Silence;
  if (text == "<Standby>") return StateToken::Standby;
  if (text == "<Response>") return StateToken::Response;
  throw SchemaViolation("unknown state token \"" + std::string(text) + "\"");
}

inline constexpr std::array<StateToken, kNumStates> all_states() {
  return {StateToken::Silence, StateToken::Standby, StateToken::Response};
}

}  // namespace streamo
