#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "streamo/errors.hpp"
#include "streamo/prompts.hpp"
#include "streamo/state.hpp"
#include "streamo/time.hpp"

namespace streamo {

enum class TaskKind {
  Narration,
  EventCaption,
  ActionCaption,
  EventGrounding,
  Tsqa,
  OfflineQa,
};

inline std::string_view task_name(TaskKind task) {
  switch (task) {
    case TaskKind::Narration:
      return "narration";
    case TaskKind::EventCaption:
      return "event_caption";
    case TaskKind::ActionCaption:
      return "action_caption";
    case TaskKind::EventGrounding:
      return "event_grounding";
    case TaskKind::Tsqa:
      return "tsqa";
    case TaskKind::OfflineQa:
      return "offline_qa";
  }
  return "narration";
}

inline TaskKind parse_task_name(std::string_view name) {
  if (name == "narration") return TaskKind::Narration;
  if (name == "event_caption") return TaskKind::EventCaption;
  if (name == "action_caption") return TaskKind::ActionCaption;
  if (name == "event_grounding") return TaskKind::EventGrounding;
  if (name == "tsqa") return TaskKind::Tsqa;
  if (name == "offline_qa") return TaskKind::OfflineQa;
  throw SchemaViolation("unknown task kind \"" + std::string(name) + "\"");
}

/// One stream turn: the frames observed during `interval`, the optional user
/// text arriving with them, and the assistant's state decision plus content.
/// response_text is non-empty exactly when state == Response.
struct DialogueTurn {
  TimeInterval interval;
  std::vector<int32_t> frames;
  std::optional<std::string> user_text;
  StateToken state = StateToken::Silence;
  std::optional<std::string> response_text;

  bool operator==(const DialogueTurn&) const = default;
};

struct StreamingDialogue {
  std::string system_prompt;
  std::vector<DialogueTurn> turns;
  TaskKind task_kind = TaskKind::EventCaption;

  bool operator==(const StreamingDialogue&) const = default;
};

/// Checks the structural invariants every dialogue must satisfy, raising
/// SchemaViolation with a field path on the first violation. Called by the
/// builder and by deserialization.
inline void validate_dialogue(const StreamingDialogue& dialogue) {
  if (dialogue.turns.empty()) throw SchemaViolation("turns: must be non-empty");
  for (size_t i = 0; i < dialogue.turns.size(); ++i) {
    const auto& turn = dialogue.turns[i];
    const std::string path = "turns[" + std::to_string(i) + "]";
    if (!(turn.interval.end_s > turn.interval.start_s))
      throw SchemaViolation(path + ".interval: end must exceed start");
    if (i == 0 && turn.interval.start_s != 0.0)
      throw SchemaViolation(path + ".interval: first turn must start at 0");
    if (i > 0 && turn.interval.start_s != dialogue.turns[i - 1].interval.end_s)
      throw SchemaViolation(path + ".interval: turns must be contiguous");
    if (turn.frames.empty())
      throw SchemaViolation(path + ".frames: must be non-empty");
    const bool has_text =
        turn.response_text.has_value() && !turn.response_text->empty();
    if (has_text != (turn.state == StateToken::Response))
      throw SchemaViolation(path +
                            ".response_text: present iff state is <Response>");
  }
}

struct EventSpan {
  TimeInterval span;
  std::string text;

  bool operator==(const EventSpan&) const = default;
};

namespace detail {

inline void check_events(const std::vector<EventSpan>& events,
                         double horizon_s) {
  for (size_t i = 0; i < events.size(); ++i) {
    const auto& span = events[i].span;
    if (!(span.end_s > span.start_s))
      throw EventOutOfRange("event " + std::to_string(i) + " has no extent");
    if (span.start_s < 0.0 || span.end_s > horizon_s + 1e-9)
      throw EventOutOfRange("event " + std::to_string(i) +
                            " lies outside [0, " + std::to_string(horizon_s) +
                            "]");
    if (i > 0 && events[i].span.start_s < events[i - 1].span.end_s)
      throw OverlappingEvents("events " + std::to_string(i - 1) + " and " +
                              std::to_string(i) + " overlap");
    if (i > 0 && events[i].span.start_s < events[i - 1].span.start_s)
      throw OverlappingEvents("events must be sorted by start");
  }
}

}  // namespace detail

/// Derives the per-turn state track from ground-truth event spans.
///
/// Turn k covers (k*g, (k+1)*g] for membership purposes: an event whose end
/// falls in that half-open window completes in turn k and yields Response
/// there. A turn that overlaps an event still running past the turn's end
/// yields Standby. Narration has no waiting phase: any overlap is Response.
/// Multiple events merge per turn with precedence Response > Standby >
/// Silence.
inline std::vector<StateToken> label_states(
    const std::vector<TimeInterval>& events, int num_turns,
    double granularity_s, TaskKind task) {
  if (num_turns < 1) throw DomainError("num_turns must be >= 1");
  if (!(granularity_s > 0.0)) throw DomainError("granularity must be > 0");
  {
    std::vector<EventSpan> spans;
    spans.reserve(events.size());
    for (const auto& e : events) spans.push_back({e, ""});
    detail::check_events(spans, num_turns * granularity_s);
  }
  std::vector<StateToken> states(num_turns, StateToken::Silence);
  for (int k = 0; k < num_turns; ++k) {
    const double turn_start = k * granularity_s;
    const double turn_end = (k + 1) * granularity_s;
    StateToken state = StateToken::Silence;
    for (const auto& event : events) {
      const bool overlaps =
          event.start_s < turn_end && event.end_s > turn_start;
      if (!overlaps) continue;
      if (task == TaskKind::Narration) {
        state = StateToken::Response;
        break;
      }
      const bool ends_here =
          event.end_s > turn_start && event.end_s <= turn_end;
      if (ends_here) {
        state = StateToken::Response;
        break;
      }
      state = StateToken::Standby;
    }
    states[k] = state;
  }
  return states;
}

struct QuestionInsert {
  std::string text;
  int turn = 0;

  bool operator==(const QuestionInsert&) const = default;
};

/// Supplies the observation tokens for turn k. The default provider emits a
/// single placeholder token; synthetic generation plants real signals.
using FrameProvider = std::function<std::vector<int32_t>(int turn)>;

inline std::vector<int32_t> placeholder_frames(int /*turn*/) { return {0}; }

/// Assembles a complete streaming dialogue: one turn per granularity window,
/// states from label_states, and the event text attached to each Response
/// turn. Questions are validated against the task's timing rules:
/// event_grounding requires the instruction to arrive strictly before the
/// event starts, tsqa before the first answer fires.
inline StreamingDialogue build_dialogue(
    double duration_s, double granularity_s,
    const std::vector<EventSpan>& events, TaskKind task,
    const std::vector<QuestionInsert>& questions = {},
    const FrameProvider& frames = placeholder_frames,
    std::string system_prompt = std::string(prompts::kSystemPrompt)) {
  if (!(granularity_s > 0.0)) throw DomainError("granularity must be > 0");
  if (!(duration_s > 0.0)) throw DomainError("duration must be > 0");
  const int num_turns =
      static_cast<int>(std::llround(duration_s / granularity_s));
  if (num_turns < 1 ||
      std::abs(num_turns * granularity_s - duration_s) > 1e-9 * duration_s)
    throw DomainError("duration must be a whole number of turns");
  detail::check_events(events, duration_s);

  std::vector<TimeInterval> spans;
  spans.reserve(events.size());
  for (const auto& event : events) spans.push_back(event.span);
  const auto states = label_states(spans, num_turns, granularity_s, task);

  for (const auto& question : questions) {
    if (question.turn < 0 || question.turn >= num_turns)
      throw DomainError("question turn out of range");
    if (events.empty()) continue;
    const double question_end = (question.turn + 1) * granularity_s;
    if (task == TaskKind::EventGrounding &&
        question_end > events.front().span.start_s + 1e-9)
      throw QuestionAfterEvent("grounding instruction must precede the event");
    if (task == TaskKind::Tsqa &&
        question_end > events.front().span.end_s + 1e-9)
      throw QuestionAfterEvent("tsqa question must precede the first answer");
  }

  StreamingDialogue dialogue;
  dialogue.system_prompt = std::move(system_prompt);
  dialogue.task_kind = task;
  dialogue.turns.resize(num_turns);
  for (int k = 0; k < num_turns; ++k) {
    auto& turn = dialogue.turns[k];
    turn.interval = TimeInterval{k * granularity_s, (k + 1) * granularity_s};
    turn.frames = frames(k);
    if (turn.frames.empty())
      throw DomainError("frame provider returned no tokens for turn " +
                        std::to_string(k));
    turn.state = states[k];
    if (turn.state == StateToken::Response) {
      const double turn_start = k * granularity_s;
      const double turn_end = (k + 1) * granularity_s;
      std::string text;
      for (const auto& event : events) {
        const bool triggers =
            task == TaskKind::Narration
                ? (event.span.start_s < turn_end && event.span.end_s > turn_start)
                : (event.span.end_s > turn_start && event.span.end_s <= turn_end);
        if (!triggers) continue;
        if (!text.empty()) text += "; ";
        text += event.text;
      }
      turn.response_text = text;
    }
  }
  for (const auto& question : questions) {
    auto& slot = dialogue.turns[question.turn].user_text;
    if (slot.has_value()) {
      *slot += " " + question.text;
    } else {
      slot = question.text;
    }
  }
  validate_dialogue(dialogue);
  return dialogue;
}

}  // namespace streamo
