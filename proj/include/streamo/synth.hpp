#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamo/dialogue.hpp"
#include "streamo/dialogue_json.hpp"
#include "streamo/errors.hpp"
#include "streamo/tokens.hpp"

namespace streamo {

/// The eight event classes the generator can plant. Captions reuse these
/// words so the content vocabulary stays small and deterministic.
inline constexpr std::array<std::string_view, 8> kEventClassWords{
    "kettle", "doorbell", "phone", "printer",
    "toaster", "alarm",    "washer", "microwave"};

inline constexpr std::string_view kSynthSystemPrompt =
    "Watch the stream and stay silent. When an event finishes, caption it at "
    "once.";

/// Defaults reproduce the 12:3:2 state imbalance: geometric silence gaps of
/// mean 6 turns (rate 1/7) and event lengths mixed over {2,3} with mean 2.5,
/// giving one Response and 1.5 Standby turns per event.
struct SyntheticConfig {
  int32_t vocab_size = 256;
  int num_turns = 60;
  int tokens_per_turn = 4;
  double event_rate = 1.0 / 7.0;
  int event_len_min = 2;
  int event_len_max = 3;
  std::array<double, 3> target_state_ratio{12.0, 3.0, 2.0};
  uint64_t seed = 1;
};

struct ClassedEvent {
  TimeInterval span;
  int class_id = 0;

  bool operator==(const ClassedEvent&) const = default;
};

struct SyntheticEpisode {
  StreamingDialogue dialogue;
  std::vector<ClassedEvent> events;
  std::vector<StateToken> gold_states;
};

namespace detail {

struct RatioPlan {
  double mean_len;
  double p_short;  // probability of event_len_min
};

inline RatioPlan plan_ratio(const SyntheticConfig& config) {
  const auto& r = config.target_state_ratio;
  for (const double v : r)
    if (v < 0.0) throw DomainError("state ratio entries must be >= 0");
  if (r[0] + r[1] + r[2] <= 0.0)
    throw DomainError("state ratio must not be all zero");
  if (config.event_rate == 0.0) return {0.0, 1.0};
  if (r[2] <= 0.0)
    throw InfeasibleRatio(
        "nonzero event rate requires a nonzero Response share");
  const double mean_len = 1.0 + r[1] / r[2];
  if (mean_len < config.event_len_min || mean_len > config.event_len_max)
    throw InfeasibleRatio(
        "ratio needs mean event length " + std::to_string(mean_len) +
        ", outside [" + std::to_string(config.event_len_min) + ", " +
        std::to_string(config.event_len_max) + "] turns");
  double p_short = 1.0;
  if (config.event_len_max > config.event_len_min)
    p_short = (config.event_len_max - mean_len) /
              static_cast<double>(config.event_len_max - config.event_len_min);
  return {mean_len, p_short};
}

inline void check_synth_config(const SyntheticConfig& config) {
  if (config.num_turns < 1) throw DomainError("num_turns must be >= 1");
  if (config.event_len_min < 1) throw DomainError("event_len_min must be >= 1");
  if (config.event_len_max < config.event_len_min)
    throw DomainError("event_len_max must be >= event_len_min");
  if (config.event_rate < 0.0 || config.event_rate >= 1.0)
    throw DomainError("event_rate must lie in [0, 1)");
  // The final event turn carries the class signal plus the completion cue.
  const int min_tokens = config.event_rate > 0.0 ? 2 : 1;
  if (config.tokens_per_turn < min_tokens)
    throw DomainError("tokens_per_turn must be >= " +
                      std::to_string(min_tokens));
  TokenLayout::standard(config.vocab_size);
}

}  // namespace detail

/// Interns every caption word up front so any two codecs built this way
/// agree on content ids regardless of which episodes they saw.
inline TextCodec make_synth_codec(const TokenLayout& layout) {
  TextCodec codec(layout);
  for (const auto word : kEventClassWords)
    codec.intern_word(std::string(word));
  codec.intern_word("the");
  codec.intern_word("just");
  codec.intern_word("finished");
  return codec;
}

inline std::string event_caption(int class_id) {
  if (class_id < 0 || class_id >= static_cast<int>(kEventClassWords.size()))
    throw IdOutOfRange("event class " + std::to_string(class_id));
  return "the " + std::string(kEventClassWords[class_id]) + " just finished";
}

inline SyntheticEpisode generate_episode(const SyntheticConfig& config) {
  detail::check_synth_config(config);
  const auto plan = detail::plan_ratio(config);
  const auto layout = TokenLayout::standard(config.vocab_size);
  std::mt19937_64 rng(config.seed);

  std::vector<ClassedEvent> events;
  if (config.event_rate > 0.0) {
    std::geometric_distribution<int> gap_dist(config.event_rate);
    std::uniform_real_distribution<double> coin(0.0, 1.0);
    std::uniform_int_distribution<int> class_dist(
        0, static_cast<int>(kEventClassWords.size()) - 1);
    int cursor = 0;
    while (true) {
      cursor += gap_dist(rng);
      if (cursor >= config.num_turns) break;
      // Events crossing the horizon are clipped, not dropped; dropping them
      // starves Standby and Response counts at episode tails.
      int len = coin(rng) < plan.p_short ? config.event_len_min
                                         : config.event_len_max;
      if (cursor + len > config.num_turns) len = config.num_turns - cursor;
      events.push_back({TimeInterval{static_cast<double>(cursor),
                                     static_cast<double>(cursor + len)},
                        class_dist(rng)});
      cursor += len;
    }
  }

  // Frames: noise everywhere, the class signal leading every event turn, and
  // the completion cue in the event's last turn.
  std::uniform_int_distribution<int32_t> noise_dist(layout.noise_begin,
                                                    layout.noise_end - 1);
  std::vector<std::vector<int32_t>> frames(config.num_turns);
  for (int k = 0; k < config.num_turns; ++k) {
    auto& slots = frames[k];
    slots.reserve(config.tokens_per_turn);
    for (int i = 0; i < config.tokens_per_turn; ++i)
      slots.push_back(noise_dist(rng));
    for (const auto& event : events) {
      const double lo = k;
      const double hi = k + 1;
      if (!(event.span.start_s < hi && event.span.end_s > lo)) continue;
      slots[0] = layout.signal_base + event.class_id;
      const bool last_turn = event.span.end_s > lo && event.span.end_s <= hi;
      if (last_turn) slots[1] = layout.end_signal_id;
      break;
    }
  }

  std::vector<EventSpan> spans;
  for (const auto& event : events)
    spans.push_back({event.span, event_caption(event.class_id)});

  SyntheticEpisode episode;
  episode.dialogue = build_dialogue(
      static_cast<double>(config.num_turns), 1.0, spans, TaskKind::EventCaption,
      {}, [&frames](int k) { return frames[static_cast<size_t>(k)]; },
      std::string(kSynthSystemPrompt));
  episode.events = std::move(events);
  std::vector<TimeInterval> bare;
  for (const auto& event : episode.events) bare.push_back(event.span);
  episode.gold_states =
      label_states(bare, config.num_turns, 1.0, TaskKind::EventCaption);
  return episode;
}

struct CorpusManifest {
  std::array<int64_t, 3> counts{0, 0, 0};  // silence, standby, response
  int64_t episodes = 0;
  uint64_t seed = 0;
};

inline json manifest_to_json(const CorpusManifest& manifest) {
  json doc;
  doc["counts"]["silence"] = manifest.counts[0];
  doc["counts"]["standby"] = manifest.counts[1];
  doc["counts"]["response"] = manifest.counts[2];
  doc["episodes"] = manifest.episodes;
  doc["seed"] = manifest.seed;
  return doc;
}

/// Episode seeds are config.seed + index, so corpora are deterministic and
/// episodes can be regenerated independently.
inline std::vector<SyntheticEpisode> generate_episodes(
    const SyntheticConfig& config, int64_t num_episodes) {
  if (num_episodes < 0) throw DomainError("num_episodes must be >= 0");
  std::vector<SyntheticEpisode> episodes;
  episodes.reserve(static_cast<size_t>(num_episodes));
  for (int64_t i = 0; i < num_episodes; ++i) {
    SyntheticConfig per = config;
    per.seed = config.seed + static_cast<uint64_t>(i);
    episodes.push_back(generate_episode(per));
  }
  return episodes;
}

inline CorpusManifest generate_corpus(const SyntheticConfig& config,
                                      int64_t num_episodes,
                                      const std::string& dataset_path) {
  const auto episodes = generate_episodes(config, num_episodes);
  std::vector<StreamingDialogue> dialogues;
  CorpusManifest manifest;
  manifest.episodes = num_episodes;
  manifest.seed = config.seed;
  for (const auto& episode : episodes) {
    dialogues.push_back(episode.dialogue);
    for (const auto state : episode.gold_states)
      ++manifest.counts[static_cast<size_t>(state)];
  }
  write_dialogues(dataset_path, dialogues);
  return manifest;
}

}  // namespace streamo
