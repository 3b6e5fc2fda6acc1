#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "streamo/dialogue.hpp"
#include "streamo/errors.hpp"
#include "streamo/model.hpp"
#include "streamo/tokens.hpp"

namespace streamo {

/// Anything that can score the next token given the full history. Sessions
/// own no model; callers keep the model alive for the session's lifetime.
class TokenModel {
 public:
  virtual ~TokenModel() = default;
  virtual std::vector<double> next_logits(const std::vector<int32_t>& history) = 0;
  virtual int32_t vocab_size() const = 0;
  virtual const TokenLayout& token_layout() const = 0;
  virtual const TextCodec& text_codec() const = 0;
  virtual int context_window_turns() const = 0;
};

class ToyTokenModel : public TokenModel {
 public:
  explicit ToyTokenModel(ToyModel model) : model_(std::move(model)) {}

  std::vector<double> next_logits(const std::vector<int32_t>& history) override {
    return forward(model_, history);
  }
  int32_t vocab_size() const override { return model_.config.vocab_size; }
  const TokenLayout& token_layout() const override { return model_.layout; }
  const TextCodec& text_codec() const override { return model_.codec; }
  int context_window_turns() const override { return model_.config.context_window; }

  const ToyModel& inner() const { return model_; }

 private:
  ToyModel model_;
};

/// Oracle that replays a gold dialogue token for token: as long as the
/// session feeds it the same environment tokens the encoder would have
/// written, every decision and every content token comes straight from the
/// script. Off-script histories fall back to Silence.
class ScriptedModel : public TokenModel {
 public:
  explicit ScriptedModel(const StreamingDialogue& dialogue,
                         int32_t vocab = kDefaultVocabSize)
      : dialogue_(dialogue),
        layout_(TokenLayout::standard(vocab)),
        codec_(layout_) {
    encoded_ = encode_dialogue(dialogue_, layout_, codec_);
  }

  std::vector<double> next_logits(const std::vector<int32_t>& history) override {
    std::vector<double> logits(static_cast<size_t>(layout_.vocab_size), 0.0);
    const size_t pos = history.size();
    const int32_t id = pos < encoded_.tokens.size() ? encoded_.tokens[pos]
                                                    : layout_.silence_id;
    logits[static_cast<size_t>(id)] = 1.0;
    return logits;
  }
  int32_t vocab_size() const override { return layout_.vocab_size; }
  const TokenLayout& token_layout() const override { return layout_; }
  const TextCodec& text_codec() const override { return codec_; }
  int context_window_turns() const override {
    return std::numeric_limits<int>::max();
  }

  const StreamingDialogue& dialogue() const { return dialogue_; }

 private:
  StreamingDialogue dialogue_;
  TokenLayout layout_;
  TextCodec codec_;
  EncodedDialogue encoded_;
};

/// What overflowing the turn window does. DropOldest is experimental: it
/// abandons the append-only context guarantee by evicting the oldest turn's
/// tokens while keeping the system prompt.
enum class OverflowPolicy { Error, DropOldest };

struct EmissionRecord {
  int turn = 0;
  StateToken state = StateToken::Silence;
  std::optional<std::string> content;
  int forward_calls = 0;
  bool protocol_violation = false;

  bool operator==(const EmissionRecord&) const = default;
};

struct StateDecision {
  StateToken state = StateToken::Silence;
  std::optional<std::string> content;

  bool operator==(const StateDecision&) const = default;
};

struct StreamSession {
  TokenModel* model = nullptr;
  std::string system_prompt;
  std::vector<std::pair<std::string, int>> pending_instructions;
  std::vector<int32_t> context;
  int clock = 0;
  std::vector<EmissionRecord> emitted;
  OverflowPolicy policy = OverflowPolicy::Error;
  bool closed = false;
  int64_t total_forward_calls = 0;
  // Context index where each still-resident turn begins; the front entry is
  // the eviction point under DropOldest.
  std::vector<size_t> turn_starts;
};

inline constexpr int kMaxResponseTokens = 64;

inline StreamSession open_session(TokenModel& model,
                                  const std::string& system_prompt,
                                  OverflowPolicy policy = OverflowPolicy::Error) {
  const auto& layout = model.token_layout();
  const int32_t vocab = model.vocab_size();
  const auto in_vocab = [vocab](int32_t id) { return id >= 0 && id < vocab; };
  if (!in_vocab(layout.silence_id) || !in_vocab(layout.standby_id) ||
      !in_vocab(layout.response_id) || !in_vocab(layout.eot_id) ||
      !in_vocab(layout.marker_base) ||
      !in_vocab(layout.marker_base + layout.num_markers - 1))
    throw VocabularyMismatch(
        "model vocabulary does not cover the state, end-of-turn and marker ids");
  StreamSession session;
  session.model = &model;
  session.system_prompt = system_prompt;
  session.policy = policy;
  session.context = model.text_codec().encode_hashed(system_prompt);
  return session;
}

namespace detail {

/// Renders decoded content ids as text. Ids outside the interned content
/// block cannot decode to a word and render as "<#id>" placeholders; an
/// untrained model can produce them, the oracle never does.
inline std::string render_content(const TextCodec& codec,
                                  const std::vector<int32_t>& ids) {
  const auto& layout = codec.layout();
  std::string out;
  for (const auto id : ids) {
    if (!out.empty()) out += ' ';
    const int32_t slot = id - layout.content_base;
    if (slot >= 0 && slot < static_cast<int32_t>(codec.words().size()))
      out += codec.words()[static_cast<size_t>(slot)];
    else
      out += "<#" + std::to_string(id) + ">";
  }
  return out;
}

}  // namespace detail

inline StateDecision push_segment(StreamSession& session,
                                  const std::vector<int32_t>& frames,
                                  const std::optional<std::string>& user_text =
                                      std::nullopt) {
  if (session.closed) throw SessionClosed("push_segment after close");
  if (frames.empty()) throw DomainError("frames must be non-empty");
  TokenModel& model = *session.model;
  const auto& layout = model.token_layout();
  const int32_t vocab = model.vocab_size();
  for (const auto id : frames)
    if (id < 0 || id >= vocab)
      throw IdOutOfRange("frame id " + std::to_string(id) +
                         " outside vocabulary");

  const int window = model.context_window_turns();
  if (static_cast<int>(session.turn_starts.size()) >= window) {
    if (session.policy == OverflowPolicy::Error)
      throw ContextOverflow("turn window of " + std::to_string(window) +
                            " exhausted at clock " +
                            std::to_string(session.clock));
    // DropOldest: evict the oldest resident turn, keeping the system prompt.
    const size_t from = session.turn_starts.front();
    const size_t to = session.turn_starts.size() > 1 ? session.turn_starts[1]
                                                     : session.context.size();
    session.context.erase(session.context.begin() + static_cast<long>(from),
                          session.context.begin() + static_cast<long>(to));
    session.turn_starts.erase(session.turn_starts.begin());
    const size_t shift = to - from;
    for (auto& start : session.turn_starts) start -= shift;
  }

  session.turn_starts.push_back(session.context.size());
  session.context.push_back(layout.marker_for_turn(session.clock));
  session.context.insert(session.context.end(), frames.begin(), frames.end());
  if (user_text) {
    const auto user = model.text_codec().encode_hashed(*user_text);
    session.context.insert(session.context.end(), user.begin(), user.end());
    session.pending_instructions.emplace_back(*user_text, session.clock);
  }

  const auto ids = layout.state_ids();
  const auto state_logits = model.next_logits(session.context);
  int calls = 1;
  const int pred = detail::argmax_restricted(state_logits, ids);
  const auto state = static_cast<StateToken>(pred);
  session.context.push_back(ids[static_cast<size_t>(pred)]);

  StateDecision decision;
  decision.state = state;
  EmissionRecord record;
  record.turn = session.clock;
  record.state = state;
  if (state == StateToken::Response) {
    std::vector<int32_t> content_ids;
    bool closed = false;
    for (int i = 0; i < kMaxResponseTokens; ++i) {
      const auto tok = detail::argmax_full(model.next_logits(session.context));
      ++calls;
      session.context.push_back(tok);
      if (tok == layout.eot_id) {
        closed = true;
        break;
      }
      content_ids.push_back(tok);
    }
    if (!closed) session.context.push_back(layout.eot_id);
    const auto text = detail::render_content(model.text_codec(), content_ids);
    decision.content = text;
    record.content = text;
    record.protocol_violation = content_ids.empty();
  }
  record.forward_calls = calls;
  session.total_forward_calls += calls;
  session.emitted.push_back(record);
  ++session.clock;
  return decision;
}

inline void close_session(StreamSession& session) { session.closed = true; }

struct ReplayResult {
  std::vector<StateDecision> decisions;
  std::vector<EmissionRecord> emissions;
  std::vector<StateToken> gold;
  // match[k] is 1 when the decision at turn k equals the gold state.
  std::vector<uint8_t> match;
  int64_t mismatches = 0;
  // Greedy (gold, predicted) Response turn pairs within one turn, and the
  // signed offsets predicted - gold for each pair.
  std::vector<std::pair<int, int>> timing_pairs;
  std::vector<int> timing_offsets;
  double timing_f1 = 0.0;
};

/// Feeds a recorded dialogue through a fresh session turn by turn. The
/// model free-runs: its own state decisions and content stay in context, the
/// dialogue only supplies prompts, frames and user text.
inline ReplayResult replay(TokenModel& model, const StreamingDialogue& dialogue,
                           OverflowPolicy policy = OverflowPolicy::Error) {
  validate_dialogue(dialogue);
  auto session = open_session(model, dialogue.system_prompt, policy);
  ReplayResult result;
  std::vector<int> gold_rsp, pred_rsp;
  for (size_t k = 0; k < dialogue.turns.size(); ++k) {
    const auto& turn = dialogue.turns[k];
    const auto decision = push_segment(session, turn.frames, turn.user_text);
    result.decisions.push_back(decision);
    result.gold.push_back(turn.state);
    const bool ok = decision.state == turn.state;
    result.match.push_back(ok ? 1 : 0);
    if (!ok) ++result.mismatches;
    if (turn.state == StateToken::Response)
      gold_rsp.push_back(static_cast<int>(k));
    if (decision.state == StateToken::Response)
      pred_rsp.push_back(static_cast<int>(k));
  }
  close_session(session);
  result.emissions = session.emitted;
  result.timing_pairs = detail::match_response_pairs(gold_rsp, pred_rsp, 1);
  for (const auto& [g, p] : result.timing_pairs)
    result.timing_offsets.push_back(p - g);
  // 2tp / (2tp + fp + fn) collapses to 2tp / (|gold| + |pred|).
  const int64_t tp = static_cast<int64_t>(result.timing_pairs.size());
  const int64_t denom = static_cast<int64_t>(gold_rsp.size()) +
                        static_cast<int64_t>(pred_rsp.size());
  result.timing_f1 = denom == 0
                         ? 1.0
                         : 2.0 * static_cast<double>(tp) /
                               static_cast<double>(denom);
  return result;
}

}  // namespace streamo
