#pragma once

#include <array>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "streamo/dialogue.hpp"
#include "streamo/errors.hpp"
#include "streamo/state.hpp"

namespace streamo {

inline constexpr int32_t kDefaultVocabSize = 256;

/// Fixed carve-up of the vocabulary. The top three ids are the state tokens
/// and the markers form one contiguous block; everything below the reserved
/// region is noise space for synthetic observations.
///
///   [0]                  pad
///   [1, end_signal)      noise observations
///   end_signal           generic completion cue planted in an event's last turn
///   [signal, +8)         per-class event signals
///   [content, +32)       interned words (assistant text, invertible)
///   [hashed, +32)        hashed words (system/user text, lossy)
///   [marker, +64)        turn markers, one per turn index modulo 64
///   eot                  end of a Response turn
///   [V-3, V)             silence, standby, response
struct TokenLayout {
  int32_t vocab_size = 0;
  int32_t pad_id = 0;
  int32_t noise_begin = 0;
  int32_t noise_end = 0;
  int32_t end_signal_id = 0;
  int32_t signal_base = 0;
  int32_t num_signals = 0;
  int32_t content_base = 0;
  int32_t num_content = 0;
  int32_t hashed_base = 0;
  int32_t num_hashed = 0;
  int32_t marker_base = 0;
  int32_t num_markers = 0;
  int32_t eot_id = 0;
  int32_t silence_id = 0;
  int32_t standby_id = 0;
  int32_t response_id = 0;

  static TokenLayout standard(int32_t vocab_size) {
    // 141 reserved ids above the noise block plus pad.
    if (vocab_size < 160)
      throw DomainError("vocab_size must be >= 160, got " +
                        std::to_string(vocab_size));
    TokenLayout l;
    l.vocab_size = vocab_size;
    l.pad_id = 0;
    l.response_id = vocab_size - 1;
    l.standby_id = vocab_size - 2;
    l.silence_id = vocab_size - 3;
    l.eot_id = vocab_size - 4;
    l.num_markers = 64;
    l.marker_base = l.eot_id - l.num_markers;
    l.num_hashed = 32;
    l.hashed_base = l.marker_base - l.num_hashed;
    l.num_content = 32;
    l.content_base = l.hashed_base - l.num_content;
    l.num_signals = 8;
    l.signal_base = l.content_base - l.num_signals;
    l.end_signal_id = l.signal_base - 1;
    l.noise_begin = 1;
    l.noise_end = l.end_signal_id;
    return l;
  }

  int32_t state_id(StateToken state) const {
    switch (state) {
      case StateToken::Silence:
        return silence_id;
      case StateToken::Standby:
        return standby_id;
      case StateToken::Response:
        return response_id;
    }
    return silence_id;
  }

  std::optional<StateToken> state_of(int32_t id) const {
    if (id == silence_id) return StateToken::Silence;
    if (id == standby_id) return StateToken::Standby;
    if (id == response_id) return StateToken::Response;
    return std::nullopt;
  }

  std::array<int32_t, 3> state_ids() const {
    return {silence_id, standby_id, response_id};
  }

  // Marker ids repeat after num_markers turns; position in context carries
  // the rest of the ordering.
  int32_t marker_for_turn(int turn) const {
    if (turn < 0) throw IdOutOfRange("turn index must be >= 0");
    return marker_base + (turn % num_markers);
  }
};

/// Word-level codec over the layout's two text blocks. Assistant content is
/// interned first-come so decoding is exact; system and user text hash into
/// a fixed block and never decode back.
class TextCodec {
 public:
  explicit TextCodec(const TokenLayout& layout) : layout_(layout) {}

  int32_t intern_word(const std::string& word) {
    auto it = index_.find(word);
    if (it != index_.end()) return it->second;
    if (static_cast<int32_t>(words_.size()) >= layout_.num_content)
      throw IdOutOfRange("content vocabulary full (" +
                         std::to_string(layout_.num_content) + " words)");
    const int32_t id = layout_.content_base + static_cast<int32_t>(words_.size());
    words_.push_back(word);
    index_.emplace(word, id);
    return id;
  }

  std::vector<int32_t> encode_content(std::string_view text) {
    std::vector<int32_t> ids;
    for (const auto& word : split_words(text)) ids.push_back(intern_word(word));
    return ids;
  }

  std::string decode_content(const std::vector<int32_t>& ids) const {
    std::string out;
    for (const auto id : ids) {
      const int32_t slot = id - layout_.content_base;
      if (slot < 0 || slot >= static_cast<int32_t>(words_.size()))
        throw IdOutOfRange("id " + std::to_string(id) +
                           " is not an interned content word");
      if (!out.empty()) out += ' ';
      out += words_[static_cast<size_t>(slot)];
    }
    return out;
  }

  std::vector<int32_t> encode_hashed(std::string_view text) const {
    std::vector<int32_t> ids;
    for (const auto& word : split_words(text))
      ids.push_back(layout_.hashed_base +
                    static_cast<int32_t>(fnv1a(word) %
                                         static_cast<uint64_t>(layout_.num_hashed)));
    return ids;
  }

  const std::vector<std::string>& words() const { return words_; }
  const TokenLayout& layout() const { return layout_; }

  static std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> words;
    size_t i = 0;
    while (i < text.size()) {
      while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
        ++i;
      size_t j = i;
      while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])))
        ++j;
      if (j > i) words.emplace_back(text.substr(i, j - i));
      i = j;
    }
    return words;
  }

 private:
  static uint64_t fnv1a(std::string_view word) {
    uint64_t hash = 14695981039346656037ull;
    for (const char c : word) {
      hash ^= static_cast<unsigned char>(c);
      hash *= 1099511628211ull;
    }
    return hash;
  }

  TokenLayout layout_;
  std::vector<std::string> words_;
  std::map<std::string, int32_t> index_;
};

/// Teacher-forced token stream for one dialogue, with the supervision mask
/// over assistant-owned positions (state token, content words, end of turn).
struct EncodedDialogue {
  std::vector<int32_t> tokens;
  std::vector<uint8_t> assistant;
  // Index of each turn's first token (its marker) and of its state token.
  std::vector<size_t> turn_begin;
  std::vector<size_t> state_pos;
};

inline EncodedDialogue encode_dialogue(const StreamingDialogue& dialogue,
                                       const TokenLayout& layout,
                                       TextCodec& codec) {
  validate_dialogue(dialogue);
  EncodedDialogue enc;
  auto put = [&](int32_t id, bool assistant_owned) {
    if (id < 0 || id >= layout.vocab_size)
      throw IdOutOfRange("token id " + std::to_string(id) +
                         " outside vocabulary");
    enc.tokens.push_back(id);
    enc.assistant.push_back(assistant_owned ? 1 : 0);
  };
  for (const auto id : codec.encode_hashed(dialogue.system_prompt))
    put(id, false);
  for (size_t k = 0; k < dialogue.turns.size(); ++k) {
    const auto& turn = dialogue.turns[k];
    enc.turn_begin.push_back(enc.tokens.size());
    put(layout.marker_for_turn(static_cast<int>(k)), false);
    for (const auto frame : turn.frames) put(frame, false);
    if (turn.user_text.has_value())
      for (const auto id : codec.encode_hashed(*turn.user_text)) put(id, false);
    enc.state_pos.push_back(enc.tokens.size());
    put(layout.state_id(turn.state), true);
    if (turn.state == StateToken::Response) {
      for (const auto id : codec.encode_content(*turn.response_text))
        put(id, true);
      put(layout.eot_id, true);
    }
  }
  return enc;
}

}  // namespace streamo
