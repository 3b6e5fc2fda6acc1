#include <doctest.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include "streamo/synth.hpp"

using namespace streamo;

namespace {

std::string corpus_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::array<int64_t, 3> recount_states(
    const std::vector<StreamingDialogue>& dialogues) {
  std::array<int64_t, 3> counts{0, 0, 0};
  for (const auto& dialogue : dialogues)
    for (const auto& turn : dialogue.turns)
      ++counts[static_cast<size_t>(turn.state)];
  return counts;
}

// Per-turn presence features over the turn's frame ids, 3-class softmax
// regression trained by plain gradient descent. Sparse scoring keeps this
// fast: each sample touches only its few frame ids.
struct LogisticBaseline {
  int32_t vocab;
  std::vector<double> weights;  // 3 rows of vocab
  std::array<double, 3> bias{0.0, 0.0, 0.0};

  explicit LogisticBaseline(int32_t vocab_size)
      : vocab(vocab_size), weights(3 * static_cast<size_t>(vocab_size), 0.0) {}

  std::array<double, 3> scores(const std::vector<int32_t>& frames) const {
    std::array<double, 3> s = bias;
    for (int c = 0; c < 3; ++c)
      for (const auto t : frames) s[c] += weights[c * vocab + t];
    return s;
  }

  void train(const std::vector<std::vector<int32_t>>& xs,
             const std::vector<int>& ys, int iters, double lr) {
    const double inv_n = 1.0 / static_cast<double>(xs.size());
    for (int it = 0; it < iters; ++it) {
      std::vector<double> grad_w(weights.size(), 0.0);
      std::array<double, 3> grad_b{0.0, 0.0, 0.0};
      for (size_t i = 0; i < xs.size(); ++i) {
        auto s = scores(xs[i]);
        const double m = std::max({s[0], s[1], s[2]});
        double z = 0.0;
        for (int c = 0; c < 3; ++c) z += std::exp(s[c] - m);
        for (int c = 0; c < 3; ++c) {
          const double p = std::exp(s[c] - m) / z;
          const double g = (p - (c == ys[i] ? 1.0 : 0.0)) * inv_n;
          grad_b[c] += g;
          for (const auto t : xs[i]) grad_w[c * vocab + t] += g;
        }
      }
      for (size_t j = 0; j < weights.size(); ++j) weights[j] -= lr * grad_w[j];
      for (int c = 0; c < 3; ++c) bias[c] -= lr * grad_b[c];
    }
  }

  int predict(const std::vector<int32_t>& frames) const {
    const auto s = scores(frames);
    int best = 0;
    for (int c = 1; c < 3; ++c)
      if (s[c] > s[best]) best = c;
    return best;
  }
};

}  // namespace

TEST_CASE("generate_episode is deterministic and label-consistent") {
  SyntheticConfig config;
  config.seed = 42;
  const auto a = generate_episode(config);
  const auto b = generate_episode(config);
  CHECK(a.dialogue == b.dialogue);
  CHECK(a.events == b.events);
  CHECK(a.gold_states == b.gold_states);

  SUBCASE("dialogue states equal gold states turn by turn") {
    REQUIRE(a.dialogue.turns.size() == a.gold_states.size());
    for (size_t k = 0; k < a.gold_states.size(); ++k)
      CHECK(a.dialogue.turns[k].state == a.gold_states[k]);
  }
  SUBCASE("gold states equal a fresh labelling of the events") {
    std::vector<TimeInterval> spans;
    for (const auto& event : a.events) spans.push_back(event.span);
    CHECK(a.gold_states ==
          label_states(spans, config.num_turns, 1.0, TaskKind::EventCaption));
  }
  SUBCASE("different seeds differ") {
    SyntheticConfig other = config;
    other.seed = 43;
    CHECK(generate_episode(other).dialogue != a.dialogue);
  }
}

TEST_CASE("event class signals are planted in every event turn") {
  SyntheticConfig config;
  config.seed = 7;
  const auto layout = TokenLayout::standard(config.vocab_size);
  int checked_events = 0;
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    SyntheticConfig per = config;
    per.seed = seed;
    const auto episode = generate_episode(per);
    for (const auto& event : episode.events) {
      ++checked_events;
      const int first = static_cast<int>(event.span.start_s);
      const int last = static_cast<int>(event.span.end_s) - 1;
      for (int k = first; k <= last; ++k) {
        const auto& frames = episode.dialogue.turns[k].frames;
        REQUIRE(frames[0] == layout.signal_base + event.class_id);
        if (k == last)
          REQUIRE(frames[1] == layout.end_signal_id);
        else
          REQUIRE(frames[1] != layout.end_signal_id);
      }
      REQUIRE(episode.dialogue.turns[last].state == StateToken::Response);
      REQUIRE(episode.dialogue.turns[last].response_text ==
              event_caption(event.class_id));
    }
  }
  CHECK(checked_events > 50);
}

TEST_CASE("zero event rate yields pure silence") {
  SyntheticConfig config;
  config.event_rate = 0.0;
  config.seed = 5;
  const auto episode = generate_episode(config);
  CHECK(episode.events.empty());
  for (const auto state : episode.gold_states)
    CHECK(state == StateToken::Silence);
}

TEST_CASE("state counts track the 12:3:2 target at scale") {
  SyntheticConfig config;
  config.seed = 123;
  // 200 episodes of 60 turns = 12000 turns.
  const auto episodes = generate_episodes(config, 200);
  std::array<int64_t, 3> counts{0, 0, 0};
  int64_t total = 0;
  for (const auto& episode : episodes)
    for (const auto state : episode.gold_states) {
      ++counts[static_cast<size_t>(state)];
      ++total;
    }
  REQUIRE(total == 12000);
  const std::array<double, 3> want{12.0 / 17.0, 3.0 / 17.0, 2.0 / 17.0};
  for (int k = 0; k < 3; ++k) {
    const double share = static_cast<double>(counts[k]) / total;
    CHECK(std::abs(share - want[k]) <= 0.10 * want[k]);
  }
}

TEST_CASE("infeasible ratios and bad configs are rejected") {
  SyntheticConfig config;
  SUBCASE("zero response share with events flowing") {
    config.target_state_ratio = {12.0, 3.0, 0.0};
    CHECK_THROWS_AS(generate_episode(config), InfeasibleRatio);
  }
  SUBCASE("mean length above the range") {
    config.target_state_ratio = {12.0, 9.0, 3.0};
    CHECK_THROWS_AS(generate_episode(config), InfeasibleRatio);
  }
  SUBCASE("mean length below the range") {
    config.event_len_min = 3;
    CHECK_THROWS_AS(generate_episode(config), InfeasibleRatio);
  }
  SUBCASE("all-zero ratio") {
    config.target_state_ratio = {0.0, 0.0, 0.0};
    CHECK_THROWS_AS(generate_episode(config), DomainError);
  }
  SUBCASE("degenerate dimensions") {
    config.num_turns = 0;
    CHECK_THROWS_AS(generate_episode(config), DomainError);
  }
  SUBCASE("single observation slot cannot carry the completion cue") {
    config.tokens_per_turn = 1;
    CHECK_THROWS_AS(generate_episode(config), DomainError);
  }
  SUBCASE("event rate bounds") {
    config.event_rate = 1.0;
    CHECK_THROWS_AS(generate_episode(config), DomainError);
  }
  SUBCASE("tiny vocabulary") {
    config.vocab_size = 64;
    CHECK_THROWS_AS(generate_episode(config), DomainError);
  }
}

TEST_CASE("generate_corpus writes a dataset whose manifest matches a recount") {
  SyntheticConfig config;
  config.seed = 2026;
  const std::string path = "synth_corpus_test.jsonl";
  const auto manifest = generate_corpus(config, 50, path);
  CHECK(manifest.episodes == 50);
  CHECK(manifest.seed == 2026);

  const auto dialogues = read_dialogues(path);
  REQUIRE(dialogues.size() == 50);
  CHECK(recount_states(dialogues) == manifest.counts);

  SUBCASE("same seed twice is byte-identical") {
    const std::string again = "synth_corpus_test2.jsonl";
    generate_corpus(config, 50, again);
    CHECK(corpus_bytes(path) == corpus_bytes(again));
    std::remove(again.c_str());
  }
  SUBCASE("zero episodes gives an empty file and zero counts") {
    const std::string empty = "synth_corpus_empty.jsonl";
    const auto m = generate_corpus(config, 0, empty);
    CHECK(m.counts == std::array<int64_t, 3>{0, 0, 0});
    CHECK(corpus_bytes(empty).empty());
    std::remove(empty.c_str());
  }
  SUBCASE("unwritable path surfaces an IO error") {
    CHECK_THROWS_AS(generate_corpus(config, 1, "no_such_dir/x.jsonl"), IoError);
  }
  std::remove(path.c_str());
}

TEST_CASE("manifest JSON carries counts, episodes, and seed") {
  CorpusManifest manifest;
  manifest.counts = {120, 30, 20};
  manifest.episodes = 9;
  manifest.seed = 77;
  const auto doc = manifest_to_json(manifest);
  CHECK(doc["counts"]["silence"] == 120);
  CHECK(doc["counts"]["standby"] == 30);
  CHECK(doc["counts"]["response"] == 20);
  CHECK(doc["episodes"] == 9);
  CHECK(doc["seed"] == 77);
}

TEST_CASE("a one-turn logistic baseline separates the states") {
  SyntheticConfig config;
  config.seed = 900;
  std::vector<std::vector<int32_t>> train_x, test_x;
  std::vector<int> train_y, test_y;
  for (int i = 0; i < 120; ++i) {
    SyntheticConfig per = config;
    per.seed = config.seed + static_cast<uint64_t>(i);
    const auto episode = generate_episode(per);
    auto& xs = (i < 100) ? train_x : test_x;
    auto& ys = (i < 100) ? train_y : test_y;
    for (size_t k = 0; k < episode.gold_states.size(); ++k) {
      xs.push_back(episode.dialogue.turns[k].frames);
      ys.push_back(static_cast<int>(episode.gold_states[k]));
    }
  }
  LogisticBaseline baseline(config.vocab_size);
  baseline.train(train_x, train_y, 120, 2.0);
  int correct = 0;
  for (size_t i = 0; i < test_x.size(); ++i)
    if (baseline.predict(test_x[i]) == test_y[i]) ++correct;
  const double accuracy = static_cast<double>(correct) / test_x.size();
  CHECK(accuracy > 0.90);
}
