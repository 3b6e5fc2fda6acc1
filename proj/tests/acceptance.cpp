#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "streamo/checkpoint.hpp"
#include "streamo/dialogue.hpp"
#include "streamo/dialogue_json.hpp"
#include "streamo/engine.hpp"
#include "streamo/judge.hpp"
#include "streamo/loss.hpp"
#include "streamo/metrics.hpp"
#include "streamo/model.hpp"
#include "streamo/synth.hpp"

// Release gate. Each criterion prints a single PASS or FAIL line with its
// wall time; the process exits with the number of failures. Checks use
// local reference implementations rather than library internals wherever a
// value can be recomputed independently.

namespace {

using namespace streamo;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool ok = true;
  std::string detail;
};

Outcome fail(std::string detail) { return {false, std::move(detail)}; }

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

std::string fmt(const char* pattern, double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), pattern, v);
  return buffer;
}

// Shared across criteria 6 and 7 so the corpus is generated once.
const std::vector<StreamingDialogue>& default_corpus() {
  static const std::vector<StreamingDialogue> corpus = [] {
    SyntheticConfig config;
    std::vector<StreamingDialogue> out;
    for (const auto& ep : generate_episodes(config, 200))
      out.push_back(ep.dialogue);
    return out;
  }();
  return corpus;
}

// ---------------------------------------------------------------------------
// 1. Focal mode with gamma 0 and uniform class counts collapses to plain
//    masked cross entropy.

LossBatch random_batch(std::mt19937_64& rng, int32_t vocab,
                       const std::array<int32_t, 3>& ids, int per_state,
                       int ordinary) {
  LossBatch batch;
  batch.vocab_size = vocab;
  std::vector<int32_t> targets;
  for (int k = 0; k < 3; ++k)
    for (int c = 0; c < per_state; ++c) targets.push_back(ids[k]);
  std::uniform_int_distribution<int32_t> any(0, vocab - 1);
  for (int c = 0; c < ordinary; ++c) {
    int32_t t = any(rng);
    while (t == ids[0] || t == ids[1] || t == ids[2]) t = any(rng);
    targets.push_back(t);
  }
  std::shuffle(targets.begin(), targets.end(), rng);
  std::normal_distribution<double> z(0.0, 2.0);
  batch.targets = targets;
  batch.logits.resize(targets.size() * static_cast<size_t>(vocab));
  for (auto& v : batch.logits) v = z(rng);
  std::bernoulli_distribution keep(0.8);
  batch.mask.resize(targets.size());
  for (size_t i = 0; i < targets.size(); ++i) {
    const bool special = targets[i] == ids[0] || targets[i] == ids[1] ||
                         targets[i] == ids[2];
    // State rows stay masked in so per-state counts keep their uniformity.
    batch.mask[i] = special ? 1 : (keep(rng) ? 1 : 0);
  }
  if (std::count(batch.mask.begin(), batch.mask.end(), 1) == 0)
    batch.mask[0] = 1;
  return batch;
}

Outcome criterion_loss_reduction() {
  std::mt19937_64 rng(101);
  const std::array<int32_t, 3> ids{5, 6, 7};
  for (int b = 0; b < 100; ++b) {
    const auto batch = random_batch(rng, 16, ids, 2 + b % 3, 6);
    LossConfig focal;
    focal.mode = LossMode::Focal;
    focal.gamma = 0.0;
    focal.special_token_ids = ids;
    LossConfig plain;
    plain.mode = LossMode::PlainCe;
    plain.special_token_ids = ids;
    const double f = batch_loss(batch, focal).total;
    const double p = batch_loss(batch, plain).total;
    if (rel_err(f, p) > 1e-12)
      return fail("batch " + std::to_string(b) + ": focal " + fmt("%.17g", f) +
                  " vs plain " + fmt("%.17g", p));
  }
  return {};
}

// ---------------------------------------------------------------------------
// 2. Balancing weights conserve total mass; the 12:3:2 triple lands on the
//    exact rationals 17/36, 17/9, 17/6.

Outcome criterion_alpha_conservation() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int64_t> n(1, 1000000);
  for (int t = 0; t < 1000; ++t) {
    const std::array<int64_t, 3> counts{n(rng), n(rng), n(rng)};
    const auto alpha = alpha_weights(counts);
    double weighted = 0.0, total = 0.0;
    for (int k = 0; k < 3; ++k) {
      weighted += alpha[static_cast<size_t>(k)] *
                  static_cast<double>(counts[static_cast<size_t>(k)]);
      total += static_cast<double>(counts[static_cast<size_t>(k)]);
    }
    if (std::abs(weighted - total) / total > 1e-12)
      return fail("trial " + std::to_string(t) + ": weighted mass " +
                  fmt("%.17g", weighted) + " vs " + fmt("%.17g", total));
  }
  const auto alpha = alpha_weights({12, 3, 2});
  if (alpha[0] != 17.0 / 36.0 || alpha[1] != 17.0 / 9.0 ||
      alpha[2] != 17.0 / 6.0)
    return fail("12:3:2 gave " + fmt("%.17g", alpha[0]) + ", " +
                fmt("%.17g", alpha[1]) + ", " + fmt("%.17g", alpha[2]));
  return {};
}

// ---------------------------------------------------------------------------
// 3. Analytic gradients agree with central finite differences, both at the
//    logit level and through the whole toy model.

Outcome criterion_gradients() {
  const std::array<int32_t, 3> ids{3, 4, 5};
  std::mt19937_64 rng(303);
  const std::array<LossMode, 3> modes{LossMode::Focal, LossMode::FixedScale,
                                      LossMode::PlainCe};
  for (const auto mode : modes) {
    LossConfig config;
    config.mode = mode;
    config.special_token_ids = ids;
    if (mode == LossMode::FixedScale) config.fixed_weights = {{0.3, 1.3, 2.0}};
    for (int b = 0; b < 10; ++b) {
      const auto batch = random_batch(rng, 12, ids, 1 + b % 3, 4);
      const auto analytic = batch_loss_grad(batch, config);
      const double eps = 1e-4;
      LossBatch probe = batch;
      double worst = 0.0;
      for (size_t i = 0; i < batch.logits.size(); ++i) {
        probe.logits[i] = batch.logits[i] + eps;
        const double up = batch_loss(probe, config).total;
        probe.logits[i] = batch.logits[i] - eps;
        const double down = batch_loss(probe, config).total;
        probe.logits[i] = batch.logits[i];
        worst = std::max(worst, rel_err(analytic[i], (up - down) / (2.0 * eps)));
      }
      if (worst > 1e-5)
        return fail(std::string(loss_mode_name(mode)) + " batch " +
                    std::to_string(b) + ": logit gradient error " +
                    fmt("%.3g", worst));
    }
  }

  // End to end through the transformer on a two-turn dialogue.
  ToyModelConfig model_config;
  model_config.vocab_size = 160;
  model_config.embed_dim = 8;
  model_config.hidden_dim = 12;
  model_config.optimizer.seed = 11;
  ToyModel model(model_config);
  const auto dialogue = build_dialogue(
      2.0, 1.0, {{{0.5, 2.0}, "light turned green"}}, TaskKind::EventCaption);
  const auto encoded = encode_dialogue(dialogue, model.layout, model.codec);
  const size_t vocab = static_cast<size_t>(model_config.vocab_size);

  const auto batch_for = [&](const ToyModel& m) {
    LossBatch batch;
    batch.vocab_size = m.config.vocab_size;
    const auto logits = full_forward(m, encoded.tokens);
    streamo::detail::append_next_token_rows(logits, encoded, vocab, batch);
    return batch;
  };

  for (const auto mode : modes) {
    LossConfig config;
    config.mode = mode;
    config.special_token_ids = model.layout.state_ids();
    if (mode == LossMode::FixedScale) config.fixed_weights = {{0.3, 1.3, 2.0}};

    streamo::detail::ForwardCache cache;
    const auto logits =
        streamo::detail::model_forward(model, encoded.tokens, &cache);
    LossBatch batch;
    batch.vocab_size = model.config.vocab_size;
    streamo::detail::append_next_token_rows(logits, encoded, vocab, batch);
    const auto d_rows = batch_loss_grad(batch, config);
    const size_t T = encoded.tokens.size();
    std::vector<double> d_logits(T * vocab, 0.0);
    for (size_t i = 0; i + 1 < T; ++i)
      std::copy(d_rows.begin() + static_cast<long>(i * vocab),
                d_rows.begin() + static_cast<long>((i + 1) * vocab),
                d_logits.begin() + static_cast<long>(i * vocab));
    std::vector<double> analytic(model.params.size(), 0.0);
    streamo::detail::model_backward(model, encoded.tokens, cache, d_logits,
                                    analytic);

    const double eps = 1e-4;
    double worst = 0.0;
    for (size_t i = 0; i < model.params.size(); ++i) {
      const double saved = model.params[i];
      model.params[i] = saved + eps;
      const double up = batch_loss(batch_for(model), config).total;
      model.params[i] = saved - eps;
      const double down = batch_loss(batch_for(model), config).total;
      model.params[i] = saved;
      worst = std::max(worst, rel_err(analytic[i], (up - down) / (2.0 * eps)));
    }
    if (worst > 1e-4)
      return fail(std::string(loss_mode_name(mode)) +
                  ": parameter gradient error " + fmt("%.3g", worst));
  }
  return {};
}

// ---------------------------------------------------------------------------
// 4. Interval and question scoring agree exactly with brute-force local
//    references, and question scores never drop as the tolerance widens.

double oracle_iou(const TimeInterval& a, const TimeInterval& b) {
  const double inter =
      std::max(0.0, std::min(a.end_s, b.end_s) - std::max(a.start_s, b.start_s));
  if (inter <= 0.0) return 0.0;
  const double cover =
      std::max(a.end_s, b.end_s) - std::min(a.start_s, b.start_s);
  return inter / cover;
}

std::string oracle_normalize(const std::string& raw) {
  size_t lo = 0, hi = raw.size();
  while (lo < hi && std::isspace(static_cast<unsigned char>(raw[lo]))) ++lo;
  while (hi > lo && std::isspace(static_cast<unsigned char>(raw[hi - 1]))) --hi;
  std::string s = raw.substr(lo, hi - lo);
  if (s.size() >= 3 && std::isalpha(static_cast<unsigned char>(s[0])) &&
      (s[1] == '.' || s[1] == ')') && s[2] == ' ') {
    size_t skip = 3;
    while (skip < s.size() && std::isspace(static_cast<unsigned char>(s[skip])))
      ++skip;
    s = s.substr(skip);
  }
  std::string out;
  bool in_space = false;
  for (const char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out.push_back(' ');
    in_space = false;
    out.push_back(static_cast<char>(
        std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

struct OracleTsqa {
  double accuracy = 0.0;
  double recall = 0.0;
};

OracleTsqa oracle_tsqa(const std::vector<TsqaItem>& items, double delta_t) {
  int64_t matched = 0, gold_total = 0;
  double recall_sum = 0.0;
  for (const auto& item : items) {
    int64_t hit = 0;
    for (const auto& gold : item.gold_answers) {
      bool found = false;
      for (const auto& pred : item.predictions)
        if (oracle_normalize(pred.value) == oracle_normalize(gold.value) &&
            std::abs(pred.time - gold.time) <= delta_t)
          found = true;
      if (found) ++hit;
    }
    matched += hit;
    gold_total += static_cast<int64_t>(item.gold_answers.size());
    recall_sum += static_cast<double>(hit) /
                  static_cast<double>(item.gold_answers.size());
  }
  OracleTsqa out;
  out.accuracy = static_cast<double>(matched) / static_cast<double>(gold_total);
  out.recall = recall_sum / static_cast<double>(items.size());
  return out;
}

Outcome criterion_metric_oracles() {
  if (iou({2.0, 5.0}, {3.0, 6.0}) != 0.5)
    return fail("hand case [2,5] vs [3,6] is not 0.5");
  if (iou({2.0, 5.0}, {2.0, 5.0}) != 1.0) return fail("identity is not 1");
  if (iou({0.0, 1.0}, {2.0, 3.0}) != 0.0) return fail("disjoint is not 0");

  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> start(0.0, 50.0);
  std::uniform_real_distribution<double> len(0.1, 20.0);

  for (int t = 0; t < 1000; ++t) {
    std::vector<GroundingItem> items;
    double expected_sum = 0.0;
    for (int i = 0; i < 50; ++i) {
      GroundingItem item;
      item.query_text = "q";
      item.direction = i % 2 ? GroundingDirection::Backward
                             : GroundingDirection::Forward;
      const double gs = start(rng);
      item.gold = {gs, gs + len(rng)};
      if (i % 7 != 0) {
        const double ps = start(rng);
        item.prediction = TimeInterval{ps, ps + len(rng)};
        expected_sum += oracle_iou(item.gold, *item.prediction);
      }
      items.push_back(item);
    }
    const double expected = expected_sum / 50.0;
    const double got = mean_iou(items);
    if (got != expected)
      return fail("trial " + std::to_string(t) + ": mean iou " +
                  fmt("%.17g", got) + " vs oracle " + fmt("%.17g", expected));
  }

  const std::vector<std::string> pool = {"red",    "Green",     "blue car",
                                         "A. stop", "open door", "two words"};
  std::uniform_int_distribution<size_t> pick(0, pool.size() - 1);
  std::uniform_int_distribution<int> m_dist(2, 5), n_dist(0, 8);
  std::uniform_real_distribution<double> gap(0.5, 4.0), t0(0.0, 5.0);
  std::uniform_real_distribution<double> any_time(0.0, 30.0);
  const std::array<double, 4> deltas{0.0, 1.0, 3.0, 5.0};

  for (int t = 0; t < 1000; ++t) {
    std::vector<TsqaItem> items;
    const int item_count = 1 + t % 3;
    for (int i = 0; i < item_count; ++i) {
      TsqaItem item;
      item.question = "what changes";
      double at = t0(rng);
      const int m = m_dist(rng);
      for (int g = 0; g < m; ++g) {
        item.gold_answers.push_back({pool[pick(rng)], at});
        at += gap(rng);
      }
      const int n = n_dist(rng);
      for (int p = 0; p < n; ++p)
        item.predictions.push_back({pool[pick(rng)], any_time(rng)});
      items.push_back(item);
    }
    const double delta = deltas[static_cast<size_t>(t % 4)];
    const auto got = tsqa_score(items, delta);
    const auto expected = oracle_tsqa(items, delta);
    if (got.accuracy != expected.accuracy || got.recall != expected.recall)
      return fail("trial " + std::to_string(t) + ": got " +
                  fmt("%.17g", got.accuracy) + "/" + fmt("%.17g", got.recall) +
                  " vs oracle " + fmt("%.17g", expected.accuracy) + "/" +
                  fmt("%.17g", expected.recall));

    const auto wider = tsqa_score(items, delta + 1.7);
    if (wider.accuracy < got.accuracy || wider.recall < got.recall)
      return fail("trial " + std::to_string(t) +
                  ": widening the tolerance lowered a score");
  }
  return {};
}

// ---------------------------------------------------------------------------
// 5. The documented five-turn dialogue comes out of the builder exactly, and
//    an oracle checkpoint replays it bit for bit.

std::string emission_log(const ReplayResult& replayed) {
  std::ostringstream out;
  for (const auto& e : replayed.emissions) {
    out << e.turn << ' ' << state_surface(e.state) << ' '
        << e.forward_calls << ' ' << (e.content ? *e.content : "-") << '\n';
  }
  return out.str();
}

Outcome criterion_canonical_trace() {
  const std::vector<EventSpan> events = {
      {{3.0, 5.0}, "The light just turned green."}};
  const std::vector<QuestionInsert> questions = {
      {"Notify me when the light turns green.", 1}};
  const auto dialogue = build_dialogue(5.0, 1.0, events,
                                       TaskKind::EventGrounding, questions);
  const std::array<StateToken, 5> gold{StateToken::Silence, StateToken::Silence,
                                       StateToken::Silence, StateToken::Standby,
                                       StateToken::Response};
  if (dialogue.turns.size() != 5) return fail("turn count is not 5");
  for (size_t k = 0; k < 5; ++k)
    if (dialogue.turns[k].state != gold[k])
      return fail("turn " + std::to_string(k) + " state is " +
                  std::string(state_surface(dialogue.turns[k].state)));
  if (dialogue.turns[4].interval.start_s != 4.0 ||
      dialogue.turns[4].interval.end_s != 5.0)
    return fail("response turn does not cover 4 s to 5 s");
  if (!dialogue.turns[4].response_text ||
      dialogue.turns[4].response_text->empty())
    return fail("response turn carries no content");

  std::filesystem::create_directories("acceptance_tmp");
  const std::string path = "acceptance_tmp/oracle.json";
  save_oracle_checkpoint(dialogue, path);

  std::string first_log;
  for (int round = 0; round < 2; ++round) {
    const auto model = load_any_checkpoint(path);
    const auto replayed = replay(*model, dialogue);
    if (replayed.mismatches != 0)
      return fail("oracle replay mismatched " +
                  std::to_string(replayed.mismatches) + " turns");
    if (replayed.timing_f1 != 1.0) return fail("oracle timing f1 is not 1");
    if (replayed.emissions[4].content != dialogue.turns[4].response_text)
      return fail("replayed content differs from the gold response");
    const auto log = emission_log(replayed);
    if (round == 0)
      first_log = log;
    else if (log != first_log)
      return fail("two oracle replays produced different emission logs");
  }
  std::filesystem::remove_all("acceptance_tmp");
  return {};
}

// ---------------------------------------------------------------------------
// 6. The default synthetic corpus realizes the 12:3:2 state budget within
//    ten percent per state.

Outcome criterion_imbalance() {
  const auto& corpus = default_corpus();
  std::array<int64_t, 3> counts{0, 0, 0};
  int64_t total = 0;
  for (const auto& dialogue : corpus)
    for (const auto& turn : dialogue.turns) {
      ++counts[static_cast<size_t>(turn.state)];
      ++total;
    }
  if (total < 10000)
    return fail("corpus has only " + std::to_string(total) + " turns");
  const std::array<double, 3> ratio{12.0, 3.0, 2.0};
  for (int k = 0; k < 3; ++k) {
    const double expected =
        static_cast<double>(total) * ratio[static_cast<size_t>(k)] / 17.0;
    const double got = static_cast<double>(counts[static_cast<size_t>(k)]);
    if (std::abs(got - expected) > 0.10 * expected)
      return fail("state " + std::to_string(k) + " count " +
                  std::to_string(counts[static_cast<size_t>(k)]) +
                  " is outside ten percent of " + fmt("%.1f", expected));
  }
  return {};
}

// ---------------------------------------------------------------------------
// 7. Loss-mode ablation: median held-out response recall over five seeds
//    orders focal above fixed scaling above plain cross entropy.

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Outcome criterion_ablation() {
  const auto& corpus = default_corpus();
  std::vector<double> focal, fixed, plain;
  // The hottest configuration that trains every mode stably on one core.
  for (uint64_t seed = 1; seed <= 5; ++seed) {
    for (const auto mode :
         {LossMode::Focal, LossMode::FixedScale, LossMode::PlainCe}) {
      ToyModelConfig config;
      config.optimizer.steps = 30;
      config.optimizer.batch_size = 2;
      config.optimizer.learning_rate = 0.1;
      config.optimizer.seed = seed;
      LossConfig loss_config;
      loss_config.mode = mode;
      if (mode == LossMode::FixedScale)
        loss_config.fixed_weights = {{0.3, 1.3, 2.0}};
      const auto result =
          train(config, corpus, loss_config, config.optimizer.steps);
      const double recall = result.curve.back().recall_response;
      (mode == LossMode::Focal    ? focal
       : mode == LossMode::FixedScale ? fixed
                                      : plain)
          .push_back(recall);
    }
  }
  const double f = median_of(focal);
  const double x = median_of(fixed);
  const double p = median_of(plain);
  const std::string observed = "medians focal " + fmt("%.4f", f) +
                               ", fixed_scale " + fmt("%.4f", x) +
                               ", plain_ce " + fmt("%.4f", p);
  if (!(f > x && x > p)) return fail("ordering violated: " + observed);
  if (f - p < 0.10) return fail("gap below 0.10: " + observed);
  return {};
}

// ---------------------------------------------------------------------------
// 8. One forward call per turn plus one per decoded token, and decisions
//    depend only on the turns already seen.

int64_t decoded_budget(const EmissionRecord& emission) {
  if (!emission.content) return 0;
  int64_t words = emission.content->empty() ? 0 : 1;
  for (const char c : *emission.content)
    if (c == ' ') ++words;
  return words + 1;  // terminator
}

Outcome criterion_one_pass() {
  SyntheticConfig gen;
  gen.num_turns = 8;
  gen.tokens_per_turn = 2;
  gen.seed = 42;
  std::vector<StreamingDialogue> dialogues;
  for (const auto& ep : generate_episodes(gen, 12))
    dialogues.push_back(ep.dialogue);

  std::filesystem::create_directories("acceptance_tmp");
  for (size_t d = 0; d < dialogues.size(); ++d) {
    const std::string path =
        "acceptance_tmp/oracle_" + std::to_string(d) + ".json";
    save_oracle_checkpoint(dialogues[d], path);
    const auto model = load_any_checkpoint(path);
    const auto replayed = replay(*model, dialogues[d]);
    int64_t calls = 0, budget = 0;
    for (const auto& e : replayed.emissions) {
      calls += e.forward_calls;
      budget += 1 + decoded_budget(e);
    }
    if (calls > budget)
      return fail("dialogue " + std::to_string(d) + " spent " +
                  std::to_string(calls) + " calls against a budget of " +
                  std::to_string(budget));
  }
  std::filesystem::remove_all("acceptance_tmp");

  // A live model must agree with itself on every prefix of the stream.
  ToyModelConfig config;
  config.embed_dim = 8;
  config.hidden_dim = 12;
  config.optimizer.seed = 9;
  ToyTokenModel model{ToyModel(config)};
  StreamingDialogue full = dialogues[0];
  full.turns.resize(6);
  const auto whole = replay(model, full);
  int64_t calls = 0, budget = 0;
  for (const auto& e : whole.emissions) {
    calls += e.forward_calls;
    budget += 1 + decoded_budget(e);
  }
  if (calls > budget)
    return fail("live replay spent " + std::to_string(calls) +
                " calls against a budget of " + std::to_string(budget));
  for (size_t k = 1; k <= full.turns.size(); ++k) {
    StreamingDialogue prefix = full;
    prefix.turns.resize(k);
    const auto partial = replay(model, prefix);
    for (size_t i = 0; i < k; ++i) {
      const auto& a = partial.emissions[i];
      const auto& b = whole.emissions[i];
      if (a.state != b.state || a.content != b.content)
        return fail("prefix of " + std::to_string(k) +
                    " turns changed the decision at turn " + std::to_string(i));
    }
  }
  return {};
}

// ---------------------------------------------------------------------------
// 9. Serialization round trips, the evaluation pipeline reproduces the
//    committed golden report byte for byte, and the coin-flip judge sits at
//    one half.

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

Outcome criterion_round_trip() {
  SyntheticConfig gen;
  gen.num_turns = 10;
  gen.seed = 7;
  std::vector<StreamingDialogue> dialogues;
  for (const auto& ep : generate_episodes(gen, 1000))
    dialogues.push_back(ep.dialogue);
  std::filesystem::create_directories("acceptance_tmp");
  const std::string data = "acceptance_tmp/roundtrip.jsonl";
  write_dialogues(data, dialogues);
  const auto back = read_dialogues(data);
  if (back.size() != dialogues.size())
    return fail("round trip changed the dialogue count");
  for (size_t i = 0; i < dialogues.size(); ++i)
    if (!(back[i] == dialogues[i]))
      return fail("dialogue " + std::to_string(i) +
                  " changed across the round trip");

  const std::string report = "acceptance_tmp/report.json";
  const std::string command = std::string(STREAMO_CLI_PATH) + " eval --gold " +
                              STREAMO_FIXTURE_DIR "/bench_gold.jsonl --pred " +
                              STREAMO_FIXTURE_DIR "/bench_pred.jsonl --out " +
                              report + " > /dev/null 2>&1";
  if (std::system(command.c_str()) != 0)
    return fail("evaluation pipeline exited nonzero");
  const auto got = slurp(report);
  const auto golden = slurp(STREAMO_FIXTURE_DIR "/score_report_golden.json");
  if (golden.empty()) return fail("golden report fixture is missing");
  if (got != golden) return fail("report bytes differ from the golden file");
  std::filesystem::remove_all("acceptance_tmp");

  std::vector<WinRateTask> tasks(10000);
  for (size_t i = 0; i < tasks.size(); ++i) {
    tasks[i].video_id = "v" + std::to_string(i);
    tasks[i].candidate_a = "ours " + std::to_string(i);
    tasks[i].candidate_b = "theirs " + std::to_string(i);
  }
  const JudgeClient client(std::make_unique<CoinFlipBackend>(2024),
                           JudgeClientConfig{0});
  const double rate = win_rate(tasks, client, false);
  if (rate < 0.48 || rate > 0.52)
    return fail("coin-flip win rate " + fmt("%.4f", rate));
  return {};
}

}  // namespace

// Runs every criterion by default; numeric arguments select a subset.
int main(int argc, char** argv) {
  struct Row {
    int id;
    const char* label;
    Outcome (*body)();
    double budget_s;
  };
  const Row rows[] = {
      {1, "focal with zero gamma and uniform counts equals plain cross entropy",
       &criterion_loss_reduction, 1.0},
      {2, "alpha weights conserve mass and hit the exact 12:3:2 rationals",
       &criterion_alpha_conservation, 1.0},
      {3, "analytic gradients match central finite differences",
       &criterion_gradients, 30.0},
      {4, "interval and question scores match brute-force references",
       &criterion_metric_oracles, 30.0},
      {5, "canonical five-turn trace builds and replays bit for bit",
       &criterion_canonical_trace, 1.0},
      {6, "default corpus meets the 12:3:2 budget within ten percent",
       &criterion_imbalance, 30.0},
      {7, "ablation orders focal above fixed scale above plain cross entropy",
       &criterion_ablation, 600.0},
      {8, "replay spends one call per turn plus decoded tokens, causally",
       &criterion_one_pass, 30.0},
      {9, "round trips, golden report bytes, and coin-flip calibration hold",
       &criterion_round_trip, 60.0},
  };

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failures = 0;
  int ran = 0;
  for (const auto& row : rows) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), row.id) == selected.end())
      continue;
    ++ran;
    const auto start = Clock::now();
    Outcome outcome;
    try {
      outcome = row.body();
    } catch (const std::exception& e) {
      outcome = fail(std::string("unexpected exception: ") + e.what());
    }
    const double elapsed =
        std::chrono::duration<double>(Clock::now() - start).count();
    const bool in_budget = elapsed < row.budget_s;
    const bool ok = outcome.ok && in_budget;
    std::printf("[%s] %d %s (%.2f s)\n", ok ? "PASS" : "FAIL", row.id,
                row.label, elapsed);
    if (!outcome.ok) std::printf("       %s\n", outcome.detail.c_str());
    if (outcome.ok && !in_budget)
      std::printf("       exceeded the %.0f s budget\n", row.budget_s);
    if (!ok) ++failures;
  }
  if (failures == 0)
    std::printf("all %d criteria passed\n", ran);
  else
    std::printf("%d of %d criteria failed\n", failures, ran);
  return failures;
}
