#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "streamo/errors.hpp"
#include "streamo/judge.hpp"
#include "streamo/time.hpp"

namespace streamo {

enum class GroundingDirection { Forward, Backward };

inline std::string grounding_direction_name(GroundingDirection d) {
  return d == GroundingDirection::Forward ? "forward" : "backward";
}

struct GroundingItem {
  std::string query_text;
  GroundingDirection direction = GroundingDirection::Forward;
  TimeInterval gold{0.0, 0.0};
  std::optional<TimeInterval> prediction;
};

struct TimedAnswer {
  std::string value;
  double time = 0.0;

  bool operator==(const TimedAnswer&) const = default;
};

struct TsqaItem {
  std::string question;
  std::vector<TimedAnswer> gold_answers;
  std::vector<TimedAnswer> predictions;
};

enum class CaptionTask { Narration, DenseCaption };

inline std::string caption_task_name(CaptionTask task) {
  return task == CaptionTask::Narration ? "narration" : "dense_caption";
}

/// One pairwise comparison: candidate_a is the system under test,
/// candidate_b the baseline it is judged against. A pre-recorded verdict
/// replays a judged outcome without a live call for the canonical order.
struct WinRateTask {
  std::string video_id;
  CaptionTask task = CaptionTask::Narration;
  std::string candidate_a;
  std::string candidate_b;
  std::optional<JudgeDecision> verdict;
};

namespace detail {

inline void check_interval(const TimeInterval& interval, const char* which) {
  if (!(interval.end_s > interval.start_s))
    throw DegenerateInterval(std::string(which) + " interval [" +
                             std::to_string(interval.start_s) + ", " +
                             std::to_string(interval.end_s) +
                             "] has no extent");
}

}  // namespace detail

inline double iou(const TimeInterval& pred, const TimeInterval& gold) {
  detail::check_interval(pred, "prediction");
  detail::check_interval(gold, "gold");
  const double inter =
      std::max(0.0, std::min(pred.end_s, gold.end_s) -
                        std::max(pred.start_s, gold.start_s));
  const double cover =
      std::max(pred.end_s, gold.end_s) - std::min(pred.start_s, gold.start_s);
  return inter / cover;
}

/// Mean IoU over the items; an absent prediction scores zero.
inline double mean_iou(const std::vector<GroundingItem>& items) {
  if (items.empty()) throw EmptySet("no grounding items");
  double total = 0.0;
  for (const auto& item : items)
    if (item.prediction) total += iou(*item.prediction, item.gold);
  return total / static_cast<double>(items.size());
}

struct GroundingScore {
  double forward_miou = 0.0;
  double backward_miou = 0.0;
};

inline GroundingScore grounding_score(const std::vector<GroundingItem>& items) {
  std::vector<GroundingItem> forward, backward;
  for (const auto& item : items)
    (item.direction == GroundingDirection::Forward ? forward : backward)
        .push_back(item);
  if (forward.empty()) throw EmptySet("no forward grounding items");
  if (backward.empty()) throw EmptySet("no backward grounding items");
  return {mean_iou(forward), mean_iou(backward)};
}

/// The v1 content rule: case-insensitive exact match after trimming,
/// whitespace collapsing and option-prefix stripping, so "A. Red light" and
/// "red light" agree. Free-text equivalence beyond this goes through the
/// judge instead.
inline std::string normalize_answer(const std::string& text) {
  size_t b = 0, e = text.size();
  while (b < e && std::isspace(static_cast<unsigned char>(text[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(text[e - 1]))) --e;
  std::string trimmed = text.substr(b, e - b);
  // A single letter followed by '.' or ')' and a space reads as an option
  // label.
  if (trimmed.size() >= 3 &&
      std::isalpha(static_cast<unsigned char>(trimmed[0])) &&
      (trimmed[1] == '.' || trimmed[1] == ')') && trimmed[2] == ' ') {
    size_t skip = 3;
    while (skip < trimmed.size() &&
           std::isspace(static_cast<unsigned char>(trimmed[skip])))
      ++skip;
    trimmed.erase(0, skip);
  }
  std::string out;
  bool in_space = false;
  for (const char c : trimmed) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out += ' ';
    in_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

inline bool content_match(const std::string& pred, const std::string& gold) {
  return normalize_answer(pred) == normalize_answer(gold);
}

/// Judge-backed equivalence for free-text answers.
inline bool judge_content_match(const JudgeClient& client,
                                const std::string& pred,
                                const std::string& gold) {
  JudgeRequest request;
  request.template_id = JudgeTemplate::ContentMatch;
  request.slots = {{"prediction", pred}, {"reference", gold}};
  return client.judge(request).decision == JudgeDecision::Yes;
}

struct TsqaScore {
  double accuracy = 0.0;
  double recall = 0.0;
};

using ContentMatcher = std::function<bool(const std::string&, const std::string&)>;

/// Existence matching: a gold point is satisfied when any prediction agrees
/// in content and lies within delta_t seconds. One prediction may satisfy
/// several gold points. Accuracy pools gold points across questions; recall
/// averages the per-question satisfied fractions.
inline TsqaScore tsqa_score(const std::vector<TsqaItem>& items, double delta_t,
                            const ContentMatcher& matcher = content_match) {
  if (delta_t < 0.0) throw DomainError("delta_t must be >= 0");
  if (items.empty()) throw EmptyGold("no questions");
  int64_t satisfied_total = 0, gold_total = 0;
  double fraction_sum = 0.0;
  for (const auto& item : items) {
    if (item.gold_answers.size() < 2)
      throw DomainError("question \"" + item.question +
                        "\" needs at least 2 gold answers");
    for (size_t i = 0; i < item.gold_answers.size(); ++i) {
      if (item.gold_answers[i].time < 0.0)
        throw DomainError("gold answer times must be >= 0");
      if (i > 0 && !(item.gold_answers[i].time > item.gold_answers[i - 1].time))
        throw DomainError("gold answer times must be strictly increasing");
    }
    int64_t satisfied = 0;
    for (const auto& gold : item.gold_answers) {
      const bool hit = std::any_of(
          item.predictions.begin(), item.predictions.end(),
          [&](const TimedAnswer& pred) {
            return std::abs(pred.time - gold.time) <= delta_t &&
                   matcher(pred.value, gold.value);
          });
      if (hit) ++satisfied;
    }
    satisfied_total += satisfied;
    gold_total += static_cast<int64_t>(item.gold_answers.size());
    fraction_sum += static_cast<double>(satisfied) /
                    static_cast<double>(item.gold_answers.size());
  }
  return {static_cast<double>(satisfied_total) / static_cast<double>(gold_total),
          fraction_sum / static_cast<double>(items.size())};
}

namespace detail {

inline double preference_score(JudgeDecision decision, bool system_in_a) {
  if (decision == JudgeDecision::Tie) return 0.5;
  const bool system_won =
      (decision == JudgeDecision::A) == system_in_a;
  return system_won ? 1.0 : 0.0;
}

}  // namespace detail

/// Fraction of tasks where the system output is judged superior. With
/// debiasing on, each pair is judged in both slot orders and the two scores
/// average; ties score half either way. A task carrying a recorded verdict
/// replays it for the canonical order instead of calling the judge.
inline double win_rate(const std::vector<WinRateTask>& tasks,
                       const JudgeClient& client, bool debias = true) {
  if (tasks.empty()) throw EmptySet("no win-rate tasks");
  double total = 0.0;
  for (const auto& task : tasks) {
    if (task.verdict && *task.verdict != JudgeDecision::A &&
        *task.verdict != JudgeDecision::B && *task.verdict != JudgeDecision::Tie)
      throw DomainError("recorded verdict must be A, B or TIE");
    JudgeRequest request;
    request.template_id = JudgeTemplate::PairwisePreference;
    request.slots = {{"task", caption_task_name(task.task)},
                     {"output_a", task.candidate_a},
                     {"output_b", task.candidate_b}};
    const JudgeDecision first =
        task.verdict ? *task.verdict : client.judge(request).decision;
    double score = detail::preference_score(first, /*system_in_a=*/true);
    if (debias) {
      request.slots["output_a"] = task.candidate_b;
      request.slots["output_b"] = task.candidate_a;
      score += detail::preference_score(client.judge(request).decision,
                                        /*system_in_a=*/false);
      score /= 2.0;
    }
    total += score;
  }
  return total / static_cast<double>(tasks.size());
}

struct ScoreReport {
  double forward_miou = 0.0;
  double backward_miou = 0.0;
  double narration_winrate = 0.0;
  double dense_winrate = 0.0;
  double tsqa_accuracy = 0.0;
  double tsqa_recall = 0.0;
  double average = 0.0;
};

/// The aggregation across heterogeneous metrics is a plain arithmetic mean
/// of the six columns; the serialized report carries this note so readers
/// never mistake it for a weighted scheme.
inline constexpr std::string_view kAverageNote =
    "arithmetic mean of the six metric columns";

inline ScoreReport score_report(const std::vector<GroundingItem>& grounding,
                                const std::vector<TsqaItem>& tsqa,
                                double delta_t,
                                const std::vector<WinRateTask>& caption,
                                const JudgeClient& client, bool debias = true) {
  std::vector<WinRateTask> narration, dense;
  for (const auto& task : caption)
    (task.task == CaptionTask::Narration ? narration : dense).push_back(task);
  if (narration.empty()) throw EmptySet("no narration win-rate tasks");
  if (dense.empty()) throw EmptySet("no dense-caption win-rate tasks");

  ScoreReport report;
  const auto ground = grounding_score(grounding);
  report.forward_miou = ground.forward_miou;
  report.backward_miou = ground.backward_miou;
  report.narration_winrate = win_rate(narration, client, debias);
  report.dense_winrate = win_rate(dense, client, debias);
  const auto qa = tsqa_score(tsqa, delta_t);
  report.tsqa_accuracy = qa.accuracy;
  report.tsqa_recall = qa.recall;
  report.average =
      (report.forward_miou + report.backward_miou + report.narration_winrate +
       report.dense_winrate + report.tsqa_accuracy + report.tsqa_recall) /
      6.0;
  return report;
}

}  // namespace streamo
