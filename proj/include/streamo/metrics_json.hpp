#pragma once

#include <cstdio>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "streamo/metrics.hpp"

namespace streamo {

inline nlohmann::ordered_json report_to_json(const ScoreReport& report) {
  nlohmann::ordered_json j;
  j["grounding"] = {{"forward_miou", report.forward_miou},
                    {"backward_miou", report.backward_miou}};
  j["caption"] = {{"narration_winrate", report.narration_winrate},
                  {"dense_winrate", report.dense_winrate}};
  j["tsqa"] = {{"accuracy", report.tsqa_accuracy},
               {"recall", report.tsqa_recall}};
  j["average"] = report.average;
  j["average_note"] = std::string(kAverageNote);
  return j;
}

inline ScoreReport report_from_json(const nlohmann::ordered_json& j) {
  ScoreReport report;
  try {
    report.forward_miou = j.at("grounding").at("forward_miou").get<double>();
    report.backward_miou = j.at("grounding").at("backward_miou").get<double>();
    report.narration_winrate =
        j.at("caption").at("narration_winrate").get<double>();
    report.dense_winrate = j.at("caption").at("dense_winrate").get<double>();
    report.tsqa_accuracy = j.at("tsqa").at("accuracy").get<double>();
    report.tsqa_recall = j.at("tsqa").at("recall").get<double>();
    report.average = j.at("average").get<double>();
  } catch (const nlohmann::ordered_json::exception& e) {
    throw SchemaViolation(std::string("score report: ") + e.what());
  }
  return report;
}

/// Seven-column table, percentages with one decimal.
inline std::string render_report_table(const ScoreReport& report) {
  std::string out;
  out += "| Grounding-F | Grounding-B | Caption-N | Caption-D | TSQA-Acc |"
         " TSQA-Rec | Average |\n";
  out += "|-------------|-------------|-----------|-----------|----------|"
         "----------|---------|\n";
  char row[160];
  std::snprintf(row, sizeof(row),
                "| %11.1f | %11.1f | %9.1f | %9.1f | %8.1f | %8.1f | %7.1f |\n",
                report.forward_miou * 100.0, report.backward_miou * 100.0,
                report.narration_winrate * 100.0, report.dense_winrate * 100.0,
                report.tsqa_accuracy * 100.0, report.tsqa_recall * 100.0,
                report.average * 100.0);
  out += row;
  return out;
}

struct BenchmarkData {
  std::vector<GroundingItem> grounding;
  std::vector<TsqaItem> tsqa;
  std::vector<WinRateTask> caption;
};

namespace detail {

struct BenchLine {
  std::string video_id;
  std::string task;
  nlohmann::ordered_json payload;
  int line_no = 0;
};

inline std::vector<BenchLine> read_bench_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<BenchLine> lines;
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (raw.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    nlohmann::ordered_json j;
    try {
      j = nlohmann::ordered_json::parse(raw);
    } catch (const nlohmann::ordered_json::parse_error& e) {
      throw SchemaViolation(where + ": " + e.what());
    }
    BenchLine line;
    line.line_no = line_no;
    if (!j.contains("video_id") || !j["video_id"].is_string())
      throw SchemaViolation(where + ": missing string field video_id");
    if (!j.contains("task") || !j["task"].is_string())
      throw SchemaViolation(where + ": missing string field task");
    if (!j.contains("payload") || !j["payload"].is_object())
      throw SchemaViolation(where + ": missing object field payload");
    line.video_id = j["video_id"].get<std::string>();
    line.task = j["task"].get<std::string>();
    line.payload = j["payload"];
    lines.push_back(std::move(line));
  }
  return lines;
}

inline TimeInterval parse_interval(const nlohmann::ordered_json& j,
                                   const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw SchemaViolation(where + ": interval must be [start, end]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline std::vector<TimedAnswer> parse_answers(const nlohmann::ordered_json& j,
                                              const std::string& where) {
  if (!j.is_array()) throw SchemaViolation(where + ": answers must be an array");
  std::vector<TimedAnswer> answers;
  for (const auto& a : j) {
    if (!a.is_object() || !a.contains("value") || !a["value"].is_string() ||
        !a.contains("time") || !a["time"].is_number())
      throw SchemaViolation(where + ": each answer needs value and time");
    answers.push_back({a["value"].get<std::string>(), a["time"].get<double>()});
  }
  return answers;
}

}  // namespace detail

/// Pairs a gold benchmark file with a predictions file, both JSONL lines of
/// {video_id, task, payload}. Gold defines the item set; predictions may
/// omit items (scored as missing) but must never reference unknown ones.
inline BenchmarkData load_benchmark(const std::string& gold_path,
                                    const std::string& predictions_path) {
  BenchmarkData data;
  // Index of each gold item within its task-specific vector.
  std::map<std::pair<std::string, std::string>, size_t> index;

  for (const auto& line : detail::read_bench_lines(gold_path)) {
    const std::string where = gold_path + ":" + std::to_string(line.line_no);
    const auto key = std::make_pair(line.video_id, line.task);
    if (index.count(key))
      throw SchemaViolation(where + ": duplicate gold item " + line.video_id +
                            "/" + line.task);
    if (line.task == "grounding_forward" || line.task == "grounding_backward") {
      if (!line.payload.contains("query") || !line.payload["query"].is_string())
        throw SchemaViolation(where + ": grounding payload needs query");
      if (!line.payload.contains("interval"))
        throw SchemaViolation(where + ": grounding payload needs interval");
      GroundingItem item;
      item.query_text = line.payload["query"].get<std::string>();
      item.direction = line.task == "grounding_forward"
                           ? GroundingDirection::Forward
                           : GroundingDirection::Backward;
      item.gold = detail::parse_interval(line.payload["interval"], where);
      index[key] = data.grounding.size();
      data.grounding.push_back(std::move(item));
    } else if (line.task == "tsqa") {
      if (!line.payload.contains("question") ||
          !line.payload["question"].is_string())
        throw SchemaViolation(where + ": tsqa payload needs question");
      if (!line.payload.contains("answers"))
        throw SchemaViolation(where + ": tsqa payload needs answers");
      TsqaItem item;
      item.question = line.payload["question"].get<std::string>();
      item.gold_answers = detail::parse_answers(line.payload["answers"], where);
      index[key] = data.tsqa.size();
      data.tsqa.push_back(std::move(item));
    } else if (line.task == "narration" || line.task == "dense_caption") {
      if (!line.payload.contains("text") || !line.payload["text"].is_string())
        throw SchemaViolation(where + ": caption payload needs text");
      WinRateTask task;
      task.video_id = line.video_id;
      task.task = line.task == "narration" ? CaptionTask::Narration
                                           : CaptionTask::DenseCaption;
      task.candidate_b = line.payload["text"].get<std::string>();
      index[key] = data.caption.size();
      data.caption.push_back(std::move(task));
    } else {
      throw SchemaViolation(where + ": unknown task \"" + line.task + "\"");
    }
  }

  std::map<std::pair<std::string, std::string>, int> seen_predictions;
  for (const auto& line : detail::read_bench_lines(predictions_path)) {
    const std::string where =
        predictions_path + ":" + std::to_string(line.line_no);
    const auto key = std::make_pair(line.video_id, line.task);
    const auto it = index.find(key);
    if (it == index.end())
      throw SchemaViolation(where + ": prediction for unknown item " +
                            line.video_id + "/" + line.task);
    if (seen_predictions.count(key))
      throw SchemaViolation(where + ": duplicate prediction for " +
                            line.video_id + "/" + line.task);
    seen_predictions[key] = line.line_no;
    if (line.task == "grounding_forward" || line.task == "grounding_backward") {
      auto& item = data.grounding[it->second];
      if (!line.payload.contains("interval"))
        throw SchemaViolation(where + ": grounding payload needs interval");
      if (!line.payload["interval"].is_null())
        item.prediction = detail::parse_interval(line.payload["interval"], where);
    } else if (line.task == "tsqa") {
      if (!line.payload.contains("answers"))
        throw SchemaViolation(where + ": tsqa payload needs answers");
      data.tsqa[it->second].predictions =
          detail::parse_answers(line.payload["answers"], where);
    } else {
      if (!line.payload.contains("text") || !line.payload["text"].is_string())
        throw SchemaViolation(where + ": caption payload needs text");
      data.caption[it->second].candidate_a = line.payload["text"].get<std::string>();
    }
  }
  return data;
}

}  // namespace streamo
