#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "streamo/checkpoint.hpp"
#include "streamo/config.hpp"
#include "streamo/dialogue_json.hpp"
#include "streamo/engine.hpp"
#include "streamo/judge_factory.hpp"
#include "streamo/metrics_json.hpp"
#include "streamo/model_json.hpp"
#include "streamo/synth.hpp"

namespace {

using namespace streamo;

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm parts{};
  gmtime_r(&now, &parts);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &parts);
  return buffer;
}

void write_text(const std::string& path, const std::string& content) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << content;
  if (!out) throw IoError("failed writing " + path);
}

/// Common manifest envelope. The timestamp lives here and only here, so
/// every primary output stays byte-identical across reruns.
nlohmann::ordered_json manifest_skeleton(const std::string& subcommand,
                                         const ToolkitConfig& config) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["tool"] = "streamo";
  j["subcommand"] = subcommand;
  j["created_utc"] = utc_timestamp();
  j["config"] = config_to_json(config);
  return j;
}

void write_manifest(const std::string& path, const nlohmann::ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// build-data

struct BuildDataArgs {
  std::string out;
  std::string annotations;
  std::optional<int64_t> episodes;
  std::optional<uint64_t> seed;
};

std::vector<StreamingDialogue> dialogues_from_annotations(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open annotations " + path);
  std::vector<StreamingDialogue> dialogues;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaViolation(where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("duration_s") ||
        !j["duration_s"].is_number())
      throw SchemaViolation(where + ": annotation needs numeric duration_s");
    const double duration_s = j["duration_s"].get<double>();
    const double turn_s =
        j.contains("turn_s") ? j["turn_s"].get<double>() : 1.0;
    const TaskKind task =
        j.contains("task")
            ? parse_task_name(j["task"].get<std::string>())
            : TaskKind::EventCaption;
    std::vector<EventSpan> events;
    if (j.contains("events")) {
      if (!j["events"].is_array())
        throw SchemaViolation(where + ": events must be an array");
      for (const auto& e : j["events"]) {
        if (!e.contains("start") || !e.contains("end") || !e.contains("caption"))
          throw SchemaViolation(where +
                                ": each event needs start, end, caption");
        events.push_back({{e["start"].get<double>(), e["end"].get<double>()},
                          e["caption"].get<std::string>()});
      }
    }
    std::vector<QuestionInsert> questions;
    if (j.contains("questions")) {
      if (!j["questions"].is_array())
        throw SchemaViolation(where + ": questions must be an array");
      for (const auto& q : j["questions"]) {
        if (!q.contains("text") || !q.contains("turn"))
          throw SchemaViolation(where + ": each question needs text and turn");
        questions.push_back(
            {q["text"].get<std::string>(), q["turn"].get<int>()});
      }
    }
    dialogues.push_back(
        build_dialogue(duration_s, turn_s, events, task, questions));
  }
  return dialogues;
}

int cmd_build_data(const ToolkitConfig& config, const BuildDataArgs& args) {
  std::array<int64_t, 3> counts{0, 0, 0};
  int64_t episodes = 0;
  if (!args.annotations.empty()) {
    const auto dialogues = dialogues_from_annotations(args.annotations);
    write_dialogues(args.out, dialogues);
    episodes = static_cast<int64_t>(dialogues.size());
    for (const auto& dialogue : dialogues)
      for (const auto& turn : dialogue.turns)
        ++counts[static_cast<size_t>(turn.state)];
  } else {
    const auto manifest = generate_corpus(config.synth.generator,
                                          config.synth.episodes, args.out);
    counts = manifest.counts;
    episodes = manifest.episodes;
  }

  auto manifest = manifest_skeleton("build-data", config);
  manifest["out"] = args.out;
  if (!args.annotations.empty()) manifest["annotations"] = args.annotations;
  manifest["episodes"] = episodes;
  manifest["counts"] = {{"silence", counts[0]},
                        {"standby", counts[1]},
                        {"response", counts[2]}};
  const int64_t total = counts[0] + counts[1] + counts[2];
  if (total > 0) {
    // Ratio normalized so silence reads as 12, for eyeballing against the
    // 12:3:2 target.
    const double unit = static_cast<double>(counts[0]) / 12.0;
    manifest["ratio"] = {
        {"silence", 12.0},
        {"standby", unit > 0 ? static_cast<double>(counts[1]) / unit : 0.0},
        {"response", unit > 0 ? static_cast<double>(counts[2]) / unit : 0.0}};
  }
  write_manifest(args.out + ".manifest.json", manifest);
  std::cout << "wrote " << episodes << " episodes (" << total << " turns) to "
            << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  std::string data;
  std::string out;
  std::string curve;
  std::string runs_dir;
  std::vector<uint64_t> seeds;
  std::vector<std::string> modes;
};

nlohmann::ordered_json curve_final_json(const std::vector<CurvePoint>& curve) {
  nlohmann::ordered_json final;
  if (!curve.empty()) {
    const auto& p = curve.back();
    final = {{"step", p.step},
             {"loss", p.loss},
             {"recall_silence", p.recall_silence},
             {"recall_standby", p.recall_standby},
             {"recall_response", p.recall_response}};
  }
  return final;
}

void run_single_training(const ToolkitConfig& config,
                         const std::vector<StreamingDialogue>& corpus,
                         const std::string& data_path,
                         const std::string& checkpoint_path,
                         const std::string& curve_path,
                         const std::string& manifest_path) {
  const auto result = train(config.model.model, corpus,
                            config.loss.to_loss_config(),
                            config.model.curve_every);
  const auto parent = std::filesystem::path(checkpoint_path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  save_toy_checkpoint(result.model, checkpoint_path);
  write_text(curve_path, curve_to_csv(result.curve));

  auto manifest = manifest_skeleton("train", config);
  manifest["data"] = data_path;
  manifest["episodes"] = corpus.size();
  manifest["checkpoint"] = checkpoint_path;
  manifest["curve"] = curve_path;
  manifest["final"] = curve_final_json(result.curve);
  write_manifest(manifest_path, manifest);
}

int cmd_train(const ToolkitConfig& config, const TrainArgs& args, int jobs) {
  if (config.loss.gamma < 0.0)
    throw ConfigError("loss.gamma must be >= 0");
  const auto corpus = read_dialogues(args.data);

  if (args.runs_dir.empty()) {
    const std::string curve_path =
        !args.curve.empty()
            ? args.curve
            : std::filesystem::path(args.out)
                  .replace_extension(".curve.csv")
                  .string();
    run_single_training(config, corpus, args.data, args.out, curve_path,
                        args.out + ".manifest.json");
    std::cout << "wrote checkpoint " << args.out << "\n";
    return 0;
  }

  // Sweep mode: one run per (mode, seed) pair under runs_dir.
  std::vector<LossMode> modes;
  for (const auto& name : args.modes) modes.push_back(parse_loss_mode(name));
  if (modes.empty()) modes.push_back(config.loss.mode);
  std::vector<uint64_t> seeds = args.seeds;
  if (seeds.empty()) seeds.push_back(config.model.model.optimizer.seed);

  struct WorkItem {
    LossMode mode;
    uint64_t seed;
  };
  std::vector<WorkItem> items;
  for (const auto mode : modes)
    for (const auto seed : seeds) items.push_back({mode, seed});

  std::vector<std::exception_ptr> failures(items.size());
  std::atomic<size_t> next{0};
  const auto worker = [&]() {
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= items.size()) return;
      try {
        ToolkitConfig run_config = config;
        run_config.loss.mode = items[i].mode;
        run_config.model.model.optimizer.seed = items[i].seed;
        const std::string run_name =
            std::string(loss_mode_name(items[i].mode)) + "-seed" +
            std::to_string(items[i].seed);
        const auto run_dir = std::filesystem::path(args.runs_dir) / run_name;
        std::filesystem::create_directories(run_dir);
        run_single_training(run_config, corpus, args.data,
                            (run_dir / "checkpoint.json").string(),
                            (run_dir / "curve.csv").string(),
                            (run_dir / "train_manifest.json").string());
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(items.size())));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);
  std::cout << "wrote " << items.size() << " runs under " << args.runs_dir
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// infer

struct InferArgs {
  std::string checkpoint;
  std::string data;
  std::string out;
};

int cmd_infer(const ToolkitConfig& config, const InferArgs& args, int jobs) {
  const auto dialogues = read_dialogues(args.data);
  std::vector<ReplayResult> results(dialogues.size());

  std::vector<std::exception_ptr> failures(std::max<size_t>(dialogues.size(), 1));
  std::atomic<size_t> next{0};
  const auto worker = [&]() {
    // Each worker owns a model instance; sessions must not share one.
    const auto model = load_any_checkpoint(args.checkpoint);
    while (true) {
      const size_t i = next.fetch_add(1);
      if (i >= dialogues.size()) return;
      try {
        results[i] = replay(*model, dialogues[i],
                            config.engine.overflow_policy);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const int threads =
      std::max(1, std::min<int>(jobs, static_cast<int>(dialogues.size())));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& failure : failures)
    if (failure) std::rethrow_exception(failure);

  std::string log;
  int64_t total_turns = 0, mismatches = 0;
  double timing_f1_sum = 0.0;
  for (size_t d = 0; d < results.size(); ++d) {
    for (const auto& emission : results[d].emissions) {
      nlohmann::ordered_json line;
      line["dialogue"] = d;
      line["turn"] = emission.turn;
      line["state"] = std::string(state_surface(emission.state));
      if (emission.content) line["content"] = *emission.content;
      line["forward_calls"] = emission.forward_calls;
      if (emission.protocol_violation) line["protocol_violation"] = true;
      log += line.dump();
      log += '\n';
    }
    total_turns += static_cast<int64_t>(results[d].emissions.size());
    mismatches += results[d].mismatches;
    timing_f1_sum += results[d].timing_f1;
  }
  write_text(args.out, log);

  auto manifest = manifest_skeleton("infer", config);
  manifest["checkpoint"] = args.checkpoint;
  manifest["data"] = args.data;
  manifest["out"] = args.out;
  manifest["dialogues"] = dialogues.size();
  manifest["turns"] = total_turns;
  manifest["state_mismatches"] = mismatches;
  manifest["timing_f1_mean"] =
      dialogues.empty() ? 1.0
                        : timing_f1_sum / static_cast<double>(dialogues.size());
  write_manifest(args.out + ".manifest.json", manifest);
  std::cout << "wrote " << total_turns << " emissions to " << args.out << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string gold;
  std::string pred;
  std::string out;
  std::string table;
};

int cmd_eval(const ToolkitConfig& config, const EvalArgs& args) {
  const auto data = load_benchmark(args.gold, args.pred);
  const auto client = make_judge_client(config.judge);
  const auto report = score_report(data.grounding, data.tsqa,
                                   config.eval.delta_t, data.caption, client,
                                   config.eval.debias);
  write_text(args.out, report_to_json(report).dump(2) + "\n");
  const std::string table = render_report_table(report);
  if (!args.table.empty()) write_text(args.table, table);
  std::cout << table;

  auto manifest = manifest_skeleton("eval", config);
  manifest["gold"] = args.gold;
  manifest["predictions"] = args.pred;
  manifest["out"] = args.out;
  manifest["items"] = {{"grounding", data.grounding.size()},
                       {"tsqa", data.tsqa.size()},
                       {"caption", data.caption.size()}};
  write_manifest(args.out + ".manifest.json", manifest);
  return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportArgs {
  std::string runs_dir;
  std::string out;
};

struct RunRow {
  std::string name;
  std::string mode;
  uint64_t seed = 0;
  int final_step = 0;
  double final_loss = 0.0;
  double recall_silence = 0.0;
  double recall_standby = 0.0;
  double recall_response = 0.0;
};

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::string fixed4(double v) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.4f", v);
  return buffer;
}

int cmd_report(const ToolkitConfig& config, const ReportArgs& args) {
  std::vector<RunRow> rows;
  if (!std::filesystem::is_directory(args.runs_dir))
    throw MissingRuns("run directory " + args.runs_dir + " does not exist");
  std::vector<std::filesystem::path> run_dirs;
  for (const auto& entry : std::filesystem::directory_iterator(args.runs_dir))
    if (entry.is_directory() &&
        std::filesystem::exists(entry.path() / "train_manifest.json"))
      run_dirs.push_back(entry.path());
  std::sort(run_dirs.begin(), run_dirs.end());
  if (run_dirs.empty())
    throw MissingRuns("no train_manifest.json found under " + args.runs_dir);

  for (const auto& dir : run_dirs) {
    const auto manifest_path = dir / "train_manifest.json";
    std::ifstream in(manifest_path);
    nlohmann::json manifest;
    try {
      in >> manifest;
    } catch (const nlohmann::json::exception& e) {
      throw SchemaViolation(manifest_path.string() + ": " + e.what());
    }
    RunRow row;
    row.name = dir.filename().string();
    try {
      row.mode = manifest.at("config").at("loss").at("mode").get<std::string>();
      row.seed = manifest.at("config").at("model").at("seed").get<uint64_t>();
      const auto& final = manifest.at("final");
      row.final_step = final.at("step").get<int>();
      row.final_loss = final.at("loss").get<double>();
      row.recall_silence = final.at("recall_silence").get<double>();
      row.recall_standby = final.at("recall_standby").get<double>();
      row.recall_response = final.at("recall_response").get<double>();
    } catch (const nlohmann::json::exception& e) {
      throw SchemaViolation(manifest_path.string() + ": " + e.what());
    }
    rows.push_back(std::move(row));
  }
  std::sort(rows.begin(), rows.end(), [](const RunRow& a, const RunRow& b) {
    if (a.mode != b.mode) return a.mode < b.mode;
    if (a.seed != b.seed) return a.seed < b.seed;
    return a.name < b.name;
  });

  std::map<std::string, std::vector<double>> by_mode;
  for (const auto& row : rows) by_mode[row.mode].push_back(row.recall_response);

  std::string md;
  md += "# Ablation report\n\n";
  md += "| run | mode | seed | final_step | final_loss | recall_silence |"
        " recall_standby | recall_response |\n";
  md += "|-----|------|------|------------|------------|----------------|"
        "----------------|-----------------|\n";
  std::string csv =
      "run,mode,seed,final_step,final_loss,recall_silence,recall_standby,"
      "recall_response\n";
  for (const auto& row : rows) {
    md += "| " + row.name + " | " + row.mode + " | " +
          std::to_string(row.seed) + " | " + std::to_string(row.final_step) +
          " | " + fixed4(row.final_loss) + " | " + fixed4(row.recall_silence) +
          " | " + fixed4(row.recall_standby) + " | " +
          fixed4(row.recall_response) + " |\n";
    csv += row.name + "," + row.mode + "," + std::to_string(row.seed) + "," +
           std::to_string(row.final_step) + "," + fixed4(row.final_loss) +
           "," + fixed4(row.recall_silence) + "," +
           fixed4(row.recall_standby) + "," + fixed4(row.recall_response) +
           "\n";
  }

  md += "\n## Medians\n\n";
  md += "| mode | runs | median_recall_response |\n";
  md += "|------|------|------------------------|\n";
  for (const auto& [mode, values] : by_mode)
    md += "| " + mode + " | " + std::to_string(values.size()) + " | " +
          fixed4(median(values)) + " |\n";

  md += "\n## Verdict\n\n";
  const bool complete = by_mode.count("focal") && by_mode.count("fixed_scale") &&
                        by_mode.count("plain_ce");
  if (!complete) {
    std::string missing;
    for (const char* mode : {"focal", "fixed_scale", "plain_ce"})
      if (!by_mode.count(mode)) missing += std::string(missing.empty() ? "" : ", ") + mode;
    md += "ordering focal > fixed_scale > plain_ce: INCOMPLETE (missing modes: " +
          missing + ")\n";
  } else {
    const double focal = median(by_mode["focal"]);
    const double fixed = median(by_mode["fixed_scale"]);
    const double plain = median(by_mode["plain_ce"]);
    const bool ordered = focal > fixed && fixed > plain;
    const double gap = focal - plain;
    md += std::string("ordering focal > fixed_scale > plain_ce: ") +
          (ordered ? "CONFIRMED" : "NOT CONFIRMED") + "\n";
    md += "medians: focal " + fixed4(focal) + ", fixed_scale " + fixed4(fixed) +
          ", plain_ce " + fixed4(plain) + "\n";
    md += "focal - plain_ce gap: " + fixed4(gap) + " (threshold 0.10): " +
          (gap >= 0.10 ? "met" : "not met") + "\n";
  }

  write_text(args.out, md);
  const std::string csv_path =
      std::filesystem::path(args.out).replace_extension(".csv").string();
  write_text(csv_path, csv);

  auto manifest = manifest_skeleton("report", config);
  manifest["runs_dir"] = args.runs_dir;
  manifest["out"] = args.out;
  manifest["csv"] = csv_path;
  manifest["runs"] = rows.size();
  write_manifest(args.out + ".manifest.json", manifest);
  std::cout << md;
  return 0;
}

// ---------------------------------------------------------------------------

struct FlagOverrides {
  std::optional<std::string> loss_mode;
  std::optional<double> gamma;
  std::optional<int> steps;
  std::optional<double> learning_rate;
  std::optional<int> batch_size;
  std::optional<uint64_t> seed;
  std::optional<int> curve_every;
  std::optional<double> delta_t;
  bool debias_on = false;
  bool debias_off = false;
  std::optional<std::string> judge_backend;
  std::optional<std::string> judge_fixtures;
};

void apply_flags(ToolkitConfig& config, const FlagOverrides& flags) {
  if (flags.loss_mode) config.loss.mode = parse_loss_mode(*flags.loss_mode);
  if (flags.gamma) config.loss.gamma = *flags.gamma;
  if (flags.steps) config.model.model.optimizer.steps = *flags.steps;
  if (flags.learning_rate)
    config.model.model.optimizer.learning_rate = *flags.learning_rate;
  if (flags.batch_size)
    config.model.model.optimizer.batch_size = *flags.batch_size;
  if (flags.seed) config.model.model.optimizer.seed = *flags.seed;
  if (flags.curve_every) config.model.curve_every = *flags.curve_every;
  if (flags.delta_t) config.eval.delta_t = *flags.delta_t;
  if (flags.debias_on && flags.debias_off)
    throw ConfigError("--debias and --no-debias conflict");
  if (flags.debias_on) config.eval.debias = true;
  if (flags.debias_off) config.eval.debias = false;
  if (flags.judge_backend)
    config.judge.backend = parse_judge_backend(*flags.judge_backend);
  if (flags.judge_fixtures) config.judge.fixtures = *flags.judge_fixtures;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Streaming dialogue toolkit: data building, training, "
               "streaming inference, evaluation, reporting"};
  app.require_subcommand(1);
  // Lets --config and --jobs appear after the subcommand name as well.
  app.fallthrough();

  std::string config_path;
  int jobs = 1;
  app.add_option("--config", config_path, "Configuration file");
  app.add_option("--jobs", jobs, "Worker threads for fan-out work")
      ->check(CLI::PositiveNumber);

  FlagOverrides flags;
  BuildDataArgs build_args;
  TrainArgs train_args;
  InferArgs infer_args;
  EvalArgs eval_args;
  ReportArgs report_args;

  auto* build = app.add_subcommand(
      "build-data", "Generate a synthetic corpus or build one from annotations");
  build->add_option("--out", build_args.out, "Dataset JSONL path")->required();
  build->add_option("--annotations", build_args.annotations,
                    "Annotation JSONL of gold event spans");
  build->add_option("--episodes", build_args.episodes, "Synthetic episode count");
  build->add_option("--seed", build_args.seed, "Synthetic generator seed");

  auto* train_cmd =
      app.add_subcommand("train", "Train the toy streaming model");
  train_cmd->add_option("--data", train_args.data, "Corpus JSONL")->required();
  train_cmd->add_option("--out", train_args.out, "Checkpoint path");
  train_cmd->add_option("--curve", train_args.curve, "Curve CSV path");
  train_cmd->add_option("--runs-dir", train_args.runs_dir,
                        "Sweep output directory (one run per mode and seed)");
  train_cmd->add_option("--seeds", train_args.seeds, "Sweep seeds")
      ->delimiter(',');
  train_cmd->add_option("--modes", train_args.modes, "Sweep loss modes")
      ->delimiter(',');
  train_cmd->add_option("--loss", flags.loss_mode,
                        "Loss mode: focal, fixed_scale, plain_ce");
  train_cmd->add_option("--gamma", flags.gamma, "Focal exponent");
  train_cmd->add_option("--steps", flags.steps, "Optimizer steps");
  train_cmd->add_option("--lr", flags.learning_rate, "Learning rate");
  train_cmd->add_option("--batch-size", flags.batch_size, "Batch size");
  train_cmd->add_option("--seed", flags.seed, "Optimizer seed");
  train_cmd->add_option("--curve-every", flags.curve_every,
                        "Curve sampling stride");

  auto* infer =
      app.add_subcommand("infer", "Replay dialogues through a checkpoint");
  infer->add_option("--checkpoint", infer_args.checkpoint, "Checkpoint path")
      ->required();
  infer->add_option("--data", infer_args.data, "Dialogue JSONL")->required();
  infer->add_option("--out", infer_args.out, "Emission log JSONL")->required();

  auto* eval_cmd =
      app.add_subcommand("eval", "Score predictions against a gold benchmark");
  eval_cmd->add_option("--gold", eval_args.gold, "Gold benchmark JSONL")
      ->required();
  eval_cmd->add_option("--pred", eval_args.pred, "Predictions JSONL")
      ->required();
  eval_cmd->add_option("--out", eval_args.out, "Score report JSON")->required();
  eval_cmd->add_option("--table", eval_args.table, "Also write the table here");
  eval_cmd->add_option("--delta-t", flags.delta_t,
                       "TSQA timing tolerance in seconds");
  eval_cmd->add_flag("--debias", flags.debias_on,
                     "Judge each caption pair in both slot orders");
  eval_cmd->add_flag("--no-debias", flags.debias_off,
                     "Judge each caption pair once, system in slot A");
  eval_cmd->add_option("--judge", flags.judge_backend,
                       "Judge backend: always_first, coin_flip, "
                       "prefer_substring, fixture, http");
  eval_cmd->add_option("--fixtures", flags.judge_fixtures,
                       "Fixture JSONL for the fixture judge backend");

  auto* report =
      app.add_subcommand("report", "Collate training runs into an ablation report");
  report->add_option("--runs-dir", report_args.runs_dir, "Directory of runs")
      ->required();
  report->add_option("--out", report_args.out, "Report markdown path")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    ToolkitConfig config;
    if (!config_path.empty()) load_config_file(config, config_path);
    apply_env_overrides(config);
    apply_flags(config, flags);
    if (build_args.episodes) config.synth.episodes = *build_args.episodes;
    if (build_args.seed) config.synth.generator.seed = *build_args.seed;

    if (build->parsed()) return cmd_build_data(config, build_args);
    if (train_cmd->parsed()) {
      if (train_args.runs_dir.empty() && train_args.out.empty())
        throw ConfigError("train needs --out or --runs-dir");
      return cmd_train(config, train_args, jobs);
    }
    if (infer->parsed()) return cmd_infer(config, infer_args, jobs);
    if (eval_cmd->parsed()) return cmd_eval(config, eval_args);
    if (report->parsed()) return cmd_report(config, report_args);
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
