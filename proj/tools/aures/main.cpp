/*
 * Copyright 2026 The Aures Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// aures: command-line front end.
//
//   aures synth     --out DIR                 train/ and test/ corpora
//   aures pretrain  --out DIR [--data CSV]    backbone pretraining
//   aures probe     --checkpoint CK --out DIR [--data CSV --test CSV]
//   aures evaluate  --out DIR                 synth + pretrain + probe
//   aures shapes    [--config full] [--reference] [--params]
//   aures report    scores.csv... [--out FILE]
//
// Exit codes: 0 success, 1 runtime failure (the failing stage is named on
// stderr), 2 usage error.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <CLI11.hpp>

#include "aures/checkpoint.hpp"
#include "aures/config.hpp"
#include "aures/data.hpp"
#include "aures/errors.hpp"
#include "aures/eval.hpp"
#include "aures/model.hpp"
#include "aures/pipeline.hpp"
#include "reference_table.hpp"

namespace fs = std::filesystem;

namespace aures::tools {
namespace {

// Thrown out of a command with the stage it failed in.
struct StageFailure {
  std::string stage;
  std::string message;
};

template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageFailure&) {
    throw;
  } catch (const std::exception& e) {
    throw StageFailure{name, e.what()};
  }
}

struct CommonFlags {
  std::string config;
  std::optional<std::string> preset;
  std::optional<std::string> objective;
  std::optional<std::string> norm;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> steps;
  std::string out;
};

void add_common(CLI::App* app, CommonFlags& f, bool needs_out) {
  app->add_option("--config", f.config, "JSON run config, or a preset name (full, desk)");
  app->add_option("--preset", f.preset, "Model preset")->check(CLI::IsMember({"full", "desk"}));
  app->add_option("--objective", f.objective, "Pretraining objective")
      ->check(CLI::IsMember({"simclr", "supervised"}));
  app->add_option("--norm", f.norm, "Normalizer")->check(CLI::IsMember({"bn", "ln", "in", "none"}));
  app->add_option("--seed", f.seed, "Random seed");
  app->add_option("--steps", f.steps, "Pretraining steps")->check(CLI::PositiveNumber);
  auto* out = app->add_option("--out", f.out, "Output directory");
  if (needs_out) out->required();
}

RunConfig resolve(const CommonFlags& f) {
  return stage("config", [&] {
    RunConfig cfg;
    if (!f.config.empty()) {
      if (fs::exists(f.config)) {
        cfg = load_run_config(f.config);
      } else if (f.config == "full" || f.config == "desk") {
        apply_preset(cfg, f.config);
      } else {
        throw ConfigError("cannot open config " + f.config);
      }
    }
    if (f.norm) cfg.model.norm_kind = nn::parse_norm_kind(*f.norm);
    if (f.preset) apply_preset(cfg, *f.preset);
    if (f.objective) cfg.objective = parse_objective(*f.objective);
    if (f.seed) cfg.seed = *f.seed;
    if (f.steps) cfg.steps = *f.steps;
    cfg.corpus.seed = cfg.seed;
    validate(cfg.model);
    return cfg;
  });
}

// Writes train/ and test/ corpora under dir; returns the manifest paths.
std::pair<fs::path, fs::path> make_corpora(const RunConfig& cfg, const fs::path& dir) {
  return stage("synth", [&] {
    data::synth_corpus(cfg.corpus, dir / "train");
    data::synth_corpus(heldout_spec(cfg), dir / "test");
    return std::pair{dir / "train" / "manifest.csv", dir / "test" / "manifest.csv"};
  });
}

void write_text(const fs::path& path, const std::string& text) {
  data::write_file_atomic(path, text);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

StepCallback progress(const RunConfig& cfg) {
  return [steps = cfg.steps](const LossRecord& r) {
    if (r.step % 100 == 0 || r.step == steps) {
      std::cerr << "step " << r.step << "/" << steps << " loss " << fmt("%.5f", r.loss) << " lr "
                << fmt("%.3g", r.lr) << "\n";
    }
  };
}

PretrainResult run_pretrain(const RunConfig& cfg, const fs::path& data_manifest,
                            const fs::path& out) {
  const data::Dataset train = stage("load-data", [&] { return data::load_dataset(data_manifest); });
  stage("config", [&] {
    fs::create_directories(out);
    write_text(out / "config.json", run_config_to_json(cfg) + "\n");
    return 0;
  });
  return stage("pretrain", [&] { return pretrain(cfg, train, out, progress(cfg)); });
}

ProbeRun run_probe_stage(const RunConfig& cfg, const fs::path& checkpoint,
                         const fs::path& train_manifest, const fs::path& test_manifest,
                         const fs::path& out) {
  Model model = stage("load-checkpoint", [&] { return load_model(checkpoint); });
  const auto [train, test] = stage("load-data", [&] {
    return std::pair{data::load_dataset(train_manifest), data::load_dataset(test_manifest)};
  });
  const ProbeRun run = stage("probe", [&] {
    ProbeConfig pc = cfg.probe;
    pc.seed = cfg.seed;
    return run_probe(model, train, test, corpus_task(train.manifest, probe_window_seconds(cfg)), pc);
  });
  stage("write-scores", [&] {
    fs::create_directories(out);
    write_text(out / "scores.csv", scores_csv(run));
    return 0;
  });
  std::cout << run.task.name << ": train " << fmt("%.4f", run.train_score) << " test "
            << fmt("%.4f", run.test_score) << "\n";
  return run;
}

int cmd_synth(const CommonFlags& f) {
  const RunConfig cfg = resolve(f);
  const auto [train, test] = make_corpora(cfg, f.out);
  std::cout << train.string() << "\n" << test.string() << "\n";
  return 0;
}

int cmd_pretrain(const CommonFlags& f, const std::string& data_path) {
  const RunConfig cfg = resolve(f);
  const fs::path out = f.out;
  fs::path manifest = data_path;
  if (manifest.empty()) {
    manifest = stage("synth", [&] {
      data::synth_corpus(cfg.corpus, out / "data" / "train");
      return out / "data" / "train" / "manifest.csv";
    });
  }
  const PretrainResult r = run_pretrain(cfg, manifest, out);
  std::cout << r.final_checkpoint.string() << "\n";
  return 0;
}

int cmd_probe(const CommonFlags& f, const std::string& checkpoint, const std::string& train,
              const std::string& test) {
  const RunConfig cfg = resolve(f);
  fs::path train_m = train;
  fs::path test_m = test;
  if (train_m.empty() != test_m.empty()) {
    throw StageFailure{"config", "--data and --test must be given together"};
  }
  if (train_m.empty()) std::tie(train_m, test_m) = make_corpora(cfg, fs::path(f.out) / "data");
  run_probe_stage(cfg, checkpoint, train_m, test_m, f.out);
  return 0;
}

int cmd_evaluate(const CommonFlags& f) {
  const RunConfig cfg = resolve(f);
  std::string current = "synth";
  EvaluationResult r;
  try {
    r = evaluate_pipeline(
        cfg, f.out, [&](const char* name) { current = name; }, progress(cfg));
  } catch (const std::exception& e) {
    throw StageFailure{current, e.what()};
  }
  std::cout << r.probe.task.name << ": train " << fmt("%.4f", r.probe.train_score) << " test "
            << fmt("%.4f", r.probe.test_score) << "\n";
  std::cerr << "pretrain " << fmt("%.1f", r.pretrain_seconds) << " s, probe "
            << fmt("%.1f", r.probe_seconds) << " s\n";
  return 0;
}

int cmd_shapes(const CommonFlags& f, bool reference, bool params) {
  const RunConfig cfg = resolve(f);
  const ShapeTrace trace = stage("shapes", [&] { return shape_trace(cfg.model); });
  std::printf("%-11s %12s %12s %8s %8s\n", "stage", "slow TxF", "fast TxF", "slow C", "fast C");
  auto cell = [](std::size_t t, std::size_t f) { return std::to_string(t) + "x" + std::to_string(f); };
  for (const auto& r : trace.rows) {
    std::printf("%-11s %12s %12s %8zu %8zu\n", r.stage.c_str(), cell(r.slow_t, r.slow_f).c_str(),
                cell(r.fast_t, r.fast_f).c_str(), r.slow_channels, r.fast_channels);
  }
  std::printf("feature dim %zu\n", trace.feature_dim);

  if (params) {
    stage("params", [&] {
      const Model model(cfg.model, cfg.seed);
      std::printf("\n%-24s %12s\n", "parameters", "count");
      for (const auto& [name, n] : model.parameter_breakdown()) {
        std::printf("%-24s %12zu\n", name.c_str(), n);
      }
      std::printf("%-24s %12zu\n", "total", model.parameter_count());
      return 0;
    });
  }

  if (!reference) return 0;
  std::size_t diffs = 0;
  auto report = [&](const std::string& what, const std::string& got, const std::string& want) {
    if (got == want) return;
    ++diffs;
    std::printf("diff %s: got %s, reference %s\n", what.c_str(), got.c_str(), want.c_str());
  };
  const std::size_t n = std::size(kReferenceRows);
  report("row count", std::to_string(trace.rows.size()), std::to_string(n));
  for (std::size_t i = 0; i < std::min(n, trace.rows.size()); ++i) {
    const auto& r = trace.rows[i];
    const auto& ref = kReferenceRows[i];
    const std::string s = ref.stage;
    report(s + " name", r.stage, s);
    report(s + " slow", cell(r.slow_t, r.slow_f), cell(ref.slow_t, ref.slow_f));
    report(s + " fast", cell(r.fast_t, r.fast_f), cell(ref.fast_t, ref.fast_f));
    report(s + " slow channels", std::to_string(r.slow_channels), std::to_string(ref.slow_channels));
    report(s + " fast channels", std::to_string(r.fast_channels), std::to_string(ref.fast_channels));
  }
  report("feature dim", std::to_string(trace.feature_dim), std::to_string(kReferenceFeatureDim));
  std::printf("reference: %zu diffs\n", diffs);
  if (diffs != 0) throw StageFailure{"shapes", std::to_string(diffs) + " differences from the reference table"};
  return 0;
}

// Score CSVs: header "task,domain,score", one row per task.
std::vector<TaskScore> read_scores(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path.string() + ": cannot open");
  std::vector<TaskScore> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "task,domain,score") {
        throw InputError(path.string() + ": expected header 'task,domain,score'");
      }
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    for (std::string field; std::getline(ss, field, ',');) fields.push_back(field);
    const std::string where = path.string() + " line " + std::to_string(line_no);
    if (fields.size() != 3) throw InputError(where + ": expected 3 fields");
    TaskScore t;
    t.task = fields[0];
    t.domain = fields[1];
    try {
      std::size_t used = 0;
      t.score = std::stod(fields[2], &used);
      if (used != fields[2].size()) throw std::invalid_argument("trailing characters");
    } catch (const std::exception&) {
      throw InputError(where + ", field score: '" + fields[2] + "' is not a number");
    }
    out.push_back(t);
  }
  return out;
}

int cmd_report(const std::vector<std::string>& inputs, const std::string& out) {
  const std::vector<TaskScore> scores = stage("read-scores", [&] {
    std::vector<TaskScore> all;
    for (const auto& p : inputs) {
      const auto s = read_scores(p);
      all.insert(all.end(), s.begin(), s.end());
    }
    return all;
  });
  const HaresReport report = stage("aggregate", [&] { return hares_aggregate(scores); });
  const std::string json = report.to_json();
  if (!out.empty()) stage("write-report", [&] {
      write_text(out, json + "\n");
      return 0;
    });
  std::cout << json << "\n";
  return 0;
}

int run(int argc, char** argv) {
  CLI::App app{"aures: audio representation pretraining and evaluation"};
  app.require_subcommand(1);

  CommonFlags synth_f, pre_f, probe_f, eval_f, shapes_f;
  std::string pre_data, probe_ckpt, probe_data, probe_test;
  bool reference = false;
  bool params = false;
  std::vector<std::string> report_inputs;
  std::string report_out;

  auto* synth = app.add_subcommand("synth", "Write synthetic train/test corpora");
  add_common(synth, synth_f, true);

  auto* pre = app.add_subcommand("pretrain", "Pretrain a backbone");
  add_common(pre, pre_f, true);
  pre->add_option("--data", pre_data, "Training manifest (default: synthesize from config)");

  auto* probe = app.add_subcommand("probe", "Linear probe on frozen features");
  add_common(probe, probe_f, true);
  probe->add_option("--checkpoint", probe_ckpt, "Backbone checkpoint")->required();
  probe->add_option("--data", probe_data, "Training manifest");
  probe->add_option("--test", probe_test, "Test manifest");

  auto* evaluate = app.add_subcommand("evaluate", "Synthesize, pretrain and probe end to end");
  add_common(evaluate, eval_f, true);

  auto* shapes = app.add_subcommand("shapes", "Print the per-stage shape table");
  add_common(shapes, shapes_f, false);
  shapes->add_flag("--reference", reference, "Diff against the published stage table");
  shapes->add_flag("--params", params, "Also print parameter counts per stage");

  auto* report = app.add_subcommand("report", "Aggregate score CSVs");
  report->add_option("inputs", report_inputs, "Score CSV files")->required();
  report->add_option("--out", report_out, "JSON output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*synth) return cmd_synth(synth_f);
    if (*pre) return cmd_pretrain(pre_f, pre_data);
    if (*probe) return cmd_probe(probe_f, probe_ckpt, probe_data, probe_test);
    if (*evaluate) return cmd_evaluate(eval_f);
    if (*shapes) return cmd_shapes(shapes_f, reference, params);
    if (*report) return cmd_report(report_inputs, report_out);
  } catch (const StageFailure& e) {
    std::cerr << "aures: stage '" << e.stage << "' failed: " << e.message << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "aures: failed: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace
}  // namespace aures::tools

int main(int argc, char** argv) { return aures::tools::run(argc, argv); }
