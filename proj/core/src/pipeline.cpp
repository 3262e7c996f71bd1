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

#include "aures/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string_view>

#include <json.hpp>

#include "aures/checkpoint.hpp"
#include "aures/errors.hpp"
#include "aures/objectives.hpp"
#include "aures/ops.hpp"
#include "aures/train.hpp"

namespace aures {

namespace fs = std::filesystem;

namespace {

std::string rng_state(const std::mt19937_64& rng) {
  std::ostringstream ss;
  ss << rng;
  return ss.str();
}

void round_buffers(const nn::ParameterList& params) {
  for (const auto& p : params) {
    if (p.trainable) continue;
    Tensor buffer = p.tensor;
    round_to_precision(buffer.mutable_values(), Precision::kF32);
  }
}

}  // namespace

std::string format_loss_csv(const std::vector<LossRecord>& log) {
  std::string out = "step,loss,lr\n";
  char buf[96];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", r.step, r.loss, r.lr);
    out += buf;
  }
  return out;
}

double training_window_seconds(const ModelConfig& cfg) {
  return static_cast<double>(dsp::samples_for_frames(cfg.input_frames)) / dsp::kSampleRate;
}

PretrainResult pretrain(const RunConfig& cfg, const data::Dataset& train, const fs::path& out_dir,
                        const StepCallback& on_step) {
  validate(cfg.model);
  if (train.clips.empty()) throw InputError("pretrain: empty dataset");
  if (cfg.batch_size < 2) throw ConfigError("pretrain: batch_size must be at least 2");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (!fs::is_directory(out_dir)) throw IngestError("pretrain: cannot create " + out_dir.string());

  Model model(cfg.model, cfg.seed);
  const bool simclr = cfg.objective == Objective::kSimclr;
  const bool multi = train.manifest.kind == data::LabelKind::kMulti;
  if (!simclr && train.manifest.kind == data::LabelKind::kSlots) {
    throw ConfigError("pretrain: supervised pretraining takes single- or multi-label corpora");
  }
  Projector projector;
  nn::Dense head;
  nn::ParameterList params = model.named_parameters();
  if (simclr) {
    projector = make_projector(cfg.model, model.feature_dim(), cfg.seed + 1);
    projector.collect("projector", params);
  } else {
    std::mt19937_64 head_rng(cfg.seed + 1);
    head = nn::Dense(model.feature_dim(), train.manifest.label_width(), head_rng);
    head.collect("head", params);
    for (auto& p : params) {
      if (p.name.starts_with("head.")) round_to_precision(p.tensor.mutable_values(), Precision::kF32);
    }
  }
  std::vector<Tensor> trainable;
  for (const auto& p : params) {
    if (p.trainable) trainable.push_back(p.tensor);
  }
  Adam adam(trainable, {.storage = Precision::kF32});
  const ScheduleConfig schedule = scaled_schedule(cfg.peak_lr, cfg.steps, cfg.warmup_fraction);
  const ViewGenerator views(cfg.model.input_frames, cfg.model.input_mels, cfg.mix);

  std::mt19937_64 rng(cfg.seed ^ 0x5851f42d4c957f2dULL);
  std::uniform_int_distribution<std::size_t> pick(0, train.clips.size() - 1);

  PretrainResult result;
  result.loss_csv = out_dir / "loss.csv";
  auto save = [&](const fs::path& path, std::size_t step) {
    save_checkpoint(path, cfg.model, step, rng_state(rng), params);
  };

  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    std::vector<dsp::Waveform> clips;
    std::vector<std::vector<double>> labels;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      const std::size_t i = pick(rng);
      clips.push_back(train.clips[i]);
      if (!simclr) labels.push_back(train.targets[i]);
    }
    const nn::ForwardContext ctx{.training = true, .rng = &rng};
    GradTape tape;
    double loss_value = 0.0;
    try {
      GradTape::Scope scope(tape);
      Tensor loss;
      if (simclr) {
        const Tensor a = views.generate(clips, rng);
        const Tensor b = views.generate(clips, rng);
        loss = simclr_loss(model, projector, a, b, ctx, cfg.temperature);
      } else {
        std::vector<std::vector<double>> mixed;
        const Tensor x = views.generate(clips, rng, labels, &mixed);
        std::vector<double> flat;
        for (const auto& t : mixed) flat.insert(flat.end(), t.begin(), t.end());
        const Tensor targets({mixed.size(), mixed[0].size()}, std::move(flat));
        loss = classification_loss(head.forward(model.forward_features(x, ctx)), targets, multi);
      }
      loss_value = loss.item();
      if (!std::isfinite(loss_value)) {
        throw NonFiniteError("pretrain: non-finite loss at step " + std::to_string(step));
      }
      tape.backward(loss);
    } catch (const NonFiniteError& e) {
      if (std::string_view(e.what()).starts_with("pretrain:")) throw;
      throw NonFiniteError("pretrain: non-finite value at step " + std::to_string(step) + ": " +
                           e.what());
    }
    const double lr = lr_at(step, schedule);
    try {
      adam.step(lr);
    } catch (const NonFiniteError& e) {
      throw NonFiniteError("pretrain: step " + std::to_string(step) + ": " + e.what());
    }
    adam.zero_grad();
    round_buffers(params);

    const LossRecord rec{step, loss_value, lr};
    result.log.push_back(rec);
    if (on_step) on_step(rec);
    if (cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 && step != cfg.steps) {
      save(out_dir / ("step_" + std::to_string(step) + ".ckpt"), step);
      data::write_file_atomic(result.loss_csv, format_loss_csv(result.log));
    }
  }
  result.final_checkpoint = out_dir / "final.ckpt";
  save(result.final_checkpoint, cfg.steps);
  data::write_file_atomic(result.loss_csv, format_loss_csv(result.log));
  return result;
}

TaskSpec corpus_task(const data::Manifest& manifest, double window_seconds) {
  TaskSpec t;
  t.name = manifest.task.empty() ? "corpus" : manifest.task;
  t.domain = Domain::kEnvironment;
  t.window_seconds = window_seconds;
  t.head = HeadKind::kLinear;
  t.windowing = Windowing::kNonOverlapAvg;
  t.slot_arities = manifest.arities;
  switch (manifest.kind) {
    case data::LabelKind::kSingle:
      t.metric = Metric::kAccuracy;
      break;
    case data::LabelKind::kMulti:
      t.metric = Metric::kMeanAveragePrecision;
      break;
    case data::LabelKind::kSlots:
      t.metric = Metric::kMultiSlotAccuracy;
      break;
  }
  validate(t);
  return t;
}

ProbeRun run_probe(Model& model, const data::Dataset& train, const data::Dataset& test,
                   const TaskSpec& task, const ProbeConfig& cfg) {
  ProbeRun run;
  run.task = task;
  const auto backbone = model.trainable_parameters();
  run.backbone_checksum_before = parameter_checksum(backbone);
  const WindowedFeatures train_f = extract_features(model, train.clips, task);
  const WindowedFeatures test_f = extract_features(model, test.clips, task);
  const Probe probe = train_probe(train_f, train.targets, task, cfg);
  run.train_score = score(probe, train_f, train.targets);
  run.test_score = score(probe, test_f, test.targets);
  run.backbone_checksum_after = parameter_checksum(model.trainable_parameters());
  return run;
}

data::SynthSpec heldout_spec(const RunConfig& cfg) {
  data::SynthSpec spec = cfg.corpus;
  spec.clips_per_class = cfg.test_clips_per_class;
  spec.seed = cfg.corpus.seed ^ 0x9e3779b97f4a7c15ULL;
  return spec;
}

double probe_window_seconds(const RunConfig& cfg) {
  return cfg.probe_window_seconds > 0.0 ? cfg.probe_window_seconds
                                        : training_window_seconds(cfg.model);
}

std::string scores_csv(const ProbeRun& run) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", 100.0 * run.test_score);
  return "task,domain,score\n" + run.task.name + "," + std::string(domain_name(run.task.domain)) +
         "," + buf + "\n";
}

std::string EvaluationResult::summary_json(const RunConfig& cfg) const {
  const nlohmann::ordered_json j{
      {"objective", std::string(objective_name(cfg.objective))},
      {"norm", std::string(nn::norm_kind_name(cfg.model.norm_kind))},
      {"seed", cfg.seed},
      {"steps", cfg.steps},
      {"final_loss", pretrain.log.empty() ? 0.0 : pretrain.log.back().loss},
      {"task", probe.task.name},
      {"train_score", probe.train_score},
      {"test_score", probe.test_score},
      {"batch_independence_gap", batch_independence_gap},
  };
  return j.dump(2) + "\n";
}

EvaluationResult evaluate_pipeline(const RunConfig& cfg, const fs::path& out_dir,
                                   const StageCallback& on_stage, const StepCallback& on_step) {
  using clock = std::chrono::steady_clock;
  auto enter = [&](const char* name) {
    if (on_stage) on_stage(name);
  };
  EvaluationResult r;
  const auto t0 = clock::now();
  enter("synth");
  data::synth_corpus(cfg.corpus, out_dir / "data" / "train");
  data::synth_corpus(heldout_spec(cfg), out_dir / "data" / "test");
  const data::Dataset train = data::load_dataset(out_dir / "data" / "train" / "manifest.csv");
  const data::Dataset test = data::load_dataset(out_dir / "data" / "test" / "manifest.csv");

  enter("pretrain");
  fs::create_directories(out_dir / "pretrain");
  data::write_file_atomic(out_dir / "pretrain" / "config.json", run_config_to_json(cfg) + "\n");
  r.pretrain = pretrain(cfg, train, out_dir / "pretrain", on_step);
  const auto t1 = clock::now();

  enter("probe");
  Model model = load_model(r.pretrain.final_checkpoint);
  ProbeConfig pc = cfg.probe;
  pc.seed = cfg.seed;
  r.probe = run_probe(model, train, test, corpus_task(train.manifest, probe_window_seconds(cfg)), pc);
  const auto t2 = clock::now();

  enter("summary");
  const ViewGenerator views(cfg.model.input_frames, cfg.model.input_mels, false);
  const std::size_t n = std::min<std::size_t>(4, test.clips.size());
  std::mt19937_64 rng(cfg.seed);
  r.batch_independence_gap = batch_independence_gap(
      model, views.generate(std::span(test.clips).first(n), rng));
  data::write_file_atomic(out_dir / "scores.csv", scores_csv(r.probe));
  data::write_file_atomic(out_dir / "summary.json", r.summary_json(cfg));
  r.pretrain_seconds = std::chrono::duration<double>(t1 - t0).count();
  r.probe_seconds = std::chrono::duration<double>(t2 - t1).count();
  return r;
}

double batch_independence_gap(const Model& model, const Tensor& batch) {
  ModelConfig cfg = model.config();
  cfg.sd_rate = 0.0;
  Model copy(cfg, 0);
  const auto src = model.named_parameters();
  auto dst = copy.named_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    std::ranges::copy(src[i].tensor.values(), dst[i].tensor.mutable_values().begin());
  }
  const std::size_t n = batch.dim(0);
  const std::size_t per = batch.size() / n;
  const Tensor together = copy.forward_features(batch, {.training = true});
  const std::size_t d = copy.feature_dim();
  double gap = 0.0;
  for (std::size_t e = 0; e < n; ++e) {
    Shape one = batch.shape();
    one[0] = 1;
    const auto v = batch.values().subspan(e * per, per);
    const Tensor alone = copy.forward_features(Tensor(one, {v.begin(), v.end()}), {.training = true});
    for (std::size_t j = 0; j < d; ++j) {
      gap = std::max(gap, std::abs(alone.values()[j] - together.values()[e * d + j]));
    }
  }
  return gap;
}

}  // namespace aures
