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

// End-to-end runs: pretraining with either objective, and frozen-feature
// probing of a pretrained backbone on a labelled corpus.

#ifndef AURES_PIPELINE_HPP_
#define AURES_PIPELINE_HPP_

#include <cstddef>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "aures/config.hpp"
#include "aures/data.hpp"
#include "aures/eval.hpp"
#include "aures/model.hpp"

namespace aures {

struct LossRecord {
  std::size_t step = 0;  // 1-based
  double loss = 0.0;
  double lr = 0.0;
};

struct PretrainResult {
  std::vector<LossRecord> log;
  std::filesystem::path final_checkpoint;
  std::filesystem::path loss_csv;
};

// Called after every step; may be empty.
using StepCallback = std::function<void(const LossRecord&)>;

// Trains cfg.model from scratch on the dataset. Writes loss.csv
// (step,loss,lr), step_<N>.ckpt every cfg.checkpoint_every steps and
// final.ckpt into out_dir. Deterministic for a fixed config. A non-finite
// loss throws NonFiniteError naming the step.
PretrainResult pretrain(const RunConfig& cfg, const data::Dataset& train,
                        const std::filesystem::path& out_dir, const StepCallback& on_step = {});

std::string format_loss_csv(const std::vector<LossRecord>& log);

// Window length matching the model's training crops.
double training_window_seconds(const ModelConfig& cfg);

// Probe task for a corpus manifest: accuracy for single labels, mAP for
// multi-label, multi-slot accuracy for slot labels; linear head;
// non-overlapped windows of `window_seconds`.
TaskSpec corpus_task(const data::Manifest& manifest, double window_seconds);

struct ProbeRun {
  TaskSpec task;
  double train_score = 0.0;
  double test_score = 0.0;
  std::uint64_t backbone_checksum_before = 0;
  std::uint64_t backbone_checksum_after = 0;
};

// Extracts frozen features, trains a probe on `train` and scores both sets.
ProbeRun run_probe(Model& model, const data::Dataset& train, const data::Dataset& test,
                   const TaskSpec& task, const ProbeConfig& cfg);

// Held-out corpus matching cfg.corpus: test_clips_per_class clips per class
// from a seed stream disjoint from the training corpus.
data::SynthSpec heldout_spec(const RunConfig& cfg);

// cfg.probe_window_seconds, or the training crop length when that is 0.
double probe_window_seconds(const RunConfig& cfg);

struct EvaluationResult {
  PretrainResult pretrain;
  ProbeRun probe;
  double batch_independence_gap = 0.0;  // on 4 held-out views
  double pretrain_seconds = 0.0;
  double probe_seconds = 0.0;

  // Deterministic summary (no timings).
  std::string summary_json(const RunConfig& cfg) const;
};

// Called with the name of each stage as it starts: synth, pretrain, probe,
// summary.
using StageCallback = std::function<void(const char*)>;

// Synthesizes train/test corpora under out_dir/data, pretrains into
// out_dir/pretrain, probes the frozen backbone and writes
// out_dir/scores.csv (task,domain,score) and out_dir/summary.json.
EvaluationResult evaluate_pipeline(const RunConfig& cfg, const std::filesystem::path& out_dir,
                                   const StageCallback& on_stage = {},
                                   const StepCallback& on_step = {});

std::string scores_csv(const ProbeRun& run);

// Largest |f(x_i | batch) - f(x_i alone)| over the examples of `batch`,
// with the normalizers in training mode. Runs on a copy of the weights with
// stochastic depth disabled so the comparison is deterministic; the model
// itself is left untouched.
double batch_independence_gap(const Model& model, const Tensor& batch);

}  // namespace aures

#endif  // AURES_PIPELINE_HPP_
