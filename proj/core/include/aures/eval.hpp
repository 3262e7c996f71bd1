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

// Downstream evaluation on frozen features: task descriptions, windowed
// feature extraction, linear / MLP probes, clip scoring, metrics and the
// per-domain benchmark aggregate.

#ifndef AURES_EVAL_HPP_
#define AURES_EVAL_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "aures/dsp.hpp"
#include "aures/layers.hpp"
#include "aures/model.hpp"
#include "aures/objectives.hpp"
#include "aures/tensor.hpp"
#include "aures/train.hpp"

namespace aures {

enum class Domain { kEnvironment, kSpeech, kMusic };
enum class Metric { kAccuracy, kMeanAveragePrecision, kMultiSlotAccuracy };
enum class HeadKind { kLinear, kMlp512 };
enum class Windowing { kWholeClip, kNonOverlapAvg, kOverlap10Avg };

Domain parse_domain(std::string_view name);  // "environment", "speech", "music"
std::string_view domain_name(Domain d);

struct TaskSpec {
  std::string name;
  Domain domain = Domain::kEnvironment;
  double window_seconds = 3.0;
  Metric metric = Metric::kAccuracy;
  HeadKind head = HeadKind::kLinear;
  Windowing windowing = Windowing::kNonOverlapAvg;
  // One entry for single- and multi-label tasks; one per slot otherwise.
  std::vector<std::size_t> slot_arities{2};

  std::size_t label_width() const;
  bool multi_label() const { return metric == Metric::kMeanAveragePrecision; }
};

// Throws ConfigError for combinations outside the benchmark protocol: the
// MLP head and 10-window averaging belong to the tagging (mAP) protocol,
// multi-slot accuracy needs at least two slots and the others exactly one.
void validate(const TaskSpec& task);

// The twelve benchmark tasks with their published protocols.
std::vector<TaskSpec> benchmark_tasks();

// Window start offsets (samples) for a clip of `clip_samples`.
std::vector<std::size_t> window_starts(std::size_t clip_samples, std::size_t window_samples,
                                       Windowing windowing);

struct WindowedFeatures {
  Tensor features;                     // [W, D]
  std::vector<std::size_t> clip_of;    // window -> clip index, non-decreasing
  std::size_t clips = 0;
};

// Eval-mode backbone features of every window of every clip. Windows of a
// whole_clip task span the full clip (zero padded to at least one window).
WindowedFeatures extract_features(Model& model, std::span<const dsp::Waveform> clips,
                                  const TaskSpec& task, std::size_t batch_size = 32);

struct ProbeConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 64;
  double peak_lr = 2e-4;
  double warmup_fraction = 0.05;
  std::uint64_t seed = 0;
};

// Per-slot head on standardized frozen features.
class Probe {
 public:
  Probe() = default;
  Probe(std::size_t in_features, const TaskSpec& task, std::uint64_t seed);

  // Training statistics used to standardize features before the heads.
  void set_feature_stats(std::vector<double> mean, std::vector<double> inv_std);

  // One logit tensor per slot.
  std::vector<Tensor> logits(const Tensor& features) const;
  // Per-window probabilities, slots concatenated: softmax per slot, or
  // elementwise sigmoid for multi-label tasks.
  Tensor probabilities(const Tensor& features) const;
  Tensor loss(const Tensor& features, const Tensor& targets) const;

  std::vector<Tensor> parameters() const;
  const TaskSpec& task() const { return task_; }

 private:
  struct Head {
    bool hidden = false;
    nn::Dense fc1;
    nn::Dense fc2;
  };
  Tensor standardized(const Tensor& features) const;

  TaskSpec task_;
  std::vector<Head> heads_;
  Tensor mean_;
  Tensor inv_std_;
};

// Trains a probe on per-window features; targets are per clip, label_width
// wide (one-hot per slot or multi-hot) and are replicated onto windows.
Probe train_probe(const WindowedFeatures& features, std::span<const std::vector<double>> targets,
                  const TaskSpec& task, const ProbeConfig& cfg);

// Clip-level probabilities: mean over each clip's windows.
std::vector<std::vector<double>> clip_probabilities(const Probe& probe,
                                                    const WindowedFeatures& features);

// Scores in [0, 1] under the task metric.
double score(const Probe& probe, const WindowedFeatures& features,
             std::span<const std::vector<double>> targets);
double score_probabilities(std::span<const std::vector<double>> probs,
                           std::span<const std::vector<double>> targets, const TaskSpec& task);

// Index of the largest value, lowest index on ties.
std::size_t argmax(std::span<const double> v);

// Macro AP over classes with at least one positive, ranking by descending
// score with ties in index order. Throws MetricError if no class counts.
double mean_average_precision(std::span<const std::vector<double>> scores,
                              std::span<const std::vector<double>> labels);

struct TaskScore {
  std::string task;
  std::string domain;
  double score = 0.0;  // percent
};

struct HaresReport {
  std::vector<TaskScore> tasks;
  std::map<std::string, double> domain_means;  // keyed by domain name
  double overall = 0.0;

  static double rounded(double v);  // 0.1 resolution
  std::string to_json() const;
};

// Domain means and the all-task mean (not the mean of domain means).
HaresReport hares_aggregate(std::span<const TaskScore> scores);

}  // namespace aures

#endif  // AURES_EVAL_HPP_
