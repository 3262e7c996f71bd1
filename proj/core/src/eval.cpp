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

#include "aures/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include <json.hpp>

#include "aures/errors.hpp"
#include "aures/ops.hpp"

namespace aures {

namespace {

constexpr std::size_t kMlpHidden = 512;
constexpr std::size_t kOverlapWindows = 10;

std::size_t seconds_to_samples(double seconds) {
  return static_cast<std::size_t>(std::lround(seconds * dsp::kSampleRate));
}

// Columns [c0, c0 + width) of a [N, W] constant tensor.
Tensor column_block(const Tensor& t, std::size_t c0, std::size_t width) {
  const std::size_t n = t.dim(0);
  const std::size_t w = t.dim(1);
  std::vector<double> out(n * width);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy_n(t.values().begin() + static_cast<std::ptrdiff_t>(i * w + c0), width,
                out.begin() + static_cast<std::ptrdiff_t>(i * width));
  }
  return Tensor({n, width}, std::move(out));
}

}  // namespace

Domain parse_domain(std::string_view name) {
  if (name == "environment" || name == "env") return Domain::kEnvironment;
  if (name == "speech") return Domain::kSpeech;
  if (name == "music") return Domain::kMusic;
  if (name.empty()) throw ConfigError("missing domain tag");
  throw ConfigError("unknown domain '" + std::string(name) +
                    "' (expected environment, speech or music)");
}

std::string_view domain_name(Domain d) {
  switch (d) {
    case Domain::kEnvironment:
      return "environment";
    case Domain::kSpeech:
      return "speech";
    case Domain::kMusic:
      return "music";
  }
  return "environment";
}

std::size_t TaskSpec::label_width() const {
  return std::accumulate(slot_arities.begin(), slot_arities.end(), std::size_t{0});
}

void validate(const TaskSpec& task) {
  const std::string where = "task '" + task.name + "': ";
  if (task.slot_arities.empty()) throw ConfigError(where + "no label slots");
  for (std::size_t a : task.slot_arities) {
    if (a < 2 && task.metric != Metric::kMeanAveragePrecision) {
      throw ConfigError(where + "a slot needs at least 2 classes");
    }
    if (a == 0) throw ConfigError(where + "empty label slot");
  }
  if (!(task.window_seconds > 0.0)) throw ConfigError(where + "window must be positive");
  const bool tagging = task.metric == Metric::kMeanAveragePrecision;
  if (task.head == HeadKind::kMlp512 && !tagging) {
    throw ConfigError(where + "the 512-unit MLP head is only used for tagging (mAP) tasks");
  }
  if (task.windowing == Windowing::kOverlap10Avg && !tagging) {
    throw ConfigError(where + "10 overlapping windows are only used for tagging (mAP) tasks");
  }
  if (task.metric == Metric::kMultiSlotAccuracy && task.slot_arities.size() < 2) {
    throw ConfigError(where + "multi-slot accuracy needs at least two slots");
  }
  if (task.metric != Metric::kMultiSlotAccuracy && task.slot_arities.size() != 1) {
    throw ConfigError(where + "only multi-slot tasks take several slots");
  }
}

std::vector<TaskSpec> benchmark_tasks() {
  using enum Domain;
  using enum Metric;
  using enum Windowing;
  const auto linear = HeadKind::kLinear;
  return {
      {"audioset", kEnvironment, 3.0, kMeanAveragePrecision, HeadKind::kMlp512, kOverlap10Avg,
       {527}},
      {"birdsong", kEnvironment, 1.0, kAccuracy, linear, kNonOverlapAvg, {2}},
      {"tut18", kEnvironment, 5.0, kAccuracy, linear, kNonOverlapAvg, {10}},
      {"esc50", kEnvironment, 5.0, kAccuracy, linear, kWholeClip, {50}},
      {"speech_commands_v1", kSpeech, 1.0, kAccuracy, linear, kWholeClip, {12}},
      {"speech_commands_v2", kSpeech, 1.0, kAccuracy, linear, kWholeClip, {35}},
      {"voxforge", kSpeech, 3.0, kAccuracy, linear, kNonOverlapAvg, {6}},
      {"voxceleb", kSpeech, 3.0, kAccuracy, linear, kNonOverlapAvg, {1251}},
      {"fluent_commands", kSpeech, 3.0, kMultiSlotAccuracy, linear, kNonOverlapAvg, {6, 14, 4}},
      {"nsynth_pitch", kMusic, 1.0, kAccuracy, linear, kNonOverlapAvg, {128}},
      {"nsynth_instrument", kMusic, 4.0, kAccuracy, linear, kWholeClip, {11}},
      {"magnatagatune", kMusic, 3.0, kMeanAveragePrecision, linear, kNonOverlapAvg, {50}},
  };
}

std::vector<std::size_t> window_starts(std::size_t clip_samples, std::size_t window_samples,
                                       Windowing windowing) {
  if (window_samples == 0) throw ConfigError("window length must be positive");
  switch (windowing) {
    case Windowing::kWholeClip:
      return {0};
    case Windowing::kNonOverlapAvg: {
      const std::size_t count =
          std::max<std::size_t>(1, (clip_samples + window_samples - 1) / window_samples);
      std::vector<std::size_t> starts(count);
      for (std::size_t i = 0; i < count; ++i) starts[i] = i * window_samples;
      return starts;
    }
    case Windowing::kOverlap10Avg: {
      const double span =
          clip_samples > window_samples ? static_cast<double>(clip_samples - window_samples) : 0.0;
      std::vector<std::size_t> starts(kOverlapWindows);
      for (std::size_t i = 0; i < kOverlapWindows; ++i) {
        starts[i] = static_cast<std::size_t>(
            std::llround(span * static_cast<double>(i) / (kOverlapWindows - 1)));
      }
      return starts;
    }
  }
  return {0};
}

WindowedFeatures extract_features(Model& model, std::span<const dsp::Waveform> clips,
                                  const TaskSpec& task, std::size_t batch_size) {
  validate(task);
  if (batch_size == 0) throw ConfigError("feature batch size must be positive");
  const std::size_t window = seconds_to_samples(task.window_seconds);
  // Only the whole-clip frontend is used; the crop length is irrelevant.
  const ViewGenerator frontend(1, model.config().input_mels, false);
  const nn::ForwardContext eval{};
  const std::size_t multiple = frame_multiple(model.config());

  WindowedFeatures out;
  out.clips = clips.size();
  std::vector<double> values;
  std::vector<Tensor> pending;
  auto flush = [&] {
    if (pending.empty()) return;
    const Tensor feats = model.forward_features(concat(pending, 0), eval);
    values.insert(values.end(), feats.values().begin(), feats.values().end());
    pending.clear();
  };

  for (std::size_t c = 0; c < clips.size(); ++c) {
    const dsp::Waveform& clip = clips[c];
    if (task.windowing == Windowing::kWholeClip) {
      // Clip lengths differ, so whole-clip windows run one at a time.
      flush();
      const std::size_t len = std::max(window, clip.samples.size());
      pending.push_back(pad_frames(frontend.features(dsp::pad_to(clip, len)), multiple));
      flush();
      out.clip_of.push_back(c);
      continue;
    }
    for (std::size_t start : window_starts(clip.samples.size(), window, task.windowing)) {
      pending.push_back(pad_frames(frontend.features(dsp::slice(clip, start, window)), multiple));
      out.clip_of.push_back(c);
      if (pending.size() == batch_size) flush();
    }
  }
  flush();
  const std::size_t d = model.feature_dim();
  out.features = Tensor({out.clip_of.size(), d}, std::move(values));
  return out;
}

Probe::Probe(std::size_t in_features, const TaskSpec& task, std::uint64_t seed) : task_(task) {
  validate(task);
  std::mt19937_64 rng(seed);
  for (std::size_t arity : task.slot_arities) {
    Head h;
    if (task.head == HeadKind::kMlp512) {
      h.hidden = true;
      h.fc1 = nn::Dense(in_features, kMlpHidden, rng);
      h.fc2 = nn::Dense(kMlpHidden, arity, rng);
    } else {
      h.fc2 = nn::Dense(in_features, arity, rng);
    }
    heads_.push_back(std::move(h));
  }
  mean_ = Tensor({in_features}, 0.0);
  inv_std_ = Tensor({in_features}, 1.0);
}

void Probe::set_feature_stats(std::vector<double> mean, std::vector<double> inv_std) {
  const std::size_t d = mean_.size();
  if (mean.size() != d || inv_std.size() != d) {
    throw DimensionError("probe feature statistics must have " + std::to_string(d) + " entries");
  }
  for (double& m : mean) m = -m;
  mean_ = Tensor({d}, std::move(mean));
  inv_std_ = Tensor({d}, std::move(inv_std));
}

Tensor Probe::standardized(const Tensor& features) const {
  if (features.rank() != 2 || features.dim(1) != mean_.size()) {
    throw DimensionError("probe expects [N, " + std::to_string(mean_.size()) + "] features, got " +
                         shape_string(features.shape()));
  }
  return mul_channel(add_channel(features, mean_), inv_std_);
}

std::vector<Tensor> Probe::logits(const Tensor& features) const {
  const Tensor x = standardized(features);
  std::vector<Tensor> out;
  for (const auto& h : heads_) {
    out.push_back(h.hidden ? h.fc2.forward(nn::activation(h.fc1.forward(x))) : h.fc2.forward(x));
  }
  return out;
}

Tensor Probe::probabilities(const Tensor& features) const {
  std::vector<Tensor> parts;
  for (const Tensor& l : logits(features)) {
    parts.push_back(task_.multi_label() ? sigmoid(l) : softmax(l, 1));
  }
  return parts.size() == 1 ? parts[0] : concat(parts, 1);
}

Tensor Probe::loss(const Tensor& features, const Tensor& targets) const {
  if (targets.rank() != 2 || targets.dim(1) != task_.label_width()) {
    throw DimensionError("probe targets must be [N, " + std::to_string(task_.label_width()) + "]");
  }
  const std::vector<Tensor> ls = logits(features);
  if (ls.size() == 1) return classification_loss(ls[0], targets, task_.multi_label());
  std::vector<SlotLogits> slots;
  std::size_t c0 = 0;
  for (std::size_t s = 0; s < ls.size(); ++s) {
    const std::size_t a = task_.slot_arities[s];
    slots.push_back({ls[s], column_block(targets, c0, a)});
    c0 += a;
  }
  return classification_loss(slots);
}

std::vector<Tensor> Probe::parameters() const {
  std::vector<Tensor> out;
  for (const auto& h : heads_) {
    nn::ParameterList list;
    if (h.hidden) h.fc1.collect("fc1", list);
    h.fc2.collect("fc2", list);
    for (auto& p : list) out.push_back(p.tensor);
  }
  return out;
}

Probe train_probe(const WindowedFeatures& features, std::span<const std::vector<double>> targets,
                  const TaskSpec& task, const ProbeConfig& cfg) {
  validate(task);
  if (targets.size() != features.clips) {
    throw DimensionError("train_probe: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(features.clips) + " clips");
  }
  const std::size_t width = task.label_width();
  for (std::size_t c = 0; c < targets.size(); ++c) {
    if (targets[c].size() != width) {
      throw DimensionError("train_probe: clip " + std::to_string(c) + " target has width " +
                           std::to_string(targets[c].size()) + ", expected " +
                           std::to_string(width));
    }
    for (double t : targets[c]) {
      if (!(t >= 0.0 && t <= 1.0)) {
        throw InputError("train_probe: clip " + std::to_string(c) + " label out of range");
      }
    }
  }
  const Tensor& x = features.features;
  const std::size_t w = x.dim(0);
  const std::size_t d = x.dim(1);
  if (w == 0) throw InputError("train_probe: no windows");

  std::vector<double> mean(d, 0.0), inv_std(d, 0.0);
  for (std::size_t i = 0; i < w; ++i) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += x.values()[i * d + j];
  }
  for (double& m : mean) m /= static_cast<double>(w);
  for (std::size_t i = 0; i < w; ++i) {
    for (std::size_t j = 0; j < d; ++j) inv_std[j] += std::pow(x.values()[i * d + j] - mean[j], 2);
  }
  for (double& s : inv_std) s = 1.0 / std::sqrt(s / static_cast<double>(w) + 1e-12);

  Probe probe(d, task, cfg.seed);
  probe.set_feature_stats(std::move(mean), std::move(inv_std));
  Adam adam(probe.parameters());
  const ScheduleConfig schedule = scaled_schedule(cfg.peak_lr, cfg.steps, cfg.warmup_fraction);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_int_distribution<std::size_t> pick(0, w - 1);
  const std::size_t bs = std::min(cfg.batch_size, w);

  for (std::size_t step = 0; step < cfg.steps; ++step) {
    std::vector<double> xb(bs * d), tb(bs * width);
    for (std::size_t b = 0; b < bs; ++b) {
      const std::size_t i = pick(rng);
      std::copy_n(x.values().begin() + static_cast<std::ptrdiff_t>(i * d), d,
                  xb.begin() + static_cast<std::ptrdiff_t>(b * d));
      const auto& t = targets[features.clip_of[i]];
      std::copy(t.begin(), t.end(), tb.begin() + static_cast<std::ptrdiff_t>(b * width));
    }
    GradTape tape;
    {
      GradTape::Scope scope(tape);
      const Tensor loss = probe.loss(Tensor({bs, d}, std::move(xb)), Tensor({bs, width}, tb));
      tape.backward(loss);
    }
    adam.step(lr_at(step + 1, schedule));
    adam.zero_grad();
  }
  return probe;
}

std::vector<std::vector<double>> clip_probabilities(const Probe& probe,
                                                    const WindowedFeatures& features) {
  const Tensor p = probe.probabilities(features.features);
  const std::size_t k = p.dim(1);
  std::vector<std::vector<double>> out(features.clips, std::vector<double>(k, 0.0));
  std::vector<std::size_t> counts(features.clips, 0);
  for (std::size_t i = 0; i < features.clip_of.size(); ++i) {
    const std::size_t c = features.clip_of[i];
    for (std::size_t j = 0; j < k; ++j) out[c][j] += p.values()[i * k + j];
    ++counts[c];
  }
  for (std::size_t c = 0; c < out.size(); ++c) {
    if (counts[c] == 0) throw InputError("clip " + std::to_string(c) + " has no windows");
    for (double& v : out[c]) v /= static_cast<double>(counts[c]);
  }
  return out;
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw DimensionError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

double score_probabilities(std::span<const std::vector<double>> probs,
                           std::span<const std::vector<double>> targets, const TaskSpec& task) {
  if (probs.size() != targets.size()) throw DimensionError("score: clip counts differ");
  if (probs.empty()) throw MetricError("score: no clips");
  if (task.metric == Metric::kMeanAveragePrecision) return mean_average_precision(probs, targets);
  std::size_t correct = 0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    bool all = true;
    std::size_t c0 = 0;
    for (std::size_t a : task.slot_arities) {
      const std::span<const double> p(probs[c].data() + c0, a);
      const std::span<const double> t(targets[c].data() + c0, a);
      all = all && argmax(p) == argmax(t);
      c0 += a;
    }
    correct += all ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(probs.size());
}

double score(const Probe& probe, const WindowedFeatures& features,
             std::span<const std::vector<double>> targets) {
  return score_probabilities(clip_probabilities(probe, features), targets, probe.task());
}

double mean_average_precision(std::span<const std::vector<double>> scores,
                              std::span<const std::vector<double>> labels) {
  if (scores.size() != labels.size()) throw DimensionError("mAP: row counts differ");
  if (scores.empty()) throw MetricError("mAP: no examples");
  const std::size_t n = scores.size();
  const std::size_t k = scores[0].size();
  for (std::size_t i = 0; i < n; ++i) {
    if (scores[i].size() != k || labels[i].size() != k) {
      throw DimensionError("mAP: ragged score/label rows");
    }
  }
  double total = 0.0;
  std::size_t counted = 0;
  std::vector<std::size_t> order(n);
  for (std::size_t j = 0; j < k; ++j) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a][j] > scores[b][j]; });
    std::size_t hits = 0;
    double ap = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      if (labels[order[r]][j] > 0.5) {
        ++hits;
        ap += static_cast<double>(hits) / static_cast<double>(r + 1);
      }
    }
    if (hits == 0) continue;
    total += ap / static_cast<double>(hits);
    ++counted;
  }
  if (counted == 0) throw MetricError("mAP: no class has a positive example");
  return total / static_cast<double>(counted);
}

double HaresReport::rounded(double v) { return std::round(v * 10.0) / 10.0; }

std::string HaresReport::to_json() const {
  nlohmann::ordered_json j;
  j["tasks"] = nlohmann::ordered_json::object();
  for (const auto& t : tasks) {
    j["tasks"][t.task] = {{"domain", t.domain}, {"score", t.score}};
  }
  j["domains"] = nlohmann::ordered_json::object();
  for (const auto& [name, mean] : domain_means) {
    j["domains"][name] = {{"mean", mean}, {"rounded", rounded(mean)}};
  }
  j["overall"] = {{"mean", overall}, {"rounded", rounded(overall)}};
  return j.dump(2);
}

HaresReport hares_aggregate(std::span<const TaskScore> scores) {
  if (scores.empty()) throw MetricError("aggregate: no task scores");
  HaresReport report;
  std::map<std::string, std::pair<double, std::size_t>> sums;
  double total = 0.0;
  for (const auto& s : scores) {
    if (s.domain.empty()) throw ConfigError("task '" + s.task + "' is missing a domain tag");
    const std::string domain(domain_name(parse_domain(s.domain)));
    report.tasks.push_back({s.task, domain, s.score});
    sums[domain].first += s.score;
    ++sums[domain].second;
    total += s.score;
  }
  for (const auto& [name, acc] : sums) {
    report.domain_means[name] = acc.first / static_cast<double>(acc.second);
  }
  report.overall = total / static_cast<double>(scores.size());
  return report;
}

}  // namespace aures
