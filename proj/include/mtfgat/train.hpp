/*
 * Copyright 2026 The mtfgat Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mtfgat/gat_model.hpp"
#include "mtfgat/inject.hpp"
#include "mtfgat/metrics.hpp"
#include "mtfgat/mtf_graph.hpp"
#include "mtfgat/tensor.hpp"

namespace mtfgat {

enum class OptimizerKind { Sgd, Adam };

struct TrainConfig {
  std::size_t n_splits = 10;
  double test_fraction = 0.2;
  std::size_t epochs = 30;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::uint64_t seed = 1;
  double threshold = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t workers = 1;

  /// Throws ConfigError unless 0 < test_fraction < 1, epochs >= 1,
  /// n_splits >= 1, learning_rate > 0 and workers >= 1.
  void validate() const;
  /// Sets one field from its key=value spelling. Throws ConfigError.
  void set(std::string_view key, std::string_view value);
  std::vector<std::pair<std::string, std::string>> to_key_values() const;
};

/// Flat `key=value` lines; `#` starts a comment. Unknown keys are errors.
TrainConfig parse_train_config(std::istream& in, TrainConfig base = {});
void write_train_config(std::ostream& out, const TrainConfig& cfg);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  friend bool operator==(const Split&, const Split&) = default;
};

/// Repeated shuffled train/test partitions that keep each stratum's share:
/// a stratum of n members puts round(n * test_fraction) of them (at least
/// one, at most n - 1) in the test side. Throws ConfigError if any stratum
/// has fewer than 2 members.
std::vector<Split> stratified_shuffle_split(std::span<const AnomalyKind> strata,
                                            std::size_t n_splits, double test_fraction,
                                            std::uint64_t seed);

struct ClassWeights {
  double anomalous = 1.0;
  double normal = 1.0;
};

/// w_c = total / (2 * n_c). Throws ConfigError if a class has no points.
ClassWeights class_weights_from_counts(std::uint64_t anomalous_points,
                                       std::uint64_t normal_points);

/// -(1/N) * sum_i w_{y_i} * [y_i ln p_i + (1 - y_i) ln(1 - p_i)], logs
/// clamped at 1e-12. Recorded on the tape of `probabilities` (N x 1).
Var weighted_bce(Var probabilities, std::span<const std::uint8_t> labels,
                 const ClassWeights& weights);
double weighted_bce(std::span<const double> probabilities, std::span<const std::uint8_t> labels,
                    const ClassWeights& weights);

/// Graphs and labels ready for training, index-aligned with the dataset.
struct PreparedDataset {
  std::vector<CompressedGraph> graphs;
  std::vector<std::vector<std::uint8_t>> labels;
  std::vector<AnomalyKind> kinds;

  /// Throws ShapeError if graphs and traces disagree in count, link id or
  /// length.
  static PreparedDataset from(std::span<const LabeledTrace> dataset,
                              std::span<const TsGraph> graphs);
  std::size_t size() const { return graphs.size(); }
};

ClassWeights class_weights(const PreparedDataset& data, std::span<const std::size_t> indices);

struct FitResult {
  GatModel model;
  std::vector<double> epoch_losses;  // mean training loss per epoch
  ClassWeights weights;
  std::size_t steps = 0;
};

/// Trains a fresh model on `train` one graph per step, reshuffling every
/// epoch. Throws TrainingError if the loss stops being finite.
FitResult fit(const PreparedDataset& data, std::span<const std::size_t> train,
              std::uint64_t model_seed, const TrainConfig& cfg,
              const ModelConfig& model_config = ModelConfig::standard(), std::size_t split_id = 0);

/// Pooled per-point confusion of `model` over the traces in `indices`.
ClassConfusion evaluate(const PreparedDataset& data, std::span<const std::size_t> indices,
                        const GatModel& model, double threshold);

struct SplitResult {
  Split split;
  FitResult fit;
  ClassConfusion counts;
  ClassScores scores;
};

struct CrossValidation {
  std::vector<SplitResult> splits;
  EvalReport report;
};

/// Seed of the model trained on split `split_id`.
std::uint64_t split_model_seed(std::uint64_t seed, std::size_t split_id);

/// One fresh model per stratified split, evaluated on that split's test
/// traces; the report averages the per-split scores. Splits may run on
/// cfg.workers threads; results do not depend on the worker count.
CrossValidation cross_validate(const PreparedDataset& data, const TrainConfig& cfg,
                               const ModelConfig& model_config = ModelConfig::standard());

/// CSV `split,epoch,loss`.
void write_loss_curves(std::ostream& out, std::span<const SplitResult> splits);

}  // namespace mtfgat
