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

#include "mtfgat/train.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <istream>
#include <map>
#include <ostream>
#include <thread>

#include "mtfgat/error.hpp"
#include "mtfgat/random.hpp"
#include "mtfgat/text.hpp"

namespace mtfgat {

void TrainConfig::validate() const {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must be in (0, 1)");
  }
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (n_splits < 1) throw ConfigError("splits must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
    throw ConfigError("adam constants out of range");
  }
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  auto real = [&](double& field) {
    if (!parse_double(value, field)) {
      throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(value) + "'");
    }
  };
  auto count = [&](auto& field) {
    std::uint64_t v = 0;
    if (!parse_uint(value, v)) {
      throw ConfigError("bad value for " + std::string(key) + ": '" + std::string(value) + "'");
    }
    field = static_cast<std::remove_reference_t<decltype(field)>>(v);
  };
  if (key == "splits") count(n_splits);
  else if (key == "test_fraction") real(test_fraction);
  else if (key == "epochs") count(epochs);
  else if (key == "learning_rate") real(learning_rate);
  else if (key == "seed") count(seed);
  else if (key == "threshold") real(threshold);
  else if (key == "beta1") real(beta1);
  else if (key == "beta2") real(beta2);
  else if (key == "epsilon") real(epsilon);
  else if (key == "workers") count(workers);
  else if (key == "optimizer") {
    if (value == "adam") optimizer = OptimizerKind::Adam;
    else if (value == "sgd") optimizer = OptimizerKind::Sgd;
    else throw ConfigError("optimizer must be 'adam' or 'sgd'");
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_key_values() const {
  return {
      {"splits", std::to_string(n_splits)},
      {"test_fraction", format_double(test_fraction)},
      {"epochs", std::to_string(epochs)},
      {"learning_rate", format_double(learning_rate)},
      {"optimizer", optimizer == OptimizerKind::Adam ? "adam" : "sgd"},
      {"seed", std::to_string(seed)},
      {"threshold", format_double(threshold)},
      {"beta1", format_double(beta1)},
      {"beta2", format_double(beta2)},
      {"epsilon", format_double(epsilon)},
  };
}

TrainConfig parse_train_config(std::istream& in, TrainConfig base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto text = line.substr(0, line.find('#'));
    const auto body = trim(text);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw ParseError(line_no, "expected key=value");
    try {
      base.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return base;
}

void write_train_config(std::ostream& out, const TrainConfig& cfg) {
  for (const auto& [key, value] : cfg.to_key_values()) out << key << '=' << value << '\n';
}

std::vector<Split> stratified_shuffle_split(std::span<const AnomalyKind> strata,
                                            std::size_t n_splits, double test_fraction,
                                            std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must be in (0, 1)");
  }
  std::map<AnomalyKind, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);
  for (const auto& [kind, members] : groups) {
    if (members.size() < 2) {
      throw ConfigError("stratum " + std::string(to_string(kind)) + " has " +
                        std::to_string(members.size()) + " member(s); need at least 2");
    }
  }

  std::vector<Split> splits(n_splits);
  for (std::size_t s = 0; s < n_splits; ++s) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(s)));
    for (const auto& [kind, members] : groups) {
      auto order = members;
      rng.shuffle(std::span(order));
      const auto n = static_cast<double>(order.size());
      auto n_test = static_cast<std::size_t>(std::llround(n * test_fraction));
      n_test = std::clamp<std::size_t>(n_test, 1, order.size() - 1);
      splits[s].test.insert(splits[s].test.end(), order.begin(), order.begin() + n_test);
      splits[s].train.insert(splits[s].train.end(), order.begin() + n_test, order.end());
    }
    std::sort(splits[s].train.begin(), splits[s].train.end());
    std::sort(splits[s].test.begin(), splits[s].test.end());
  }
  return splits;
}

ClassWeights class_weights_from_counts(std::uint64_t anomalous_points,
                                       std::uint64_t normal_points) {
  if (anomalous_points == 0 || normal_points == 0) {
    throw ConfigError("class weights need both classes among the training points (anomalous=" +
                      std::to_string(anomalous_points) +
                      ", non-anomalous=" + std::to_string(normal_points) + ")");
  }
  const double total = static_cast<double>(anomalous_points + normal_points);
  return {total / (2.0 * static_cast<double>(anomalous_points)),
          total / (2.0 * static_cast<double>(normal_points))};
}

Var weighted_bce(Var probabilities, std::span<const std::uint8_t> labels,
                 const ClassWeights& weights) {
  const std::size_t n = probabilities.value().size();
  if (labels.size() != n) throw ShapeError("weighted_bce: label count differs");
  Tape& tape = *probabilities.tape();
  Tensor positive(n, 1);
  Tensor negative(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i]) positive.data[i] = weights.anomalous;
    else negative.data[i] = weights.normal;
  }
  constexpr double kFloor = 1e-12;
  const Var log_p = clamped_log(probabilities, kFloor);
  const Var log_q = clamped_log(affine(probabilities, -1.0, 1.0), kFloor);
  const Var terms = add(mul(tape.constant(std::move(positive)), log_p),
                        mul(tape.constant(std::move(negative)), log_q));
  return scale(sum(terms), -1.0 / static_cast<double>(n));
}

double weighted_bce(std::span<const double> probabilities, std::span<const std::uint8_t> labels,
                    const ClassWeights& weights) {
  if (labels.size() != probabilities.size()) throw ShapeError("weighted_bce: label count differs");
  constexpr double kFloor = 1e-12;
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probabilities[i];
    total += labels[i] ? weights.anomalous * std::log(std::max(p, kFloor))
                       : weights.normal * std::log(std::max(1.0 - p, kFloor));
  }
  return -total / static_cast<double>(labels.size());
}

PreparedDataset PreparedDataset::from(std::span<const LabeledTrace> dataset,
                                      std::span<const TsGraph> graphs) {
  if (dataset.size() != graphs.size()) {
    throw ShapeError("dataset has " + std::to_string(dataset.size()) + " traces but " +
                     std::to_string(graphs.size()) + " graphs");
  }
  PreparedDataset out;
  out.graphs.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (graphs[i].n_nodes() != dataset[i].labels.size()) {
      throw ShapeError("graph " + std::to_string(i) + " has " +
                       std::to_string(graphs[i].n_nodes()) + " nodes but its trace has " +
                       std::to_string(dataset[i].labels.size()) + " labels");
    }
    if (!graphs[i].link_id.empty() && graphs[i].link_id != dataset[i].trace.link_id) {
      throw ShapeError("graph " + std::to_string(i) + " belongs to link '" + graphs[i].link_id +
                       "', trace is '" + dataset[i].trace.link_id + "'");
    }
    out.graphs.push_back(CompressedGraph::from(AttentionGraph::from(graphs[i])));
    out.labels.push_back(dataset[i].labels);
    out.kinds.push_back(dataset[i].kind);
  }
  return out;
}

ClassWeights class_weights(const PreparedDataset& data, std::span<const std::size_t> indices) {
  std::uint64_t anomalous = 0;
  std::uint64_t total = 0;
  for (auto i : indices) {
    for (auto y : data.labels[i]) anomalous += y ? 1 : 0;
    total += data.labels[i].size();
  }
  return class_weights_from_counts(anomalous, total - anomalous);
}

namespace {

class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, const GatModel& model) : cfg_(cfg) {
    if (cfg.optimizer == OptimizerKind::Adam) {
      for (const auto& p : model.parameters) {
        m_.emplace_back(p.tensor.size(), 0.0);
        v_.emplace_back(p.tensor.size(), 0.0);
      }
    }
  }

  void step(GatModel& model, const ParameterVars& vars) {
    ++t_;
    const double lr = cfg_.learning_rate;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < model.parameters.size(); ++k) {
      const auto g = vars.vars[k].grad();
      if (g.empty()) continue;
      auto& w = model.parameters[k].tensor.data;
      if (cfg_.optimizer == OptimizerKind::Sgd) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
        continue;
      }
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < w.size(); ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
        w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg_.epsilon);
      }
    }
  }

 private:
  const TrainConfig& cfg_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  std::uint64_t t_ = 0;
};

}  // namespace

FitResult fit(const PreparedDataset& data, std::span<const std::size_t> train,
              std::uint64_t model_seed, const TrainConfig& cfg, const ModelConfig& model_config,
              std::size_t split_id) {
  cfg.validate();
  if (train.empty()) throw ConfigError("fit needs at least one training trace");

  FitResult result;
  result.model = GatModel::initialize(model_config, model_seed);
  result.weights = class_weights(data, train);
  Optimizer optimizer(cfg, result.model);
  std::vector<std::size_t> order(train.begin(), train.end());

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Rng rng(derive_seed(model_seed, static_cast<std::uint64_t>(epoch)));
    rng.shuffle(std::span(order));
    double epoch_total = 0.0;
    for (auto idx : order) {
      Tape tape;
      const auto vars = ParameterVars::bind(tape, result.model, true);
      double loss_value = 0.0;
      try {
        const Var probs = model_forward(data.graphs[idx], result.model, vars);
        const Var loss = weighted_bce(probs, data.labels[idx], result.weights);
        loss_value = loss.value().data[0];
        tape.backward(loss);
      } catch (const NumericError& e) {
        throw TrainingError(split_id, epoch + 1, e.what());
      }
      if (!std::isfinite(loss_value)) {
        throw TrainingError(split_id, epoch + 1, "loss is not finite");
      }
      optimizer.step(result.model, vars);
      epoch_total += loss_value;
      ++result.steps;
    }
    const double mean = epoch_total / static_cast<double>(order.size());
    if (!std::isfinite(mean)) throw TrainingError(split_id, epoch + 1, "loss is not finite");
    result.epoch_losses.push_back(mean);
  }
  return result;
}

ClassConfusion evaluate(const PreparedDataset& data, std::span<const std::size_t> indices,
                        const GatModel& model, double threshold) {
  ClassConfusion total;
  for (auto i : indices) {
    const auto predicted = predict(data.graphs[i], model, threshold);
    total += confusion(predicted, data.labels[i]);
  }
  return total;
}

std::uint64_t split_model_seed(std::uint64_t seed, std::size_t split_id) {
  return derive_seed(derive_seed(seed, "model"), static_cast<std::uint64_t>(split_id));
}

CrossValidation cross_validate(const PreparedDataset& data, const TrainConfig& cfg,
                               const ModelConfig& model_config) {
  cfg.validate();
  if (data.size() == 0) throw ConfigError("cross_validate needs a nonempty dataset");
  const auto splits =
      stratified_shuffle_split(data.kinds, cfg.n_splits, cfg.test_fraction,
                               derive_seed(cfg.seed, "split"));

  CrossValidation cv;
  cv.splits.resize(splits.size());
  auto run = [&](std::size_t s) {
    auto& out = cv.splits[s];
    out.split = splits[s];
    out.fit = fit(data, out.split.train, split_model_seed(cfg.seed, s), cfg, model_config, s);
    out.counts = evaluate(data, out.split.test, out.fit.model, cfg.threshold);
    out.scores = score(out.counts);
  };

  const std::size_t workers = std::min(cfg.workers, splits.size());
  if (workers <= 1) {
    for (std::size_t s = 0; s < splits.size(); ++s) run(s);
  } else {
    std::vector<std::exception_ptr> errors(splits.size());
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t s = next++; s < splits.size(); s = next++) {
          try {
            run(s);
          } catch (...) {
            errors[s] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  std::vector<ClassScores> per_split;
  for (const auto& s : cv.splits) per_split.push_back(s.scores);
  // The worker count does not change results, so it stays out of the report.
  auto config = cfg.to_key_values();
  std::erase_if(config, [](const auto& kv) { return kv.first == "workers"; });
  config.emplace_back("model_layers", std::to_string(model_config.layers.size()));
  cv.report = aggregate(per_split, count_parameters(cv.splits.front().fit.model),
                        std::move(config));
  return cv;
}

void write_loss_curves(std::ostream& out, std::span<const SplitResult> splits) {
  out << "split,epoch,loss\n";
  for (std::size_t s = 0; s < splits.size(); ++s) {
    const auto& losses = splits[s].fit.epoch_losses;
    for (std::size_t e = 0; e < losses.size(); ++e) {
      out << s << ',' << (e + 1) << ',' << format_double(losses[e]) << '\n';
    }
  }
}

}  // namespace mtfgat
