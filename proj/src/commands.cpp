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
#include "mtfgat/commands.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "mtfgat/error.hpp"
#include "mtfgat/gat_model.hpp"
#include "mtfgat/inject.hpp"
#include "mtfgat/metrics.hpp"
#include "mtfgat/mtf_graph.hpp"
#include "mtfgat/random.hpp"
#include "mtfgat/text.hpp"
#include "mtfgat/trace.hpp"
#include "mtfgat/train.hpp"

#ifndef MTFGAT_VERSION
#define MTFGAT_VERSION "0.0.0"
#endif

namespace mtfgat {
namespace {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using KeyValues = std::vector<std::pair<std::string, std::string>>;

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open input '" + path + "'");
  return in;
}

void write_file(const std::string& path, const std::string& content) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open output '" + path + "'");
  out << content;
  out.flush();
  if (!out) throw Error("failed writing '" + path + "'");
}

template <typename Writer>
void write_with(const std::string& path, Writer&& writer) {
  std::ostringstream buffer;
  writer(buffer);
  write_file(path, buffer.str());
}

bool ends_with(std::string_view text, std::string_view suffix) {
  return text.size() >= suffix.size() && text.substr(text.size() - suffix.size()) == suffix;
}

/// Everything needed to rerun a command and check its outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  KeyValues config;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;

  void write(const std::string& path) const {
    Json j;
    j["command"] = command;
    j["argv"] = argv;
    Json cfg = Json::object();
    for (const auto& [k, v] : config) cfg[k] = v;
    j["config"] = cfg;
    j["seed"] = seed;
    j["version"] = tool_version();
    auto files = [](const std::vector<std::string>& paths) {
      Json list = Json::array();
      for (const auto& p : paths) list.push_back({{"path", p}, {"digest", file_digest(p)}});
      return list;
    };
    j["inputs"] = files(inputs);
    j["outputs"] = files(outputs);
    write_file(path, j.dump(2) + "\n");
  }
};

/// Effective value of every option of a subcommand, defaults included.
KeyValues option_snapshot(const CLI::App& sub) {
  KeyValues kv;
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help") continue;
    std::string value;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      for (std::size_t i = 0; i < results.size(); ++i) {
        value += (i ? " " : "") + results[i];
      }
      if (opt->get_expected_max() == 0) value = "true";
    } else {
      value = opt->get_default_str();
    }
    kv.emplace_back(name, value);
  }
  return kv;
}

std::vector<RssiTrace> load_traces(const std::string& path) {
  auto in = open_input(path);
  if (ends_with(path, ".jsonl")) {
    std::vector<RssiTrace> traces;
    for (auto& item : read_dataset(in)) traces.push_back(std::move(item.trace));
    return traces;
  }
  return read_traces_csv(in);
}

std::vector<LabeledTrace> load_dataset(const std::string& path) {
  auto in = open_input(path);
  return read_dataset(in);
}

std::vector<TsGraph> load_graphs(const std::string& path) {
  auto in = open_input(path);
  return read_graphs(in);
}

TraceSchema schema_for_length(std::size_t length) {
  TraceSchema schema;
  schema.expected_length = length;
  schema.validate();
  return schema;
}

std::size_t common_length(std::span<const RssiTrace> traces) {
  if (traces.empty()) throw ShapeError("input holds no traces");
  const std::size_t length = traces.front().length();
  for (const auto& t : traces) {
    if (t.length() != length) {
      throw ShapeError("trace '" + t.link_id + "' has " + std::to_string(t.length()) +
                       " samples, expected " + std::to_string(length));
    }
  }
  return length;
}

/// Runs body(i) for i in [0, n) on `workers` threads; rethrows the first
/// failure in index order.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& body) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::vector<TsGraph> transform_all(std::span<const RssiTrace> traces,
                                   std::optional<std::size_t> bins, std::size_t workers) {
  std::vector<TsGraph> graphs(traces.size());
  parallel_for(traces.size(), workers, [&](std::size_t i) {
    graphs[i] = transform(traces[i], schema_for_length(traces[i].length()), bins);
  });
  return graphs;
}

std::string join_indices(std::span<const std::size_t> indices) {
  std::string s;
  for (std::size_t i = 0; i < indices.size(); ++i) {
    s += (i ? " " : "") + std::to_string(indices[i]);
  }
  return s;
}

std::vector<std::size_t> parse_indices(const std::string& text) {
  std::vector<std::size_t> out;
  for (auto field : split(text, ' ')) {
    std::uint64_t v = 0;
    if (!parse_uint(field, v)) throw Error("bad index list in checkpoint metadata");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

void put_scores(CheckpointMeta& meta, const ClassScores& s) {
  auto put = [&meta](const std::string& prefix, const Scores& x) {
    meta[prefix + "precision"] = format_double(x.precision);
    meta[prefix + "recall"] = format_double(x.recall);
    meta[prefix + "f1"] = format_double(x.f1);
  };
  put("metric.anomalous.", s.anomalous);
  put("metric.normal.", s.normal);
}

TrainConfig load_train_config(const std::string& path) {
  if (path.empty()) return {};
  auto in = open_input(path);
  return parse_train_config(in);
}

const std::string& meta_at(const CheckpointMeta& meta, const std::string& key) {
  auto it = meta.find(key);
  if (it == meta.end()) throw Error("checkpoint metadata lacks '" + key + "'");
  return it->second;
}

void print_scores(std::ostream& out, const ClassScores& s) {
  out << "anomalous F1 " << format_double(s.anomalous.f1, 4) << ", non-anomalous F1 "
      << format_double(s.normal.f1, 4) << "\n";
}

const CLI::Validator kAtLeastOne(
    [](std::string& value) -> std::string {
      std::uint64_t v = 0;
      if (!parse_uint(value, v) || v < 1) return "must be an integer >= 1, got '" + value + "'";
      return {};
    },
    "INT>=1");

struct Cli {
  CLI::App app{"Per-point RSSI link anomaly detection with MTF graphs and graph attention",
               "mtfgat"};
  std::vector<std::string> argv;
  std::ostream& out;

  Cli(std::vector<std::string> args, std::ostream& o) : argv(std::move(args)), out(o) {
    app.require_subcommand(1);
    app.option_defaults()->always_capture_default();
    app.set_version_flag("--version", std::string(tool_version()));
    add_synth();
    add_ingest();
    add_inject();
    add_transform();
    add_train();
    add_eval();
    add_predict();
    add_report();
    add_replay();
  }

  RunManifest manifest(const CLI::App& sub) const {
    RunManifest m;
    m.command = sub.get_name();
    m.argv = argv;
    m.config = option_snapshot(sub);
    return m;
  }

  // synth ---------------------------------------------------------------
  struct {
    std::size_t count = 0;
    std::size_t length = 300;
    std::uint64_t seed = 1;
    double baseline_min = SynthesisProfile{}.baseline_min;
    double baseline_max = SynthesisProfile{}.baseline_max;
    int jitter = 1;
    std::string out;
  } synth;

  void add_synth() {
    auto* sub = app.add_subcommand("synth", "Synthesize clean RSSI traces (CSV)");
    sub->add_option("--count", synth.count, "Number of traces")->required()->check(kAtLeastOne);
    sub->add_option("--length", synth.length, "Samples per trace")->check(CLI::Range(2, 1 << 20));
    sub->add_option("--seed", synth.seed, "Master seed");
    sub->add_option("--baseline-min", synth.baseline_min, "Lowest per-link baseline");
    sub->add_option("--baseline-max", synth.baseline_max, "Highest per-link baseline");
    sub->add_option("--jitter", synth.jitter, "Per-sample integer jitter bound")->check(CLI::NonNegativeNumber);
    sub->add_option("-o,--out", synth.out, "Output trace CSV")->required();
    sub->callback([this, sub] {
      const auto schema = schema_for_length(synth.length);
      SynthesisProfile profile{synth.baseline_min, synth.baseline_max, synth.jitter};
      Rng rng(derive_seed(synth.seed, "synth"));
      const auto traces = synthesize_clean(synth.count, schema, rng, profile);
      write_with(synth.out, [&](std::ostream& os) { write_traces_csv(os, traces); });
      auto m = manifest(*sub);
      m.seed = synth.seed;
      m.outputs = {synth.out};
      m.write(synth.out + ".manifest.json");
      out << "wrote " << traces.size() << " traces to " << synth.out << "\n";
    });
  }

  // ingest --------------------------------------------------------------
  struct {
    std::string input;
    std::size_t length = 300;
    std::string out;
  } ingest;

  void add_ingest() {
    auto* sub = app.add_subcommand("ingest", "Parse a raw link log and keep complete links");
    sub->add_option("-i,--input", ingest.input, "Raw log file")->required();
    sub->add_option("--length", ingest.length, "Required records per link")->check(CLI::Range(2, 1 << 20));
    sub->add_option("-o,--out", ingest.out, "Output trace CSV")->required();
    sub->callback([this, sub] {
      const auto schema = schema_for_length(ingest.length);
      auto in = open_input(ingest.input);
      const auto logs = ingest_raw_log(in, schema);
      const auto traces = filter_complete(logs, schema);
      write_with(ingest.out, [&](std::ostream& os) { write_traces_csv(os, traces); });
      auto m = manifest(*sub);
      m.inputs = {ingest.input};
      m.outputs = {ingest.out};
      m.write(ingest.out + ".manifest.json");
      out << "kept " << traces.size() << " of " << logs.size() << " links\n";
    });
  }

  // inject --------------------------------------------------------------
  struct {
    std::string input;
    std::string out;
    std::uint64_t seed = 1;
    std::size_t suddend = 0, suddenr = 0, instad = 0, slowd = 0, clean = 0;
    std::size_t each = 0;
    bool full_scale = false;
  } inj;

  void add_inject() {
    auto* sub = app.add_subcommand("inject", "Build a labeled dataset by injecting anomalies");
    sub->add_option("-i,--input", inj.input, "Clean trace CSV")->required();
    sub->add_option("-o,--out", inj.out, "Output dataset (JSONL)")->required();
    sub->add_option("--seed", inj.seed, "Master seed");
    auto* suddend = sub->add_option("--suddend", inj.suddend, "SuddenD traces");
    auto* suddenr = sub->add_option("--suddenr", inj.suddenr, "SuddenR traces");
    auto* instad = sub->add_option("--instad", inj.instad, "InstaD traces");
    auto* slowd = sub->add_option("--slowd", inj.slowd, "SlowD traces");
    auto* clean = sub->add_option("--clean", inj.clean, "Clean traces");
    auto* each = sub->add_option("--each", inj.each, "Traces of every anomaly kind");
    auto* full = sub->add_flag("--full-scale", inj.full_scale,
                               "700 per anomaly kind and 5692 clean");
    for (auto* o : {suddend, suddenr, instad, slowd}) o->excludes(each);
    for (auto* o : {suddend, suddenr, instad, slowd, clean, each}) o->excludes(full);
    sub->callback([this, sub] {
      Composition comp;
      if (inj.full_scale) {
        comp = Composition::full_scale();
      } else {
        comp = {inj.suddend, inj.suddenr, inj.instad, inj.slowd, inj.clean};
        if (inj.each > 0) comp.suddend = comp.suddenr = comp.instad = comp.slowd = inj.each;
      }
      if (comp.total() == 0) throw ConfigError("composition is empty");
      auto in = open_input(inj.input);
      const auto clean_traces = read_traces_csv(in);
      const std::size_t length = common_length(clean_traces);
      const auto schema = schema_for_length(length);
      const auto params = InjectionParams::for_length(length);
      const auto dataset =
          build_dataset(clean_traces, comp, params, schema, derive_seed(inj.seed, "inject"));
      write_with(inj.out, [&](std::ostream& os) { write_dataset(os, dataset); });
      auto m = manifest(*sub);
      m.seed = inj.seed;
      m.inputs = {inj.input};
      m.outputs = {inj.out};
      m.write(inj.out + ".manifest.json");
      out << dataset.size() << " total, " << comp.anomalous() << " anomalous traces (suddend "
          << comp.suddend << ", suddenr " << comp.suddenr << ", instad " << comp.instad
          << ", slowd " << comp.slowd << ", clean " << comp.clean << ")\n";
    });
  }

  // transform -----------------------------------------------------------
  struct {
    std::string input;
    std::string out;
    std::size_t bins = 0;
    std::size_t workers = 1;
  } tf;

  void add_transform() {
    auto* sub = app.add_subcommand("transform", "Turn every trace of a dataset into an MTF graph");
    sub->add_option("-i,--input", tf.input, "Dataset (JSONL) or trace CSV")->required();
    sub->add_option("-o,--out", tf.out, "Output graph file")->required();
    sub->add_option("--bins", tf.bins, "Quantile bins (0: trace length)");
    sub->add_option("--workers", tf.workers, "Worker threads")->check(kAtLeastOne);
    sub->callback([this, sub] {
      const auto traces = load_traces(tf.input);
      std::optional<std::size_t> bins;
      if (tf.bins > 0) bins = tf.bins;
      const auto graphs = transform_all(traces, bins, tf.workers);
      write_with(tf.out, [&](std::ostream& os) { write_graphs(os, graphs); });
      auto m = manifest(*sub);
      m.inputs = {tf.input};
      m.outputs = {tf.out};
      m.write(tf.out + ".manifest.json");
      out << "wrote " << graphs.size() << " graphs to " << tf.out << "\n";
    });
  }

  // train ---------------------------------------------------------------
  struct {
    std::string dataset;
    std::string graphs;
    std::string config;
    std::string out;
    // Shown as defaults in --help; applied only when given, over --config.
    std::size_t splits = TrainConfig{}.n_splits, epochs = TrainConfig{}.epochs,
                workers = TrainConfig{}.workers;
    double test_fraction = TrainConfig{}.test_fraction, lr = TrainConfig{}.learning_rate,
           threshold = TrainConfig{}.threshold;
    std::uint64_t seed = TrainConfig{}.seed;
  } tr;

  void add_train() {
    auto* sub = app.add_subcommand("train", "Cross-validate the model and save one checkpoint per split");
    sub->add_option("--dataset", tr.dataset, "Labeled dataset (JSONL)")->required();
    sub->add_option("--graphs", tr.graphs, "Graph file from transform")->required();
    sub->add_option("-o,--out", tr.out, "Output directory")->required();
    sub->add_option("--config", tr.config, "Training config (key=value lines)");
    auto* splits = sub->add_option("--splits", tr.splits, "Shuffle splits")->check(kAtLeastOne);
    auto* epochs = sub->add_option("--epochs", tr.epochs, "Epochs per split")->check(kAtLeastOne);
    auto* frac = sub->add_option("--test-fraction", tr.test_fraction, "Held-out share per stratum");
    auto* lr = sub->add_option("--lr", tr.lr, "Learning rate");
    auto* thr = sub->add_option("--threshold", tr.threshold, "Decision threshold");
    auto* seed = sub->add_option("--seed", tr.seed, "Master seed");
    auto* workers = sub->add_option("--workers", tr.workers, "Splits trained in parallel")->check(kAtLeastOne);
    sub->callback([=, this] {
      TrainConfig cfg = load_train_config(tr.config);
      if (splits->count()) cfg.n_splits = tr.splits;
      if (epochs->count()) cfg.epochs = tr.epochs;
      if (frac->count()) cfg.test_fraction = tr.test_fraction;
      if (lr->count()) cfg.learning_rate = tr.lr;
      if (thr->count()) cfg.threshold = tr.threshold;
      if (seed->count()) cfg.seed = tr.seed;
      if (workers->count()) cfg.workers = tr.workers;
      cfg.validate();

      const auto dataset = load_dataset(tr.dataset);
      const auto graphs = load_graphs(tr.graphs);
      const auto data = PreparedDataset::from(dataset, graphs);
      const auto cv = cross_validate(data, cfg);

      const fs::path dir(tr.out);
      fs::create_directories(dir);
      const std::string dataset_digest = file_digest(tr.dataset);
      const std::string graphs_digest = file_digest(tr.graphs);
      auto m = manifest(*sub);
      m.config = {{"dataset", tr.dataset}, {"graphs", tr.graphs}, {"out", tr.out},
                  {"config", tr.config}};
      for (const auto& kv : cfg.to_key_values()) m.config.push_back(kv);
      m.config.emplace_back("workers", std::to_string(cfg.workers));
      m.seed = cfg.seed;
      m.inputs = {tr.dataset, tr.graphs};
      if (!tr.config.empty()) m.inputs.push_back(tr.config);
      for (std::size_t s = 0; s < cv.splits.size(); ++s) {
        const auto& split = cv.splits[s];
        CheckpointMeta meta;
        meta["split"] = std::to_string(s);
        meta["test_indices"] = join_indices(split.split.test);
        meta["dataset_digest"] = dataset_digest;
        meta["graphs_digest"] = graphs_digest;
        for (const auto& [k, v] : cv.report.config) meta["train." + k] = v;
        put_scores(meta, split.scores);
        const std::string stem = (dir / ("split-" + std::to_string(s))).string();
        save_checkpoint(stem, split.fit.model, meta);
        m.outputs.push_back(stem + ".ckpt");
        m.outputs.push_back(stem + ".bin");
      }
      const std::string base = dir.string() + "/";
      write_with(base + "loss_curves.csv",
                 [&](std::ostream& os) { write_loss_curves(os, cv.splits); });
      write_with(base + "report.txt", [&](std::ostream& os) { write_report_text(os, cv.report); });
      write_with(base + "report.csv", [&](std::ostream& os) { write_report_csv(os, cv.report); });
      write_file(base + "report.json", report_to_json(cv.report));
      for (const char* name : {"loss_curves.csv", "report.txt", "report.csv", "report.json"}) {
        m.outputs.push_back(base + name);
      }
      m.write(base + "manifest.json");

      out << "parameters " << cv.report.parameter_count << "\n";
      for (std::size_t s = 0; s < cv.splits.size(); ++s) {
        out << "split " << s << ": ";
        print_scores(out, cv.splits[s].scores);
      }
      out << "average: ";
      print_scores(out, cv.report.average);
    });
  }

  // eval ----------------------------------------------------------------
  struct {
    std::string checkpoint;
    std::string dataset;
    std::string graphs;
    std::string config;
    std::string out;
    double threshold = 0.5;
  } ev;

  void add_eval() {
    auto* sub = app.add_subcommand("eval", "Score a saved checkpoint on its split's test traces");
    sub->add_option("--checkpoint", ev.checkpoint, "Checkpoint stem (without .ckpt)")->required();
    sub->add_option("--dataset", ev.dataset, "Labeled dataset (JSONL)")->required();
    sub->add_option("--graphs", ev.graphs, "Graph file from transform")->required();
    sub->add_option("-o,--out", ev.out, "Output directory")->required();
    sub->add_option("--config", ev.config, "Training config; only the threshold is used");
    auto* thr = sub->add_option("--threshold", ev.threshold, "Decision threshold (default: the checkpoint's)")
                         ->default_str("");
    sub->callback([=, this] {
      auto ckpt = load_checkpoint(ev.checkpoint);
      const auto& meta = ckpt.meta;
      if (meta_at(meta, "dataset_digest") != file_digest(ev.dataset)) {
        throw ConfigError("dataset differs from the one the checkpoint was trained on");
      }
      double threshold = 0.5;
      if (auto it = meta.find("train.threshold"); it != meta.end()) {
        if (!parse_double(it->second, threshold)) throw Error("bad threshold in checkpoint");
      }
      if (!ev.config.empty()) threshold = load_train_config(ev.config).threshold;
      if (thr->count()) threshold = ev.threshold;

      const auto dataset = load_dataset(ev.dataset);
      const auto graphs = load_graphs(ev.graphs);
      const auto data = PreparedDataset::from(dataset, graphs);
      const auto test = parse_indices(meta_at(meta, "test_indices"));
      for (auto i : test) {
        if (i >= data.size()) throw ShapeError("checkpoint test index out of range");
      }
      const auto scores = score(evaluate(data, test, ckpt.model, threshold));
      KeyValues config;
      for (const auto& [k, v] : meta) {
        if (k.rfind("train.", 0) == 0) config.emplace_back(k.substr(6), v);
      }
      const std::vector<ClassScores> per_split{scores};
      const auto report = aggregate(per_split, count_parameters(ckpt.model), config);

      const std::string base = ev.out + "/";
      fs::create_directories(ev.out);
      write_with(base + "report.txt", [&](std::ostream& os) { write_report_text(os, report); });
      write_with(base + "report.csv", [&](std::ostream& os) { write_report_csv(os, report); });
      write_file(base + "report.json", report_to_json(report));
      auto m = manifest(*sub);
      m.seed = ckpt.model.seed;
      m.inputs = {ev.checkpoint + ".ckpt", ev.checkpoint + ".bin", ev.dataset, ev.graphs};
      m.outputs = {base + "report.txt", base + "report.csv", base + "report.json"};
      m.write(base + "manifest.json");

      CheckpointMeta stored;
      put_scores(stored, scores);
      bool matches = true;
      for (const auto& [k, v] : stored) {
        auto it = meta.find(k);
        matches = matches && it != meta.end() && it->second == v;
      }
      out << "parameters " << report.parameter_count << "\n";
      out << "split " << meta_at(meta, "split") << ": ";
      print_scores(out, scores);
      out << "matches stored metrics: " << (matches ? "yes" : "no") << "\n";
    });
  }

  // predict -------------------------------------------------------------
  struct {
    std::string checkpoint;
    std::string input;
    std::string config;
    std::string out;
    std::size_t bins = 0;
    std::size_t workers = 1;
    double threshold = 0.5;
  } pr;

  void add_predict() {
    auto* sub = app.add_subcommand("predict", "Label every sample of every trace and list anomalous runs");
    sub->add_option("--checkpoint", pr.checkpoint, "Checkpoint stem (without .ckpt)")->required();
    sub->add_option("-i,--input", pr.input, "Trace CSV or dataset (JSONL)")->required();
    sub->add_option("-o,--out", pr.out, "Output predictions (JSONL)")->required();
    sub->add_option("--config", pr.config, "Training config; only the threshold is used");
    sub->add_option("--bins", pr.bins, "Quantile bins (0: trace length)");
    sub->add_option("--workers", pr.workers, "Worker threads")->check(kAtLeastOne);
    auto* thr = sub->add_option("--threshold", pr.threshold, "Decision threshold (default: the checkpoint's)")
                         ->default_str("");
    sub->callback([=, this] {
      const auto ckpt = load_checkpoint(pr.checkpoint);
      double threshold = 0.5;
      if (auto it = ckpt.meta.find("train.threshold"); it != ckpt.meta.end()) {
        if (!parse_double(it->second, threshold)) throw Error("bad threshold in checkpoint");
      }
      if (!pr.config.empty()) threshold = load_train_config(pr.config).threshold;
      if (thr->count()) threshold = pr.threshold;

      const auto traces = load_traces(pr.input);
      std::optional<std::size_t> bins;
      if (pr.bins > 0) bins = pr.bins;
      std::vector<std::vector<std::uint8_t>> labels(traces.size());
      parallel_for(traces.size(), pr.workers, [&](std::size_t i) {
        const auto graph = transform(traces[i], schema_for_length(traces[i].length()), bins);
        labels[i] = predict(AttentionGraph::from(graph), ckpt.model, threshold);
      });

      std::size_t flagged = 0;
      write_with(pr.out, [&](std::ostream& os) {
        for (std::size_t i = 0; i < traces.size(); ++i) {
          Json j;
          j["link_id"] = traces[i].link_id;
          j["labels"] = labels[i];
          Json runs = Json::array();
          for (const auto& [start, length] : anomalous_intervals(labels[i])) {
            runs.push_back({start, length});
          }
          if (!runs.empty()) ++flagged;
          j["intervals"] = runs;
          os << j.dump() << "\n";
        }
      });
      auto m = manifest(*sub);
      m.seed = ckpt.model.seed;
      m.inputs = {pr.checkpoint + ".ckpt", pr.checkpoint + ".bin", pr.input};
      m.outputs = {pr.out};
      m.write(pr.out + ".manifest.json");
      out << "wrote " << traces.size() << " predictions, " << flagged
          << " with anomalous intervals\n";
    });
  }

  // report --------------------------------------------------------------
  struct {
    std::string input;
    std::string format = "text";
    std::string out;
  } rp;

  void add_report() {
    auto* sub = app.add_subcommand("report", "Render a saved report as text or CSV");
    sub->add_option("-i,--input", rp.input, "report.json from train or eval")->required();
    sub->add_option("--format", rp.format, "text or csv")->check(CLI::IsMember({"text", "csv"}));
    sub->add_option("-o,--out", rp.out, "Output file (default: standard output)");
    sub->callback([this, sub] {
      auto in = open_input(rp.input);
      std::stringstream text;
      text << in.rdbuf();
      const auto report = report_from_json(text.str());
      std::ostringstream rendered;
      if (rp.format == "csv") {
        write_report_csv(rendered, report);
      } else {
        write_report_text(rendered, report);
      }
      if (rp.out.empty()) {
        out << rendered.str();
        return;
      }
      write_file(rp.out, rendered.str());
      auto m = manifest(*sub);
      m.inputs = {rp.input};
      m.outputs = {rp.out};
      m.write(rp.out + ".manifest.json");
    });
  }

  // replay --------------------------------------------------------------
  struct {
    std::string manifest;
  } rl;

  void add_replay() {
    auto* sub = app.add_subcommand("replay", "Rerun a manifest and verify its output digests");
    sub->add_option("manifest", rl.manifest, "Manifest written by an earlier run")->required();
    sub->callback([this] {
      auto in = open_input(rl.manifest);
      Json j;
      try {
        j = Json::parse(in);
      } catch (const Json::exception& e) {
        throw Error("bad manifest '" + rl.manifest + "': " + e.what());
      }
      const auto args = j.at("argv").get<std::vector<std::string>>();
      if (!args.empty() && args.front() == "replay") throw ConfigError("manifest replays itself");
      std::ostringstream sink;
      std::ostringstream errors;
      if (run_cli(args, sink, errors) != 0) throw Error("replayed command failed: " + errors.str());
      std::size_t mismatches = 0;
      for (const auto& f : j.at("outputs")) {
        const auto path = f.at("path").get<std::string>();
        if (file_digest(path) != f.at("digest").get<std::string>()) {
          out << "digest mismatch: " << path << "\n";
          ++mismatches;
        }
      }
      if (mismatches > 0) throw Error(std::to_string(mismatches) + " output(s) differ");
      out << "replayed " << j.at("command").get<std::string>() << ": "
          << j.at("outputs").size() << " outputs identical\n";
    });
  }
};

}  // namespace

std::string tool_version() { return MTFGAT_VERSION; }

std::vector<std::pair<std::size_t, std::size_t>> anomalous_intervals(
    const std::vector<std::uint8_t>& labels) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t i = 0; i < labels.size();) {
    if (labels[i] == 0) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < labels.size() && labels[j] != 0) ++j;
    runs.emplace_back(i, j - i);
    i = j;
  }
  return runs;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Cli cli(args, out);
  std::vector<const char*> argv{"mtfgat"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    cli.app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << cli.app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << cli.app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << tool_version() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "mtfgat: error: " << e.what() << "\n"
        << "run 'mtfgat --help' for usage\n";
    return 2;
  } catch (const Error& e) {
    err << "mtfgat: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "mtfgat: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace mtfgat
