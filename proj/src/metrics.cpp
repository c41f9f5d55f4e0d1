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

#include "mtfgat/metrics.hpp"

#include <cstdio>
#include <ostream>

#include <json.hpp>

#include "mtfgat/error.hpp"
#include "mtfgat/text.hpp"

namespace mtfgat {

ClassConfusion confusion(std::span<const std::uint8_t> predicted,
                         std::span<const std::uint8_t> truth) {
  if (predicted.size() != truth.size()) {
    throw ShapeError("confusion: " + std::to_string(predicted.size()) + " predictions vs " +
                     std::to_string(truth.size()) + " labels");
  }
  ClassConfusion c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] != 0;
    const bool t = truth[i] != 0;
    if (p && t) ++c.anomalous.tp;
    else if (p && !t) ++c.anomalous.fp;
    else if (!p && t) ++c.anomalous.fn;
    else ++c.anomalous.tn;
  }
  c.normal = {c.anomalous.tn, c.anomalous.fn, c.anomalous.fp, c.anomalous.tp};
  return c;
}

Scores f1_from(double precision, double recall) {
  Scores s{precision, recall, 0.0, false};
  if (precision + recall > 0.0) {
    s.f1 = 2.0 * precision * recall / (precision + recall);
  } else {
    s.degenerate = true;
  }
  return s;
}

Scores precision_recall_f1(const ConfusionCounts& counts) {
  bool degenerate = false;
  auto ratio = [&degenerate](std::uint64_t num, std::uint64_t den) {
    if (den == 0) {
      degenerate = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  const double precision = ratio(counts.tp, counts.tp + counts.fp);
  const double recall = ratio(counts.tp, counts.tp + counts.fn);
  Scores s = f1_from(precision, recall);
  s.degenerate = s.degenerate || degenerate;
  return s;
}

ClassScores score(const ClassConfusion& counts) {
  return {precision_recall_f1(counts.anomalous), precision_recall_f1(counts.normal)};
}

EvalReport aggregate(std::span<const ClassScores> per_split, std::size_t parameter_count,
                     std::vector<std::pair<std::string, std::string>> config) {
  if (per_split.empty()) throw Error("aggregate needs at least one split");
  EvalReport report;
  report.per_split.assign(per_split.begin(), per_split.end());
  report.parameter_count = parameter_count;
  report.config = std::move(config);
  const double n = static_cast<double>(per_split.size());
  auto mean = [&](auto pick) {
    double total = 0.0;
    for (const auto& s : per_split) total += pick(s);
    return total / n;
  };
  auto& avg = report.average;
  avg.anomalous.precision = mean([](const ClassScores& s) { return s.anomalous.precision; });
  avg.anomalous.recall = mean([](const ClassScores& s) { return s.anomalous.recall; });
  avg.anomalous.f1 = mean([](const ClassScores& s) { return s.anomalous.f1; });
  avg.normal.precision = mean([](const ClassScores& s) { return s.normal.precision; });
  avg.normal.recall = mean([](const ClassScores& s) { return s.normal.recall; });
  avg.normal.f1 = mean([](const ClassScores& s) { return s.normal.f1; });
  for (const auto& s : per_split) {
    avg.anomalous.degenerate = avg.anomalous.degenerate || s.anomalous.degenerate;
    avg.normal.degenerate = avg.normal.degenerate || s.normal.degenerate;
  }
  return report;
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

void row(std::ostream& out, const std::string& split, const char* cls, const Scores& s) {
  out << split << ',' << cls << ',' << fixed(s.precision) << ',' << fixed(s.recall) << ','
      << fixed(s.f1) << '\n';
}

nlohmann::ordered_json to_json(const Scores& s) {
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
          {"degenerate", s.degenerate}};
}

Scores scores_from(const nlohmann::json& j) {
  return {j.at("precision").get<double>(), j.at("recall").get<double>(),
          j.at("f1").get<double>(), j.at("degenerate").get<bool>()};
}

}  // namespace

void write_report_text(std::ostream& out, const EvalReport& report) {
  out << "parameters: " << report.parameter_count << '\n';
  for (const auto& [key, value] : report.config) out << "config " << key << " = " << value << '\n';
  out << "split    class          precision  recall     f1\n";
  auto line = [&out](const std::string& split, const char* cls, const Scores& s) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-8s %-14s %-10s %-10s %s%s\n", split.c_str(), cls,
                  fixed(s.precision).c_str(), fixed(s.recall).c_str(), fixed(s.f1).c_str(),
                  s.degenerate ? "  (degenerate)" : "");
    out << buf;
  };
  for (std::size_t k = 0; k < report.per_split.size(); ++k) {
    line(std::to_string(k), "anomalous", report.per_split[k].anomalous);
    line(std::to_string(k), "non-anomalous", report.per_split[k].normal);
  }
  line("average", "anomalous", report.average.anomalous);
  line("average", "non-anomalous", report.average.normal);
}

void write_report_csv(std::ostream& out, const EvalReport& report) {
  out << "split,class,precision,recall,f1\n";
  for (std::size_t k = 0; k < report.per_split.size(); ++k) {
    row(out, std::to_string(k), "anomalous", report.per_split[k].anomalous);
    row(out, std::to_string(k), "non-anomalous", report.per_split[k].normal);
  }
  row(out, "average", "anomalous", report.average.anomalous);
  row(out, "average", "non-anomalous", report.average.normal);
}

std::string report_to_json(const EvalReport& report) {
  nlohmann::ordered_json j;
  j["parameter_count"] = report.parameter_count;
  auto& cfg = j["config"] = nlohmann::ordered_json::array();
  for (const auto& [key, value] : report.config) cfg.push_back({key, value});
  auto& splits = j["per_split"] = nlohmann::ordered_json::array();
  for (const auto& s : report.per_split) {
    splits.push_back({{"anomalous", to_json(s.anomalous)}, {"normal", to_json(s.normal)}});
  }
  j["average"] = {{"anomalous", to_json(report.average.anomalous)},
                  {"normal", to_json(report.average.normal)}};
  return j.dump(2) + "\n";
}

namespace {

EvalReport report_from(const nlohmann::json& j) {
  EvalReport report;
  report.parameter_count = j.at("parameter_count").get<std::size_t>();
  for (const auto& kv : j.at("config")) {
    report.config.emplace_back(kv.at(0).get<std::string>(), kv.at(1).get<std::string>());
  }
  for (const auto& s : j.at("per_split")) {
    report.per_split.push_back({scores_from(s.at("anomalous")), scores_from(s.at("normal"))});
  }
  report.average = {scores_from(j.at("average").at("anomalous")),
                    scores_from(j.at("average").at("normal"))};
  return report;
}

}  // namespace

EvalReport report_from_json(const std::string& text) {
  try {
    return report_from(nlohmann::json::parse(text));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(1, std::string("bad report: ") + e.what());
  }
}

}  // namespace mtfgat
