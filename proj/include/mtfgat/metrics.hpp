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
#include <utility>
#include <vector>

namespace mtfgat {

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

/// One-vs-rest tables: anomalous (label 1) as positive, and non-anomalous
/// (label 0) as positive.
struct ClassConfusion {
  ConfusionCounts anomalous;
  ConfusionCounts normal;

  ClassConfusion& operator+=(const ClassConfusion& o) {
    anomalous += o.anomalous;
    normal += o.normal;
    return *this;
  }
  friend bool operator==(const ClassConfusion&, const ClassConfusion&) = default;
};

/// Throws ShapeError on length mismatch.
ClassConfusion confusion(std::span<const std::uint8_t> predicted,
                         std::span<const std::uint8_t> truth);

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  /// Set when a zero denominator forced a 0.
  bool degenerate = false;
  friend bool operator==(const Scores&, const Scores&) = default;
};

/// precision = tp/(tp+fp), recall = tp/(tp+fn), f1 = harmonic mean.
/// Zero denominators give 0 and mark the result degenerate.
Scores precision_recall_f1(const ConfusionCounts& counts);
Scores f1_from(double precision, double recall);

struct ClassScores {
  Scores anomalous;
  Scores normal;
  bool degenerate() const { return anomalous.degenerate || normal.degenerate; }
  friend bool operator==(const ClassScores&, const ClassScores&) = default;
};

ClassScores score(const ClassConfusion& counts);

struct EvalReport {
  std::vector<ClassScores> per_split;
  ClassScores average;
  std::size_t parameter_count = 0;
  std::vector<std::pair<std::string, std::string>> config;
};

/// Arithmetic mean of every metric across splits. Throws Error if empty.
EvalReport aggregate(std::span<const ClassScores> per_split, std::size_t parameter_count,
                     std::vector<std::pair<std::string, std::string>> config = {});

/// Human-readable report.
void write_report_text(std::ostream& out, const EvalReport& report);
/// CSV `split,class,precision,recall,f1`, one row per split and class plus
/// the `average` rows.
void write_report_csv(std::ostream& out, const EvalReport& report);
/// Round-trippable JSON form used by the `report` command.
std::string report_to_json(const EvalReport& report);
EvalReport report_from_json(const std::string& text);

}  // namespace mtfgat
