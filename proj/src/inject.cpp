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

#include "mtfgat/inject.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include <json.hpp>

#include "mtfgat/error.hpp"

namespace mtfgat {
namespace {

std::size_t instad_count(double fraction, std::size_t length) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(length)));
}

std::size_t draw(Rng& rng, IndexRange range) {
  return static_cast<std::size_t>(rng.uniform_int(range.lo, range.hi));
}

LabeledTrace start_from(const RssiTrace& trace, AnomalyKind kind) {
  LabeledTrace out;
  out.trace = trace;
  out.labels.assign(trace.length(), 0);
  out.kind = kind;
  return out;
}

void check_params(const RssiTrace& trace, const InjectionParams& params,
                  const TraceSchema& schema) {
  params.validate(trace.length(), schema);
}

}  // namespace

std::string_view to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::None: return "None";
    case AnomalyKind::SuddenD: return "SuddenD";
    case AnomalyKind::SuddenR: return "SuddenR";
    case AnomalyKind::InstaD: return "InstaD";
    case AnomalyKind::SlowD: return "SlowD";
  }
  return "None";
}

AnomalyKind parse_anomaly_kind(std::string_view name) {
  for (auto kind : kAllKinds) {
    if (to_string(kind) == name) return kind;
  }
  throw Error("unknown anomaly kind '" + std::string(name) + "'");
}

InjectionParams InjectionParams::for_length(std::size_t length) {
  InjectionParams p;
  if (length == 300) return p;
  const double scale = static_cast<double>(length) / 300.0;
  auto scaled = [scale](std::size_t v) {
    return static_cast<std::size_t>(std::llround(static_cast<double>(v) * scale));
  };
  p.suddend_onset = {scaled(p.suddend_onset.lo), scaled(p.suddend_onset.hi)};
  p.suddend_onset.hi = std::min(p.suddend_onset.hi, length - 1);
  p.suddenr_onset = {scaled(p.suddenr_onset.lo), scaled(p.suddenr_onset.hi)};
  if (length >= p.suddenr_duration.hi) {
    p.suddenr_onset.hi = std::min(p.suddenr_onset.hi, length - p.suddenr_duration.hi);
  }
  p.slowd_onset = {scaled(p.slowd_onset.lo), scaled(p.slowd_onset.hi)};
  p.slowd_duration = {scaled(p.slowd_duration.lo), scaled(p.slowd_duration.hi)};
  return p;
}

void InjectionParams::validate(std::size_t length, const TraceSchema& schema) const {
  auto nonempty = [](IndexRange r, const char* name) {
    if (r.lo > r.hi) throw ConfigError(std::string("empty range ") + name);
  };
  nonempty(suddend_onset, "suddend_onset");
  nonempty(suddenr_onset, "suddenr_onset");
  nonempty(suddenr_duration, "suddenr_duration");
  nonempty(slowd_onset, "slowd_onset");
  nonempty(slowd_duration, "slowd_duration");
  if (!(slowd_slope.lo <= slowd_slope.hi) || !(slowd_slope.lo >= 0.0)) {
    throw ConfigError("slowd_slope must be a nonempty non-negative range");
  }
  if (suddenr_duration.lo < 1 || slowd_duration.lo < 1) {
    throw ConfigError("durations must be at least 1 sample");
  }
  const auto len = std::to_string(length);
  if (suddend_onset.hi >= length) {
    throw ConfigError("suddend onset range exceeds trace length " + len);
  }
  if (suddenr_onset.hi + suddenr_duration.hi > length) {
    throw ConfigError("suddenr window exceeds trace length " + len);
  }
  if (slowd_onset.hi + slowd_duration.hi > length) {
    throw ConfigError("slowd window exceeds trace length " + len);
  }
  if (!(instad_fraction > 0.0)) throw ConfigError("instad_fraction must be positive");
  if (instad_count(instad_fraction, length) < 1 ||
      instad_count(instad_fraction, length) > length) {
    throw ConfigError("instad_fraction * length must round to [1, length]");
  }
  if (!schema.contains(drop_floor)) throw ConfigError("drop_floor outside schema bounds");
}

std::size_t LabeledTrace::anomalous_points() const {
  return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
}

LabeledTrace as_clean(const RssiTrace& trace) { return start_from(trace, AnomalyKind::None); }

LabeledTrace inject_suddend(const RssiTrace& trace, const InjectionParams& params,
                            const TraceSchema& schema, Rng& rng) {
  check_params(trace, params, schema);
  auto out = start_from(trace, AnomalyKind::SuddenD);
  const std::size_t onset = draw(rng, params.suddend_onset);
  out.descriptor.onset = onset;
  out.descriptor.duration = trace.length() - onset;
  for (std::size_t x = onset; x < trace.length(); ++x) {
    out.trace.samples[x] = params.drop_floor;
    out.labels[x] = 1;
  }
  return out;
}

LabeledTrace inject_suddenr(const RssiTrace& trace, const InjectionParams& params,
                            const TraceSchema& schema, Rng& rng) {
  check_params(trace, params, schema);
  auto out = start_from(trace, AnomalyKind::SuddenR);
  const std::size_t onset = draw(rng, params.suddenr_onset);
  const std::size_t duration = draw(rng, params.suddenr_duration);
  out.descriptor.onset = onset;
  out.descriptor.duration = duration;
  for (std::size_t x = onset; x < onset + duration; ++x) {
    out.trace.samples[x] = params.drop_floor;
    out.labels[x] = 1;
  }
  return out;
}

LabeledTrace inject_instad(const RssiTrace& trace, const InjectionParams& params,
                           const TraceSchema& schema, Rng& rng) {
  check_params(trace, params, schema);
  auto out = start_from(trace, AnomalyKind::InstaD);
  const std::size_t k = instad_count(params.instad_fraction, trace.length());
  std::vector<std::size_t> pool(trace.length());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  // Partial Fisher-Yates: the first k slots become a uniform draw without
  // replacement.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(i, pool.size() - 1));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  for (auto x : pool) {
    out.trace.samples[x] = params.drop_floor;
    out.labels[x] = 1;
  }
  out.descriptor.duration = 1;
  out.descriptor.indices = std::move(pool);
  return out;
}

LabeledTrace inject_slowd(const RssiTrace& trace, const InjectionParams& params,
                          const TraceSchema& schema, Rng& rng) {
  check_params(trace, params, schema);
  auto out = start_from(trace, AnomalyKind::SlowD);
  const std::size_t onset = draw(rng, params.slowd_onset);
  const std::size_t duration = draw(rng, params.slowd_duration);
  const double slope = rng.uniform_real(params.slowd_slope.lo, params.slowd_slope.hi);
  out.descriptor.onset = onset;
  out.descriptor.duration = duration;
  out.descriptor.slope = slope;
  for (std::size_t x = onset; x < onset + duration; ++x) {
    const double offset = std::min(0.0, -slope * static_cast<double>(x - onset));
    out.trace.samples[x] =
        std::clamp(trace.samples[x] + offset, schema.rssi_min, schema.rssi_max);
    out.labels[x] = 1;
  }
  return out;
}

LabeledTrace inject(AnomalyKind kind, const RssiTrace& trace, const InjectionParams& params,
                    const TraceSchema& schema, Rng& rng) {
  switch (kind) {
    case AnomalyKind::SuddenD: return inject_suddend(trace, params, schema, rng);
    case AnomalyKind::SuddenR: return inject_suddenr(trace, params, schema, rng);
    case AnomalyKind::InstaD: return inject_instad(trace, params, schema, rng);
    case AnomalyKind::SlowD: return inject_slowd(trace, params, schema, rng);
    case AnomalyKind::None: break;
  }
  return as_clean(trace);
}

std::size_t Composition::count(AnomalyKind kind) const {
  switch (kind) {
    case AnomalyKind::SuddenD: return suddend;
    case AnomalyKind::SuddenR: return suddenr;
    case AnomalyKind::InstaD: return instad;
    case AnomalyKind::SlowD: return slowd;
    case AnomalyKind::None: return clean;
  }
  return 0;
}

std::vector<LabeledTrace> build_dataset(std::span<const RssiTrace> clean,
                                        const Composition& composition,
                                        const InjectionParams& params, const TraceSchema& schema,
                                        std::uint64_t seed) {
  const std::size_t total = composition.total();
  if (total > clean.size()) {
    throw CapacityError("composition needs " + std::to_string(total) + " source traces but the pool has " +
                        std::to_string(clean.size()) + " (short by " +
                        std::to_string(total - clean.size()) + ")");
  }

  std::vector<std::size_t> pool(clean.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  Rng pool_rng(derive_seed(seed, "pool"));
  pool_rng.shuffle(std::span(pool));

  std::vector<LabeledTrace> dataset;
  dataset.reserve(total);
  std::size_t slot = 0;
  constexpr AnomalyKind order[] = {AnomalyKind::SuddenD, AnomalyKind::SuddenR,
                                   AnomalyKind::InstaD, AnomalyKind::SlowD, AnomalyKind::None};
  for (auto kind : order) {
    for (std::size_t n = 0; n < composition.count(kind); ++n, ++slot) {
      const auto& source = clean[pool[slot]];
      validate_trace(source, schema);
      Rng rng(derive_seed(seed, static_cast<std::uint64_t>(slot)));
      dataset.push_back(inject(kind, source, params, schema, rng));
    }
  }

  Rng order_rng(derive_seed(seed, "order"));
  order_rng.shuffle(std::span(dataset));
  return dataset;
}

void write_dataset(std::ostream& out, std::span<const LabeledTrace> dataset) {
  for (const auto& item : dataset) {
    nlohmann::ordered_json j;
    j["link_id"] = item.trace.link_id;
    j["kind"] = std::string(to_string(item.kind));
    j["onset"] = item.descriptor.onset;
    j["duration"] = item.descriptor.duration;
    j["slope"] = item.descriptor.slope;
    j["indices"] = item.descriptor.indices;
    j["samples"] = item.trace.samples;
    j["labels"] = item.labels;
    out << j.dump() << '\n';
  }
}

std::vector<LabeledTrace> read_dataset(std::istream& in) {
  std::vector<LabeledTrace> dataset;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      LabeledTrace item;
      item.trace.link_id = j.at("link_id").get<std::string>();
      item.kind = parse_anomaly_kind(j.at("kind").get<std::string>());
      item.descriptor.onset = j.at("onset").get<std::size_t>();
      item.descriptor.duration = j.at("duration").get<std::size_t>();
      item.descriptor.slope = j.at("slope").get<double>();
      item.descriptor.indices = j.at("indices").get<std::vector<std::size_t>>();
      item.trace.samples = j.at("samples").get<std::vector<double>>();
      item.labels = j.at("labels").get<std::vector<std::uint8_t>>();
      if (item.labels.size() != item.trace.samples.size()) {
        throw ParseError(line_no, "labels and samples differ in length");
      }
      dataset.push_back(std::move(item));
    } catch (const ParseError&) {
      throw;
    } catch (const std::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return dataset;
}

}  // namespace mtfgat
