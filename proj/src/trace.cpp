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

#include "mtfgat/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string_view>

#include "mtfgat/error.hpp"
#include "mtfgat/text.hpp"

namespace mtfgat {

void TraceSchema::validate() const {
  if (!(rssi_min < rssi_max)) throw ConfigError("schema requires rssi_min < rssi_max");
  if (expected_length < 2) throw ConfigError("schema requires expected_length >= 2");
  if (!(sample_period_ms > 0.0)) throw ConfigError("schema requires a positive sample period");
}

void validate_trace(const RssiTrace& trace, const TraceSchema& schema) {
  if (trace.length() < 2) {
    throw SchemaError("trace '" + trace.link_id + "' has fewer than 2 samples");
  }
  for (std::size_t i = 0; i < trace.length(); ++i) {
    const double s = trace.samples[i];
    if (!std::isfinite(s) || !schema.contains(s)) {
      throw SchemaError("trace '" + trace.link_id + "' sample " + std::to_string(i) + " = " +
                        format_double(s) + " outside [" + format_double(schema.rssi_min) + ", " +
                        format_double(schema.rssi_max) + "]");
    }
  }
}

std::vector<RawLinkLog> ingest_raw_log(std::istream& in, const TraceSchema& schema) {
  std::vector<RawLinkLog> logs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = trim(line);
    if (text.empty()) continue;

    if (text.front() == '#') {
      // # link <id> noise=<label>
      std::vector<std::string_view> words;
      for (auto w : split(text.substr(1), ' ')) {
        if (!w.empty()) words.push_back(w);
      }
      if (words.size() != 3 || words[0] != "link" || !words[2].starts_with("noise=")) {
        throw ParseError(line_no, "expected '# link <id> noise=<label>'");
      }
      RawLinkLog log;
      log.link_id = std::string(words[1]);
      log.noise_level = std::string(words[2].substr(6));
      logs.push_back(std::move(log));
      continue;
    }

    if (logs.empty()) throw ParseError(line_no, "record before any link header");
    const auto fields = split(text, ',');
    LinkRecord record;
    if (fields.size() != 2 || !parse_uint(trim(fields[0]), record.sequence_number) ||
        !parse_double(trim(fields[1]), record.rssi) || !std::isfinite(record.rssi)) {
      throw ParseError(line_no, "expected '<seq>,<rssi>'");
    }
    if (!schema.contains(record.rssi)) {
      throw SchemaError("line " + std::to_string(line_no) + ": rssi " +
                        format_double(record.rssi) + " outside [" +
                        format_double(schema.rssi_min) + ", " + format_double(schema.rssi_max) +
                        "]");
    }
    auto& records = logs.back().records;
    if (!records.empty() && record.sequence_number <= records.back().sequence_number) {
      throw ParseError(line_no, "sequence numbers must be strictly increasing");
    }
    records.push_back(record);
  }
  return logs;
}

void write_raw_log(std::ostream& out, std::span<const RawLinkLog> logs) {
  for (const auto& log : logs) {
    out << "# link " << log.link_id << " noise=" << log.noise_level << '\n';
    for (const auto& r : log.records) {
      out << r.sequence_number << ',' << format_double(r.rssi) << '\n';
    }
  }
}

std::vector<RssiTrace> filter_complete(std::span<const RawLinkLog> logs,
                                       const TraceSchema& schema) {
  std::vector<RssiTrace> traces;
  for (const auto& log : logs) {
    if (log.records.size() != schema.expected_length) continue;
    bool gap_free = true;
    for (std::size_t i = 1; i < log.records.size(); ++i) {
      if (log.records[i].sequence_number != log.records[i - 1].sequence_number + 1) {
        gap_free = false;
        break;
      }
    }
    if (!gap_free) continue;
    RssiTrace trace;
    trace.link_id = log.link_id;
    trace.samples.reserve(log.records.size());
    for (const auto& r : log.records) trace.samples.push_back(r.rssi);
    traces.push_back(std::move(trace));
  }
  return traces;
}

std::vector<RssiTrace> synthesize_clean(std::size_t count, const TraceSchema& schema, Rng& rng,
                                        const SynthesisProfile& profile) {
  schema.validate();
  if (count < 1) throw ConfigError("synthesize_clean needs count >= 1");
  const double lo = std::ceil(profile.baseline_min);
  const double hi = std::floor(profile.baseline_max);
  if (!(lo <= hi)) throw ConfigError("empty baseline range");
  if (profile.jitter < 0) throw ConfigError("jitter must be non-negative");

  const auto width = static_cast<std::uint64_t>(hi - lo);
  const auto jitter = static_cast<std::uint64_t>(profile.jitter);
  std::vector<RssiTrace> traces(count);
  for (std::size_t k = 0; k < count; ++k) {
    char id[32];
    std::snprintf(id, sizeof id, "synth-%06zu", k);
    traces[k].link_id = id;
    const double baseline = lo + static_cast<double>(rng.uniform_int(0, width));
    traces[k].samples.resize(schema.expected_length);
    for (auto& s : traces[k].samples) {
      const double j = static_cast<double>(rng.uniform_int(0, 2 * jitter)) -
                       static_cast<double>(jitter);
      s = std::clamp(baseline + j, schema.rssi_min, schema.rssi_max);
    }
  }
  return traces;
}

std::vector<double> normalize(const RssiTrace& trace, const TraceSchema& schema) {
  const double range = schema.rssi_max - schema.rssi_min;
  std::vector<double> features(trace.length());
  for (std::size_t i = 0; i < trace.length(); ++i) {
    features[i] = (trace.samples[i] - schema.rssi_min) / range;
  }
  return features;
}

void write_traces_csv(std::ostream& out, std::span<const RssiTrace> traces) {
  out << "link_id,idx,rssi\n";
  for (const auto& t : traces) {
    for (std::size_t i = 0; i < t.length(); ++i) {
      out << t.link_id << ',' << i << ',' << format_double(t.samples[i]) << '\n';
    }
  }
}

std::vector<RssiTrace> read_traces_csv(std::istream& in) {
  std::vector<RssiTrace> traces;
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line) || trim(line) != "link_id,idx,rssi") {
    throw ParseError(1, "expected header 'link_id,idx,rssi'");
  }
  ++line_no;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto fields = split(text, ',');
    std::uint64_t idx = 0;
    double rssi = 0.0;
    if (fields.size() != 3 || fields[0].empty() || !parse_uint(fields[1], idx) ||
        !parse_double(fields[2], rssi)) {
      throw ParseError(line_no, "expected '<link_id>,<idx>,<rssi>'");
    }
    const bool new_trace = traces.empty() || traces.back().link_id != fields[0];
    if (new_trace) {
      if (idx != 0) throw ParseError(line_no, "trace must start at idx 0");
      traces.push_back(RssiTrace{std::string(fields[0]), {}});
    } else if (idx != traces.back().length()) {
      throw ParseError(line_no, "non-consecutive idx");
    }
    traces.back().samples.push_back(rssi);
  }
  return traces;
}

}  // namespace mtfgat
