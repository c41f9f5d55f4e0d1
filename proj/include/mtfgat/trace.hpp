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
#include <vector>

#include "mtfgat/random.hpp"

namespace mtfgat {

/// Conventions of a trace collection: fixed length, RSSI bounds and the
/// packet interval. Defaults describe 30 s of packets every 100 ms.
struct TraceSchema {
  std::size_t expected_length = 300;
  double rssi_min = 0.0;
  double rssi_max = 128.0;
  double sample_period_ms = 100.0;

  /// Throws ConfigError unless rssi_min < rssi_max and expected_length >= 2.
  void validate() const;
  bool contains(double rssi) const { return rssi >= rssi_min && rssi <= rssi_max; }
};

/// One link's RSSI samples, in transmission order.
struct RssiTrace {
  std::string link_id;
  std::vector<double> samples;

  std::size_t length() const { return samples.size(); }
  friend bool operator==(const RssiTrace&, const RssiTrace&) = default;
};

/// Throws SchemaError if the trace is shorter than 2 samples or holds a
/// non-finite or out-of-range sample.
void validate_trace(const RssiTrace& trace, const TraceSchema& schema);

struct LinkRecord {
  std::uint64_t sequence_number = 0;
  double rssi = 0.0;
  friend bool operator==(const LinkRecord&, const LinkRecord&) = default;
};

/// Records of one link as they appear in a measurement log.
struct RawLinkLog {
  std::string link_id;
  std::string noise_level;
  std::vector<LinkRecord> records;
  friend bool operator==(const RawLinkLog&, const RawLinkLog&) = default;
};

/// Parses the raw log format:
///
///   # link <id> noise=<label>
///   <seq>,<rssi>
///   ...
///
/// Blank lines are skipped. Sequence numbers must be strictly increasing
/// within a link. Throws ParseError (with line number) on malformed lines
/// and SchemaError on RSSI values outside the schema bounds.
std::vector<RawLinkLog> ingest_raw_log(std::istream& in, const TraceSchema& schema);
void write_raw_log(std::ostream& out, std::span<const RawLinkLog> logs);

/// Keeps the logs without packet loss: a gap-free sequence run of exactly
/// schema.expected_length records.
std::vector<RssiTrace> filter_complete(std::span<const RawLinkLog> logs,
                                       const TraceSchema& schema);

/// Parameters of the synthetic clean-link generator: an integer baseline
/// drawn uniformly from [baseline_min, baseline_max] per link, plus an
/// integer jitter drawn uniformly from [-jitter, jitter] per sample.
struct SynthesisProfile {
  double baseline_min = 50.0;
  double baseline_max = 60.0;
  int jitter = 1;
};

std::vector<RssiTrace> synthesize_clean(std::size_t count, const TraceSchema& schema, Rng& rng,
                                        const SynthesisProfile& profile = {});

/// Min-max scaling of every sample into [0, 1] using the schema bounds.
std::vector<double> normalize(const RssiTrace& trace, const TraceSchema& schema);

/// CSV with header `link_id,idx,rssi`, one row per sample.
void write_traces_csv(std::ostream& out, std::span<const RssiTrace> traces);
std::vector<RssiTrace> read_traces_csv(std::istream& in);

}  // namespace mtfgat
