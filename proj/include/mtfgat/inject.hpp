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
#include <string_view>
#include <vector>

#include "mtfgat/random.hpp"
#include "mtfgat/trace.hpp"

namespace mtfgat {

enum class AnomalyKind { None, SuddenD, SuddenR, InstaD, SlowD };

inline constexpr AnomalyKind kAllKinds[] = {AnomalyKind::None, AnomalyKind::SuddenD,
                                            AnomalyKind::SuddenR, AnomalyKind::InstaD,
                                            AnomalyKind::SlowD};

std::string_view to_string(AnomalyKind kind);
/// Throws Error for unknown names.
AnomalyKind parse_anomaly_kind(std::string_view name);

/// Inclusive index interval, 0-based.
struct IndexRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct RealRange {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const RealRange&, const RealRange&) = default;
};

/// Draw ranges of the four injectors. Onsets are 0-based sample indices,
/// so the 200th sample is index 199. All ranges are inclusive.
struct InjectionParams {
  IndexRange suddend_onset{199, 279};
  IndexRange suddenr_onset{24, 274};
  IndexRange suddenr_duration{5, 20};
  double instad_fraction = 0.01;
  IndexRange slowd_onset{0, 19};
  IndexRange slowd_duration{150, 180};
  RealRange slowd_slope{0.5, 1.5};
  double drop_floor = 0.0;

  /// Defaults rescaled to a trace length other than 300. Onset windows and
  /// the SlowD duration scale with the length; SuddenR durations are kept in
  /// samples and its onset window is clipped so every draw still fits.
  static InjectionParams for_length(std::size_t length);

  /// Throws ConfigError if a range is empty, a window can leave a trace of
  /// `length` samples, or the InstaD count rounds to zero.
  void validate(std::size_t length, const TraceSchema& schema) const;

  friend bool operator==(const InjectionParams&, const InjectionParams&) = default;
};

/// Everything an injector drew, enough to recompute the labels.
struct InjectionDescriptor {
  std::size_t onset = 0;
  std::size_t duration = 0;
  double slope = 0.0;
  std::vector<std::size_t> indices;  // InstaD only, ascending
  friend bool operator==(const InjectionDescriptor&, const InjectionDescriptor&) = default;
};

/// A trace after injection together with its per-sample ground truth.
struct LabeledTrace {
  RssiTrace trace;
  std::vector<std::uint8_t> labels;
  AnomalyKind kind = AnomalyKind::None;
  InjectionDescriptor descriptor;

  std::size_t anomalous_points() const;
  friend bool operator==(const LabeledTrace&, const LabeledTrace&) = default;
};

LabeledTrace as_clean(const RssiTrace& trace);

/// Permanent drop to drop_floor from a uniformly drawn onset to the end.
LabeledTrace inject_suddend(const RssiTrace& trace, const InjectionParams& params,
                            const TraceSchema& schema, Rng& rng);
/// Drop to drop_floor for a drawn duration, then the original values resume.
LabeledTrace inject_suddenr(const RssiTrace& trace, const InjectionParams& params,
                            const TraceSchema& schema, Rng& rng);
/// round(fraction * length) distinct single-sample drops.
LabeledTrace inject_instad(const RssiTrace& trace, const InjectionParams& params,
                           const TraceSchema& schema, Rng& rng);
/// Linear decline over a drawn window:
///   sample(x) <- clamp(sample(x) + min(0, -slope * (x - onset)))
/// The whole window is labeled, including x == onset where the offset is 0.
LabeledTrace inject_slowd(const RssiTrace& trace, const InjectionParams& params,
                          const TraceSchema& schema, Rng& rng);

LabeledTrace inject(AnomalyKind kind, const RssiTrace& trace, const InjectionParams& params,
                    const TraceSchema& schema, Rng& rng);

/// Requested number of output traces per kind.
struct Composition {
  std::size_t suddend = 0;
  std::size_t suddenr = 0;
  std::size_t instad = 0;
  std::size_t slowd = 0;
  std::size_t clean = 0;

  std::size_t count(AnomalyKind kind) const;
  std::size_t anomalous() const { return suddend + suddenr + instad + slowd; }
  std::size_t total() const { return anomalous() + clean; }

  /// 700 per anomaly kind and 5692 clean links, 8492 in total.
  static Composition full_scale() { return {700, 700, 700, 700, 5692}; }
};

/// Draws a disjoint subset of the clean pool for every kind, injects each
/// source trace with its own derived sub-seed and returns the result in a
/// seed-determined shuffled order. Throws CapacityError naming the
/// shortfall if the pool is too small.
std::vector<LabeledTrace> build_dataset(std::span<const RssiTrace> clean,
                                        const Composition& composition,
                                        const InjectionParams& params, const TraceSchema& schema,
                                        std::uint64_t seed);

/// Line-delimited JSON, one trace per line. Doubles are printed in their
/// shortest round-trip form, so read(write(x)) == x bit for bit.
void write_dataset(std::ostream& out, std::span<const LabeledTrace> dataset);
std::vector<LabeledTrace> read_dataset(std::istream& in);

}  // namespace mtfgat
