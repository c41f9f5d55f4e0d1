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
#include <string>
#include <utility>
#include <vector>

namespace mtfgat {

/// Version string recorded in run manifests.
std::string tool_version();

/// Runs one `mtfgat` invocation. `args` excludes the program name.
/// Normal output goes to `out`; errors go to `err` behind the
/// "mtfgat: error:" prefix. Returns the process exit code: 0 on success,
/// 2 for usage errors, 1 for every other failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Maximal runs of 1s as (start, length) pairs.
std::vector<std::pair<std::size_t, std::size_t>> anomalous_intervals(
    const std::vector<std::uint8_t>& labels);

}  // namespace mtfgat
