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

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mtfgat {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

/// Fixed number of significant digits, as printf("%.*g").
std::string format_double(double value, int significant_digits);

/// Strict parsers: the whole field must be consumed.
bool parse_double(std::string_view text, double& out);
bool parse_uint(std::string_view text, std::uint64_t& out);

std::vector<std::string_view> split(std::string_view text, char separator);
std::string_view trim(std::string_view text);

/// 64-bit FNV-1a content digest rendered as 16 hex characters.
std::string digest_hex(std::string_view bytes);
std::string file_digest(const std::string& path);

}  // namespace mtfgat
