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
#include <stdexcept>
#include <string>

namespace mtfgat {

/// Base class for every error raised by the library. The CLI prints
/// what() behind a stable "mtfgat: error:" prefix.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// A value violates the active TraceSchema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters (empty ranges, windows that do not fit, bad flags).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Not enough source material for a requested composition.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes or sequence lengths that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation produced NaN or Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Training diverged. Records where it happened.
class TrainingError : public Error {
 public:
  TrainingError(std::size_t split, std::size_t epoch, const std::string& message)
      : Error("split " + std::to_string(split) + ", epoch " + std::to_string(epoch) + ": " +
              message),
        split_(split),
        epoch_(epoch) {}
  std::size_t split() const { return split_; }
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t split_;
  std::size_t epoch_;
};

}  // namespace mtfgat
