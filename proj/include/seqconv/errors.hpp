// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

#include <stdexcept>
#include <string>

namespace seqconv {

/// Shape, divisibility, or range violation in a caller-supplied argument.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Operation requested in a state that cannot serve it (e.g. eval-mode batch
/// norm without running statistics, backward on a tensor off the tape).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Malformed input file. Carries the byte offset where parsing failed.
class CorruptFile : public std::runtime_error {
 public:
  CorruptFile(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Non-finite values encountered during a forward/backward pass.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Configuration document rejected; `path()` is the JSON pointer of the
/// offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& path, const std::string& message)
      : std::runtime_error(path + ": " + message), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace seqconv
