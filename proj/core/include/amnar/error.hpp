// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#pragma once

#include <stdexcept>
#include <string>

namespace amnar {

/// Base for every domain failure raised by the library. The CLI maps these
/// to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed file contents (feature, JSON, JSONL).
class FormatError : public Error {
 public:
  using Error::Error;
};

class InvalidSegmentError : public Error {
 public:
  using Error::Error;
};

class InvalidNodeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingCenterError : public Error {
 public:
  explicit MissingCenterError(int cls)
      : Error("no cluster center for action class " + std::to_string(cls)), cls_(cls) {}
  int action_class() const noexcept { return cls_; }

 private:
  int cls_;
};

class NoCandidateError : public Error {
 public:
  using Error::Error;
};

class MissingThresholdError : public Error {
 public:
  using Error::Error;
};

/// A metric has no defined value for the given input (e.g. AUC with one class).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace amnar
