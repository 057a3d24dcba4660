// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace numprobe {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition (bad argument, bad shape).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A file did not parse under its declared format.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Parsed data breaks an invariant (NaN payload, duplicate labels, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Optimization diverged (non-finite loss).
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int epoch) : Error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

}  // namespace numprobe
