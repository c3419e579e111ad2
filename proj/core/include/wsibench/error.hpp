// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wsibench {

enum class ErrorKind {
  // Input validation.
  MissingCell,
  DuplicateRow,
  ValueOutOfRange,
  SingleClassRun,
  MalformedRow,
  ExtractorSetMismatch,
  PairMismatch,
  DimensionMismatch,
  EmptySplit,
  ClassMissing,
  SlideTooSmall,
  InsufficientTissue,
  DegenerateCovariance,
  ZeroVector,
  VariantMissing,
  InsufficientClasses,
  KeyMissing,
  EmptyReport,
  InvalidConfig,
  // Runtime failures.
  EnumerationTooLarge,
  DegenerateResample,
  NonFiniteLoss,
  CacheCorrupt,
  Io,
};

std::string_view to_string(ErrorKind kind) noexcept;

// True for errors caused by bad inputs (CLI exit code 2) as opposed to
// failures during computation (exit code 3).
bool is_validation_error(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace wsibench
