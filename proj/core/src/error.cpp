// Copyright 2026 The wsibench Authors
// SPDX-License-Identifier: Apache-2.0

#include "wsibench/error.hpp"

namespace wsibench {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingCell: return "MissingCell";
    case ErrorKind::DuplicateRow: return "DuplicateRow";
    case ErrorKind::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorKind::SingleClassRun: return "SingleClassRun";
    case ErrorKind::MalformedRow: return "MalformedRow";
    case ErrorKind::ExtractorSetMismatch: return "ExtractorSetMismatch";
    case ErrorKind::PairMismatch: return "PairMismatch";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptySplit: return "EmptySplit";
    case ErrorKind::ClassMissing: return "ClassMissing";
    case ErrorKind::SlideTooSmall: return "SlideTooSmall";
    case ErrorKind::InsufficientTissue: return "InsufficientTissue";
    case ErrorKind::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::VariantMissing: return "VariantMissing";
    case ErrorKind::InsufficientClasses: return "InsufficientClasses";
    case ErrorKind::KeyMissing: return "KeyMissing";
    case ErrorKind::EmptyReport: return "EmptyReport";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::EnumerationTooLarge: return "EnumerationTooLarge";
    case ErrorKind::DegenerateResample: return "DegenerateResample";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::CacheCorrupt: return "CacheCorrupt";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

bool is_validation_error(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::EnumerationTooLarge:
    case ErrorKind::DegenerateResample:
    case ErrorKind::NonFiniteLoss:
    case ErrorKind::CacheCorrupt:
    case ErrorKind::Io:
      return false;
    default:
      return true;
  }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace wsibench
