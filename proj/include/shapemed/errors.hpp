#pragma once

#include <stdexcept>
#include <string>

namespace shapemed {

/// A design matrix (or one of its blocks) does not have full column rank.
class RankDeficientError : public std::runtime_error {
 public:
  explicit RankDeficientError(const std::string& what) : std::runtime_error(what) {}
};

/// The active-set iteration hit its iteration cap.
class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

/// Input data violates a structural requirement (sizes, missing values, parse failures).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// The exposure column is not a usable binary contrast.
class ExposureError : public DataError {
 public:
  explicit ExposureError(const std::string& what) : DataError(what) {}
};

}  // namespace shapemed
