#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace provaudit {

// Base class for every error raised by the library. Callers that only need
// a message can catch this; the subclasses let tests and the CLI branch on
// the failure category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class UnsupportedFormatError : public Error {
 public:
  using Error::Error;
};

class TooSmallError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MetricError : public Error {
 public:
  using Error::Error;
};

class DegenerateCalibrationError : public Error {
 public:
  using Error::Error;
};

class DegenerateLabelsError : public Error {
 public:
  using Error::Error;
};

class UnattainablePolicyError : public Error {
 public:
  UnattainablePolicyError(const std::string& what, double best_tpr,
                          double best_fpr)
      : Error(what), best_tpr_(best_tpr), best_fpr_(best_fpr) {}
  // Closest achievable operating point on the curve.
  double frontier_tpr() const noexcept { return best_tpr_; }
  double frontier_fpr() const noexcept { return best_fpr_; }

 private:
  double best_tpr_;
  double best_fpr_;
};

class EmptyCorpusError : public Error {
 public:
  EmptyCorpusError() : Error("corpus is empty") {}
};

class CorpusIntegrityError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace provaudit
