#pragma once

#include <stdexcept>
#include <string>

namespace traindyn {

/// A file does not conform to one of the on-disk formats.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An optimization run produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, int epoch)
      : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

 private:
  int epoch_;
};

/// A ranking metric is undefined for the given flag vector
/// (e.g. ROC AUC with single-class flags).
class UndefinedMetricError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace traindyn
