#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace traindyn {

/// Feature vectors with given labels. `true_labels`, `flags` and
/// `underlying_flags` are optional channels (empty when absent); row index is
/// the sample id. When both true labels and flags are present, flag == 1 iff
/// given label != true label.
struct LabeledDataset {
  int num_classes = 0;
  int feature_dim = 0;
  std::vector<double> features;  // num_samples x feature_dim, row-major
  std::vector<int> given_labels;
  std::vector<int> true_labels;
  std::vector<int> flags;             // {0,1}
  std::vector<int> underlying_flags;  // {0,1}, set by contaminate_twice only

  std::size_t size() const { return given_labels.size(); }
  bool has_true_labels() const { return !true_labels.empty(); }
  bool has_flags() const { return !flags.empty(); }
  bool has_underlying_flags() const { return !underlying_flags.empty(); }

  std::span<const double> sample(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(feature_dim),
            static_cast<std::size_t>(feature_dim)};
  }

  /// Checks label ranges, channel sizes and the flag/label-change equivalence.
  /// Throws std::invalid_argument on violation.
  void validate() const;
};

/// Dataset CSV. Header: sample_id,given_label,true_label,flag,underlying_flag,
/// x_0,...,x_{d-1}; unknown label/flag cells hold -1. A JSON sidecar
/// <name>.meta.json records num_classes / dim / num_samples.
LabeledDataset read_dataset(const std::filesystem::path& path);
void write_dataset(const LabeledDataset& dataset, const std::filesystem::path& path);

}  // namespace traindyn
