#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace traindyn {

/// Per-sample sequence of given-label probabilities across training epochs.
/// Row i corresponds to sample id i of the dataset the run was trained on.
struct DynamicsTable {
  int num_epochs = 0;
  std::vector<double> values;  // num_samples x num_epochs, row-major, in [0,1]
  std::vector<int> labels;     // given label per row
  std::vector<int> true_labels;  // optional
  std::vector<int> flags;        // optional, {0,1}
  std::map<std::string, std::string> metadata;  // seed, schedule, num_classes, ...

  std::size_t num_samples() const {
    return num_epochs > 0 ? values.size() / static_cast<std::size_t>(num_epochs) : 0;
  }
  bool has_flags() const { return !flags.empty(); }
  bool has_true_labels() const { return !true_labels.empty(); }

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * static_cast<std::size_t>(num_epochs),
            static_cast<std::size_t>(num_epochs)};
  }

  /// Checks shape consistency and that every probability lies in [0,1].
  void validate() const;
};

/// Piecewise-linear resampling of `seq` at `target_len` equally spaced
/// positions over [0, len-1]. Endpoints are preserved exactly and outputs
/// never leave [min(seq), max(seq)]. Both lengths must be >= 2.
std::vector<double> resample_sequence(std::span<const double> seq, int target_len);

/// Dynamics CSV. Header: sample_id,given_label,true_label,flag,p_0,...,p_{T-1};
/// true_label/flag hold -1 when unknown, probabilities carry 6 fractional
/// digits. A JSON sidecar <name>.meta.json holds {num_classes, num_epochs,
/// seed, schedule, generator}. NaN entries (missing epochs) are filled by
/// linear interpolation between the nearest recorded epochs at write time.
DynamicsTable read_dynamics(const std::filesystem::path& path);
void write_dynamics(const DynamicsTable& table, const std::filesystem::path& path);

/// Sidecar path for a dynamics or dataset file: foo.csv -> foo.meta.json.
std::filesystem::path meta_sidecar_path(const std::filesystem::path& path);

}  // namespace traindyn
