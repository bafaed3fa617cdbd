#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "traindyn/dataset.hpp"

namespace traindyn {

enum class NoiseKind { symmetric, asymmetric, superclass };

std::string to_string(NoiseKind kind);
NoiseKind noise_kind_from_string(const std::string& name);

/// Label-noise generator description. JSON form:
///   {"kind":"symmetric","ratio":0.4,"seed":7}
/// superclass additionally carries "class_to_group" (class index -> group id,
/// total, every group >= 2 classes); asymmetric may carry a fixed-point-free
/// "class_permutation" overriding the default (y+1) mod C shift.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::symmetric;
  double ratio = 0.0;
  std::map<int, int> class_to_group;   // superclass only
  std::map<int, int> class_permutation;  // asymmetric only, optional
  std::uint64_t seed = 0;
  // Symmetric draws exclude the current label by default so the nominal ratio
  // equals the realized flag ratio; flip to redraw over all C classes.
  bool allow_true_class_redraw = false;

  void validate(int num_classes) const;
  std::string to_json_string() const;
  static NoiseSpec from_json_string(const std::string& text);
};

/// Corrupts exactly floor(ratio*n) uniformly chosen samples, assigning each a
/// uniform draw over the C-1 classes other than its current label. The result
/// carries true_label (the input label) and flag = 1 iff the label changed.
LabeledDataset inject_symmetric(const LabeledDataset& dataset, double ratio, std::uint64_t seed,
                                bool allow_true_class_redraw = false);

/// Corrupted samples get label (y+1) mod C (or class_permutation[y] if given).
LabeledDataset inject_asymmetric(const LabeledDataset& dataset, double ratio, std::uint64_t seed,
                                 const std::map<int, int>& class_permutation = {});

/// Corrupted samples get a uniform draw over the other classes in their group.
LabeledDataset inject_superclass(const LabeledDataset& dataset, double ratio,
                                 const std::map<int, int>& class_to_group, std::uint64_t seed);

/// Dispatch on spec.kind.
LabeledDataset inject_noise(const LabeledDataset& dataset, const NoiseSpec& spec);

/// Applies `underlying` first (its flags land in underlying_flags), then
/// `synthesized` on the already-corrupted labels. The returned flag channel
/// reflects only the second injection; true_label holds the labels the second
/// injection saw.
LabeledDataset contaminate_twice(const LabeledDataset& dataset, const NoiseSpec& underlying,
                                 const NoiseSpec& synthesized);

}  // namespace traindyn
