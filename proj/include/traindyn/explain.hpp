#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "traindyn/detector.hpp"

namespace traindyn {

/// Local surrogate explanation of one detector decision: per-epoch linear
/// coefficients of detector output on keep/mask indicators.
struct Explanation {
  std::vector<double> epoch_importances;  // one per input epoch
  double intercept = 0.0;
  double fidelity = 0.0;       // weighted R^2 of the surrogate fit
  bool ridge_fallback = false;  // set when the plain solve was singular
};

/// Samples binary epoch masks (masked epochs replaced by the sequence mean),
/// queries the detector on each perturbed sequence, and fits a weighted
/// least-squares linear surrogate with proximity kernel exp(-d^2 / width^2)
/// on mask Hamming distance. kernel_width <= 0 selects the default
/// 0.75 * sqrt(input_len). Requires num_perturbations >= 2 * input_len.
Explanation explain_instance(const DetectorModel& model, std::span<const double> seq,
                             int num_perturbations, double kernel_width, std::uint64_t seed);

/// CSV: epoch,importance.
void write_explanation(const Explanation& explanation, const std::filesystem::path& path);

}  // namespace traindyn
