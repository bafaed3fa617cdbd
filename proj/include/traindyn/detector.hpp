#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "traindyn/adamw.hpp"
#include "traindyn/dynamics.hpp"

namespace traindyn {

/// Stacked-LSTM noise detector with a sigmoid head over the final top-layer
/// hidden state. Parameters live in one flat vector; per layer, in order:
/// w_ih (4H x in), w_hh (4H x H), b_ih (4H), b_hh (4H), gate order
/// input/forget/candidate/output; then head weights (H) and bias. Layer 0
/// consumes the scalar probability sequence, so its input size is 1.
struct DetectorModel {
  int num_layers = 2;
  int hidden_size = 64;
  int input_len = 0;  // canonical sequence length the detector was trained on
  std::vector<double> params;

  /// Uniform(-1/sqrt(H), 1/sqrt(H)) everywhere except the forget-gate biases,
  /// set to 1 (b_ih) and 0 (b_hh) for trainability.
  static DetectorModel init(int input_len, std::uint64_t seed, int num_layers = 2,
                            int hidden_size = 64);

  std::size_t num_params() const { return params.size(); }
};

struct DetectorTrainConfig {
  int epochs = 10;
  double learning_rate = 0.1;  // fine-tuning: 0.03
  int batch_size = 64;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  double clip_norm = 5.0;  // global gradient-norm clip; <= 0 disables
  std::uint64_t seed = 0;

  /// From-scratch training wants epochs >= 1 and learning_rate > 0; a
  /// fine-tune call may pass 0 for either (a no-op run).
  void validate(bool fine_tuning = false) const;

  std::string to_json_string() const;
  static DetectorTrainConfig from_json_string(const std::string& text);
};

/// Mislabel probability for one sequence of length model.input_len.
double detector_forward(const DetectorModel& model, std::span<const double> seq);

/// Mean binary cross-entropy over a batch (rows of `seqs`, flattened
/// batch x input_len) and its gradient w.r.t. all parameters, by
/// backpropagation through time. Numerically the fused sigmoid-BCE form.
std::pair<double, std::vector<double>> detector_loss_and_grad(
    const DetectorModel& model, std::span<const double> seqs, std::span<const int> flags);

struct DetectorTrainResult {
  DetectorModel model;
  std::vector<double> epoch_losses;  // mean training BCE per epoch
};

/// Mini-batch AdamW on BCE with deterministic shuffling and global-norm
/// gradient clipping. The table must carry flags; its epoch count becomes the
/// model's input_len. Throws DivergenceError naming the epoch on a non-finite
/// loss.
DetectorTrainResult train_detector(const DynamicsTable& table,
                                   const DetectorTrainConfig& config);

/// Same loop starting from an existing model; rows are resampled to the
/// model's input_len first. epochs = 0 or learning_rate = 0 return the model
/// unchanged.
DetectorTrainResult fine_tune(const DetectorModel& model, const DynamicsTable& table,
                              const DetectorTrainConfig& config);

/// Per-row mislabel scores: each row resampled to model.input_len, then
/// forwarded. Pure function of (model, table); flags are not required.
std::vector<double> score(const DetectorModel& model, const DynamicsTable& table);

/// 1 - mean given-label probability per row; the margin-style comparator.
std::vector<double> baseline_score(const DynamicsTable& table);

/// JSON checkpoint: {num_layers, hidden_size, input_len,
/// layers:[{w_ih, w_hh, b_ih, b_hh}], head:{w, b}}, row-major flat arrays.
void save_detector(const DetectorModel& model, const std::filesystem::path& path);
DetectorModel load_detector(const std::filesystem::path& path);

}  // namespace traindyn
