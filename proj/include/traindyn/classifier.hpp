#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "traindyn/dataset.hpp"
#include "traindyn/dynamics.hpp"

namespace traindyn {

/// One-hidden-layer tanh MLP with a softmax head, the reference model whose
/// training dynamics feed the detector. Parameters live in a single flat
/// vector so optimizers and finite-difference checks treat the model as one
/// point in R^n. Layout (row-major): w1 (h x d), b1 (h), w2 (C x h), b2 (C).
struct ClassifierModel {
  int input_dim = 0;
  int hidden_size = 0;
  int num_classes = 0;
  std::vector<double> params;

  /// Hidden weights uniform(-1/sqrt(d), 1/sqrt(d)); hidden biases and the
  /// whole head zero, so the untrained model outputs exactly 1/C everywhere.
  static ClassifierModel init(int input_dim, int hidden_size, int num_classes,
                              std::uint64_t seed);

  std::size_t num_params() const { return params.size(); }

  /// Softmax probabilities for one sample; nonnegative, sums to 1.
  std::vector<double> probabilities(std::span<const double> x) const;

  /// Argmax class (lowest index wins ties).
  int predict(std::span<const double> x) const;
};

struct TrainConfig {
  int epochs = 60;
  int batch_size = 128;
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  std::vector<int> lr_drop_epochs = {30, 45};
  double lr_drop_factor = 0.1;
  int hidden_size = 32;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;

  std::string to_json_string() const;
  static TrainConfig from_json_string(const std::string& text);
};

/// Gaussian blob classification task: unit-covariance clusters centered on
/// the axes at +-(separation/sqrt(2)), so every pair of centers is at least
/// `separation` apart. Needs num_classes <= 2 * dim.
struct BlobSpec {
  int num_classes = 10;
  int per_class = 200;
  int dim = 16;
  double separation = 4.0;
  /// Fraction of train samples relabeled uniformly at random (no
  /// bookkeeping); simulates intrinsic class overlap rather than label noise.
  double label_overlap_fraction = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json_string() const;
  static BlobSpec from_json_string(const std::string& text);
};

struct BlobData {
  LabeledDataset train;
  LabeledDataset test;                // 80/20 split, last fifth of each class
  std::vector<double> centers;        // num_classes x dim, row-major
};

BlobData make_blobs(const BlobSpec& spec);
BlobData make_blobs(int num_classes, int per_class, int dim, double separation,
                    double label_overlap_fraction, std::uint64_t seed);

struct ClassifierTrainResult {
  ClassifierModel model;
  DynamicsTable dynamics;            // one column per epoch, end-of-epoch sweep
  std::vector<double> epoch_losses;  // mean cross-entropy from the same sweep
};

/// Mini-batch SGD with momentum, L2 weight decay folded into the gradient,
/// and the lr-drop schedule. After each epoch a
/// dedicated full forward sweep records every sample's given-label
/// probability into the dynamics table. Throws DivergenceError naming the
/// epoch when the loss stops being finite.
ClassifierTrainResult train_classifier(const LabeledDataset& dataset,
                                       const TrainConfig& config);

/// Mean cross-entropy and gradient (flat, same layout as params) over the
/// given rows. Exposed for gradient checking; training uses it per batch.
std::pair<double, std::vector<double>> classifier_loss_and_grad(
    const ClassifierModel& model, const LabeledDataset& dataset,
    std::span<const std::size_t> rows);

/// Top-1 accuracy on a held-out split. Throws on an empty split.
double evaluate_classifier(const ClassifierModel& model, const LabeledDataset& test);

/// JSON checkpoint with explicit shapes and row-major flat weight arrays.
void save_classifier(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_classifier(const std::filesystem::path& path);

}  // namespace traindyn
