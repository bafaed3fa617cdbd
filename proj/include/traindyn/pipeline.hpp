#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "traindyn/classifier.hpp"
#include "traindyn/detector.hpp"
#include "traindyn/metrics.hpp"
#include "traindyn/noise.hpp"

namespace traindyn {

/// End-to-end identification run description. Every stage draws its seed from
/// the root `seed` via stage-name derivation, so per-spec seed fields inside
/// the nested configs are ignored here and reruns with one root seed are
/// fully reproducible. The target defaults to a fresh draw of the source
/// blobs (its stage name differs, so its data is new).
struct PipelineConfig {
  BlobSpec blobs;
  NoiseSpec source_noise;
  std::optional<NoiseSpec> underlying_noise;  // twice-contamination when set
  TrainConfig ref_config;
  DetectorTrainConfig detector_config;
  std::optional<BlobSpec> target_blobs;       // defaults to `blobs`
  NoiseSpec target_noise;
  std::optional<TrainConfig> target_ref_config;  // defaults to `ref_config`
  std::uint64_t seed = 0;

  void validate() const;
  std::string to_json_string() const;
  static PipelineConfig from_json_string(const std::string& text);
};

struct IdentificationResult {
  EvalReport detector_report;
  EvalReport baseline_report;
  std::vector<double> scores;
  std::vector<double> baseline_scores;
  DetectorModel detector;
  DynamicsTable target_dynamics;
};

/// corrupt -> train-ref -> train-detector -> score a fresh target ->
/// evaluate. All intermediate artifacts land in out_dir; any stage failure
/// rethrows with the stage name prefixed, leaving partial artifacts in place.
IdentificationResult run_identification(const PipelineConfig& config,
                                        const std::filesystem::path& out_dir);

/// CSV: epoch,loss with exact doubles.
void write_losses(const std::vector<double>& losses, const std::filesystem::path& path);

/// CSV: sample_id,score,baseline,flag (flag -1 when the table has none).
void write_scores(const DynamicsTable& table, std::span<const double> scores,
                  std::span<const double> baseline, const std::filesystem::path& path);

struct RetrainReport {
  double standard_acc = 0.0;
  double cleaned_acc = 0.0;
  double oracle_acc = 0.0;
  std::size_t excluded = 0;  // cleaned-arm exclusion count
};

/// Three arms on one noisy train set: as-is, minus predicted mislabels
/// (score > threshold, or the top_k_percent highest scores when
/// top_k_percent >= 0), minus truly flagged samples. Mini-batch size shrinks
/// proportionally with each retained set. Throws when an exclusion would
/// drop every sample of some class, naming the class.
RetrainReport exclude_and_retrain(const LabeledDataset& train, const LabeledDataset& test,
                                  std::span<const double> scores,
                                  const TrainConfig& ref_config, double threshold = 0.5,
                                  double top_k_percent = -1.0);

enum class CorrectionMode { oracle, pseudo_label };

struct DebugPlan {
  double fraction = 0.1;  // (0, 1]
  CorrectionMode mode = CorrectionMode::oracle;
};

struct DebugReport {
  LabeledDataset corrected;
  double uncorrected_acc = 0.0;
  double corrected_acc = 0.0;
  std::size_t corrected_count = 0;
};

/// Replaces the labels of the top-fraction most suspicious samples: oracle
/// mode restores true labels, pseudo_label mode applies `pseudo_model`
/// predictions (commonly a classifier retrained after excluding those same
/// samples; required in that mode). Retrains on both the original and the
/// corrected set and reports test accuracies. Samples outside the selection
/// are never altered.
DebugReport debug_dataset(const LabeledDataset& train, const LabeledDataset& test,
                          std::span<const double> scores, const DebugPlan& plan,
                          const TrainConfig& ref_config,
                          const ClassifierModel* pseudo_model = nullptr);

}  // namespace traindyn
