#include "traindyn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include <json.hpp>

#include "csv.hpp"
#include "traindyn/errors.hpp"
#include "traindyn/rng.hpp"

namespace traindyn {

namespace {

namespace fs = std::filesystem;

/// Reruns of a failing stage should say which stage died; keep the original
/// exception type so CLI exit codes survive.
template <class F>
auto stage(const std::string& name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const DivergenceError& e) {
    throw DivergenceError("stage " + name + ": " + e.what(), e.epoch());
  } catch (const UndefinedMetricError& e) {
    throw UndefinedMetricError("stage " + name + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError("stage " + name + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("stage " + name + ": " + e.what());
  }
}

/// Rows with keep[i] != 0; refuses to drop the last sample of a class.
LabeledDataset subset(const LabeledDataset& d, const std::vector<char>& keep) {
  std::set<int> before(d.given_labels.begin(), d.given_labels.end());
  LabeledDataset out;
  out.num_classes = d.num_classes;
  out.feature_dim = d.feature_dim;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!keep[i]) continue;
    const auto row = d.sample(i);
    out.features.insert(out.features.end(), row.begin(), row.end());
    out.given_labels.push_back(d.given_labels[i]);
    if (d.has_true_labels()) out.true_labels.push_back(d.true_labels[i]);
    if (d.has_flags()) out.flags.push_back(d.flags[i]);
    if (d.has_underlying_flags()) out.underlying_flags.push_back(d.underlying_flags[i]);
  }
  std::set<int> after(out.given_labels.begin(), out.given_labels.end());
  for (int c : before) {
    if (!after.count(c)) {
      throw std::invalid_argument("exclusion removes every sample of class " +
                                  std::to_string(c));
    }
  }
  return out;
}

int shrunk_batch(int batch, std::size_t retained, std::size_t total) {
  const auto scaled = std::llround(static_cast<double>(batch) *
                                   static_cast<double>(retained) /
                                   static_cast<double>(total));
  return std::max(1, static_cast<int>(scaled));
}

/// Indices sorted by descending score, ties by index.
std::vector<std::size_t> rank_by_score(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  return order;
}

double train_arm(const LabeledDataset& train, const LabeledDataset& test,
                 const TrainConfig& config) {
  return evaluate_classifier(train_classifier(train, config).model, test);
}

}  // namespace

void write_losses(const std::vector<double>& losses, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << "epoch,loss\n";
  for (std::size_t e = 0; e < losses.size(); ++e) {
    f << e << ',' << csv::format_exact(losses[e]) << '\n';
  }
}

void write_scores(const DynamicsTable& table, std::span<const double> scores,
                  std::span<const double> baseline, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << "sample_id,score,baseline,flag\n";
  for (std::size_t i = 0; i < scores.size(); ++i) {
    f << i << ',' << csv::format_exact(scores[i]) << ',' << csv::format_exact(baseline[i]) << ','
      << (table.has_flags() ? table.flags[i] : -1) << '\n';
  }
}

void PipelineConfig::validate() const {
  blobs.validate();
  source_noise.validate(blobs.num_classes);
  if (underlying_noise) underlying_noise->validate(blobs.num_classes);
  ref_config.validate();
  detector_config.validate();
  const BlobSpec& target = target_blobs ? *target_blobs : blobs;
  target.validate();
  target_noise.validate(target.num_classes);
  if (target_ref_config) target_ref_config->validate();
}

std::string PipelineConfig::to_json_string() const {
  nlohmann::json j;
  j["blobs"] = nlohmann::json::parse(blobs.to_json_string());
  j["source_noise"] = nlohmann::json::parse(source_noise.to_json_string());
  if (underlying_noise) {
    j["underlying_noise"] = nlohmann::json::parse(underlying_noise->to_json_string());
  }
  j["ref"] = nlohmann::json::parse(ref_config.to_json_string());
  j["detector"] = nlohmann::json::parse(detector_config.to_json_string());
  if (target_blobs) j["target_blobs"] = nlohmann::json::parse(target_blobs->to_json_string());
  j["target_noise"] = nlohmann::json::parse(target_noise.to_json_string());
  if (target_ref_config) {
    j["target_ref"] = nlohmann::json::parse(target_ref_config->to_json_string());
  }
  j["seed"] = seed;
  return j.dump(2);
}

PipelineConfig PipelineConfig::from_json_string(const std::string& text) {
  PipelineConfig c;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("pipeline config: ") + e.what());
  }
  auto sub = [&](const char* key) { return j.at(key).dump(); };
  try {
    c.blobs = BlobSpec::from_json_string(sub("blobs"));
    c.source_noise = NoiseSpec::from_json_string(sub("source_noise"));
    if (j.contains("underlying_noise")) {
      c.underlying_noise = NoiseSpec::from_json_string(sub("underlying_noise"));
    }
    if (j.contains("ref")) c.ref_config = TrainConfig::from_json_string(sub("ref"));
    if (j.contains("detector")) {
      c.detector_config = DetectorTrainConfig::from_json_string(sub("detector"));
    }
    if (j.contains("target_blobs")) {
      c.target_blobs = BlobSpec::from_json_string(sub("target_blobs"));
    }
    c.target_noise = NoiseSpec::from_json_string(sub("target_noise"));
    if (j.contains("target_ref")) {
      c.target_ref_config = TrainConfig::from_json_string(sub("target_ref"));
    }
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("pipeline config: ") + e.what());
  }
  c.validate();
  return c;
}

IdentificationResult run_identification(const PipelineConfig& config,
                                        const fs::path& out_dir) {
  config.validate();
  fs::create_directories(out_dir);
  {
    std::ofstream f(out_dir / "config.json");
    if (!f) throw std::runtime_error("cannot open config.json for writing");
    f << config.to_json_string() << '\n';
  }

  BlobSpec source_spec = config.blobs;
  source_spec.seed = derive_seed(config.seed, "source_blobs");
  const BlobData source = stage("synth", [&] { return make_blobs(source_spec); });
  write_dataset(source.train, out_dir / "source_clean.csv");
  write_dataset(source.test, out_dir / "source_test.csv");

  const LabeledDataset noisy = stage("corrupt", [&] {
    NoiseSpec synthesized = config.source_noise;
    synthesized.seed = derive_seed(config.seed, "source_noise");
    if (config.underlying_noise) {
      NoiseSpec underlying = *config.underlying_noise;
      underlying.seed = derive_seed(config.seed, "underlying_noise");
      return contaminate_twice(source.train, underlying, synthesized);
    }
    return inject_noise(source.train, synthesized);
  });
  write_dataset(noisy, out_dir / "source_noisy.csv");

  TrainConfig ref_cfg = config.ref_config;
  ref_cfg.seed = derive_seed(config.seed, "ref");
  const ClassifierTrainResult ref =
      stage("train-ref", [&] { return train_classifier(noisy, ref_cfg); });
  write_dynamics(ref.dynamics, out_dir / "source_dynamics.csv");
  save_classifier(ref.model, out_dir / "ref_model.json");
  write_losses(ref.epoch_losses, out_dir / "ref_losses.csv");

  DetectorTrainConfig det_cfg = config.detector_config;
  det_cfg.seed = derive_seed(config.seed, "detector");
  DetectorTrainResult det =
      stage("train-detector", [&] { return train_detector(ref.dynamics, det_cfg); });
  save_detector(det.model, out_dir / "detector.json");
  write_losses(det.epoch_losses, out_dir / "detector_losses.csv");

  BlobSpec target_spec = config.target_blobs ? *config.target_blobs : config.blobs;
  target_spec.seed = derive_seed(config.seed, "target_blobs");
  const BlobData target = stage("target-synth", [&] { return make_blobs(target_spec); });
  write_dataset(target.test, out_dir / "target_test.csv");
  const LabeledDataset target_noisy = stage("target-corrupt", [&] {
    NoiseSpec spec = config.target_noise;
    spec.seed = derive_seed(config.seed, "target_noise");
    return inject_noise(target.train, spec);
  });
  write_dataset(target_noisy, out_dir / "target_noisy.csv");
  TrainConfig target_ref_cfg =
      config.target_ref_config ? *config.target_ref_config : config.ref_config;
  target_ref_cfg.seed = derive_seed(config.seed, "target_ref");
  ClassifierTrainResult target_ref = stage(
      "target-train-ref", [&] { return train_classifier(target_noisy, target_ref_cfg); });
  write_dynamics(target_ref.dynamics, out_dir / "target_dynamics.csv");
  save_classifier(target_ref.model, out_dir / "target_ref_model.json");

  IdentificationResult out;
  out.scores = stage("score", [&] { return score(det.model, target_ref.dynamics); });
  out.baseline_scores =
      stage("score", [&] { return baseline_score(target_ref.dynamics); });
  write_scores(target_ref.dynamics, out.scores, out.baseline_scores,
               out_dir / "scores.csv");

  stage("eval", [&] {
    out.detector_report = evaluate(out.scores, target_ref.dynamics.flags);
    out.baseline_report = evaluate(out.baseline_scores, target_ref.dynamics.flags);
    return 0;
  });
  const std::vector<ReportRow> rows = {
      {"detector", to_string(config.target_noise.kind), config.target_noise.ratio,
       out.detector_report},
      {"baseline", to_string(config.target_noise.kind), config.target_noise.ratio,
       out.baseline_report},
  };
  write_report(rows, out_dir / "report.csv");

  out.detector = std::move(det.model);
  out.target_dynamics = std::move(target_ref.dynamics);
  return out;
}

RetrainReport exclude_and_retrain(const LabeledDataset& train, const LabeledDataset& test,
                                  std::span<const double> scores,
                                  const TrainConfig& ref_config, double threshold,
                                  double top_k_percent) {
  if (scores.size() != train.size()) {
    throw std::invalid_argument("scores/train size mismatch");
  }
  if (!train.has_flags()) {
    throw std::invalid_argument("train set needs flags for the oracle arm");
  }
  train.validate();
  ref_config.validate();

  const std::size_t n = train.size();
  std::vector<char> keep_cleaned(n, 1);
  if (top_k_percent >= 0.0) {
    if (top_k_percent > 100.0) {
      throw std::invalid_argument("top_k_percent must lie in [0, 100]");
    }
    const auto k = static_cast<std::size_t>(
        std::floor(top_k_percent / 100.0 * static_cast<double>(n)));
    const auto order = rank_by_score(scores);
    for (std::size_t i = 0; i < k; ++i) keep_cleaned[order[i]] = 0;
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (scores[i] > threshold) keep_cleaned[i] = 0;
    }
  }
  std::vector<char> keep_oracle(n, 1);
  for (std::size_t i = 0; i < n; ++i) keep_oracle[i] = train.flags[i] ? 0 : 1;

  RetrainReport report;
  report.excluded =
      n - static_cast<std::size_t>(std::count(keep_cleaned.begin(), keep_cleaned.end(), 1));

  report.standard_acc = train_arm(train, test, ref_config);

  const LabeledDataset cleaned = subset(train, keep_cleaned);
  TrainConfig cleaned_cfg = ref_config;
  cleaned_cfg.batch_size = shrunk_batch(ref_config.batch_size, cleaned.size(), n);
  report.cleaned_acc = train_arm(cleaned, test, cleaned_cfg);

  const LabeledDataset oracle = subset(train, keep_oracle);
  TrainConfig oracle_cfg = ref_config;
  oracle_cfg.batch_size = shrunk_batch(ref_config.batch_size, oracle.size(), n);
  report.oracle_acc = train_arm(oracle, test, oracle_cfg);
  return report;
}

DebugReport debug_dataset(const LabeledDataset& train, const LabeledDataset& test,
                          std::span<const double> scores, const DebugPlan& plan,
                          const TrainConfig& ref_config,
                          const ClassifierModel* pseudo_model) {
  if (scores.size() != train.size()) {
    throw std::invalid_argument("scores/train size mismatch");
  }
  if (!(plan.fraction > 0.0 && plan.fraction <= 1.0)) {
    throw std::invalid_argument("debug fraction must lie in (0, 1]");
  }
  train.validate();
  ref_config.validate();
  if (plan.mode == CorrectionMode::oracle && !train.has_true_labels()) {
    throw std::invalid_argument("oracle correction needs true labels");
  }
  if (plan.mode == CorrectionMode::pseudo_label) {
    if (pseudo_model == nullptr) {
      throw std::invalid_argument("pseudo_label correction needs a retrained classifier");
    }
    if (pseudo_model->input_dim != train.feature_dim ||
        pseudo_model->num_classes != train.num_classes) {
      throw std::invalid_argument("pseudo-label classifier does not match the dataset");
    }
  }

  const auto n_top = static_cast<std::size_t>(
      std::floor(plan.fraction * static_cast<double>(train.size())));
  const auto order = rank_by_score(scores);

  DebugReport report;
  report.corrected = train;
  report.corrected_count = n_top;
  for (std::size_t i = 0; i < n_top; ++i) {
    const std::size_t row = order[i];
    report.corrected.given_labels[row] =
        (plan.mode == CorrectionMode::oracle)
            ? train.true_labels[row]
            : pseudo_model->predict(train.sample(row));
    if (report.corrected.has_true_labels() && report.corrected.has_flags()) {
      report.corrected.flags[row] =
          report.corrected.given_labels[row] != report.corrected.true_labels[row] ? 1 : 0;
    }
  }

  report.uncorrected_acc = train_arm(train, test, ref_config);
  report.corrected_acc = train_arm(report.corrected, test, ref_config);
  return report;
}

}  // namespace traindyn
