// Subcommand CLI over the training-dynamics toolkit. Every command reads its
// JSON config (or a documented default), writes CSV/JSON/SVG artifacts into
// --out, and exits 0 on success, 2 on invalid config, 3 on numerical
// divergence, 4 on an undefined metric.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "csv.hpp"
#include "json.hpp"
#include "traindyn/classifier.hpp"
#include "traindyn/detector.hpp"
#include "traindyn/dynamics.hpp"
#include "traindyn/errors.hpp"
#include "traindyn/explain.hpp"
#include "traindyn/metrics.hpp"
#include "traindyn/noise.hpp"
#include "traindyn/pipeline.hpp"
#include "traindyn/plot.hpp"
#include "traindyn/rng.hpp"

namespace fs = std::filesystem;
using namespace traindyn;

namespace {

std::string read_text_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("cannot open " + path.string());
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

struct ScoresFile {
  std::vector<double> scores;
  std::vector<double> baseline;
  std::vector<int> flags;  // -1 when unknown
};

ScoresFile read_scores(const fs::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty() || lines[0] != "sample_id,score,baseline,flag") {
    throw ParseError(path.string() + ": expected header sample_id,score,baseline,flag");
  }
  ScoresFile out;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = csv::split_fields(lines[i]);
    if (fields.size() != 4) csv::fail(path, i + 1, 1, "expected 4 fields");
    out.scores.push_back(csv::parse_double(fields[1], path, i + 1, 2));
    out.baseline.push_back(csv::parse_double(fields[2], path, i + 1, 3));
    out.flags.push_back(static_cast<int>(csv::parse_int(fields[3], path, i + 1, 4)));
  }
  return out;
}

std::vector<int> known_flags(const ScoresFile& file, const fs::path& path) {
  for (int f : file.flags) {
    if (f != 0 && f != 1) {
      throw std::invalid_argument(path.string() + " carries no flags; evaluation needs them");
    }
  }
  return file.flags;
}

fs::path ensure_out_dir(const std::string& out) {
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

void report_written(const fs::path& path) { std::cout << "wrote " << path.string() << '\n'; }

int run_synth(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out) {
  BlobSpec spec;
  if (!config_path.empty()) spec = BlobSpec::from_json_string(read_text_file(config_path));
  if (seed) spec.seed = *seed;
  const fs::path dir = ensure_out_dir(out);
  const BlobData blobs = make_blobs(spec);
  write_dataset(blobs.train, dir / "train.csv");
  write_dataset(blobs.test, dir / "test.csv");
  report_written(dir / "train.csv");
  report_written(dir / "test.csv");
  return 0;
}

int run_corrupt(const std::string& config_path, const std::string& data_path,
                std::optional<std::uint64_t> seed, const std::string& out) {
  if (config_path.empty()) throw std::invalid_argument("corrupt needs --config (a noise spec)");
  if (data_path.empty()) throw std::invalid_argument("corrupt needs --data (a dataset CSV)");
  const LabeledDataset clean = read_dataset(data_path);

  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(config_path));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("noise config: ") + e.what());
  }
  LabeledDataset noisy;
  if (j.contains("synthesized") || j.contains("underlying")) {
    if (!j.contains("synthesized") || !j.contains("underlying")) {
      throw std::invalid_argument(
          "twice-contamination config needs both 'underlying' and 'synthesized'");
    }
    NoiseSpec underlying = NoiseSpec::from_json_string(j.at("underlying").dump());
    NoiseSpec synthesized = NoiseSpec::from_json_string(j.at("synthesized").dump());
    if (seed) {
      underlying.seed = derive_seed(*seed, "underlying");
      synthesized.seed = derive_seed(*seed, "synthesized");
    }
    noisy = contaminate_twice(clean, underlying, synthesized);
  } else {
    NoiseSpec spec = NoiseSpec::from_json_string(j.dump());
    if (seed) spec.seed = *seed;
    noisy = inject_noise(clean, spec);
  }
  const fs::path dir = ensure_out_dir(out);
  write_dataset(noisy, dir / "noisy.csv");
  report_written(dir / "noisy.csv");
  return 0;
}

int run_train_ref(const std::string& config_path, const std::string& data_path,
                  std::optional<std::uint64_t> seed, const std::string& out) {
  if (data_path.empty()) throw std::invalid_argument("train-ref needs --data (a dataset CSV)");
  TrainConfig config;
  if (!config_path.empty()) config = TrainConfig::from_json_string(read_text_file(config_path));
  if (seed) config.seed = *seed;
  const LabeledDataset data = read_dataset(data_path);
  const ClassifierTrainResult result = train_classifier(data, config);
  const fs::path dir = ensure_out_dir(out);
  write_dynamics(result.dynamics, dir / "dynamics.csv");
  save_classifier(result.model, dir / "ref_model.json");
  write_losses(result.epoch_losses, dir / "ref_losses.csv");
  report_written(dir / "dynamics.csv");
  report_written(dir / "ref_model.json");
  return 0;
}

int run_train_detector(const std::string& config_path, const std::string& dynamics_path,
                       std::optional<std::uint64_t> seed, const std::string& out) {
  if (dynamics_path.empty()) {
    throw std::invalid_argument("train-detector needs --dynamics (a dynamics CSV)");
  }
  DetectorTrainConfig config;
  if (!config_path.empty()) {
    config = DetectorTrainConfig::from_json_string(read_text_file(config_path));
  }
  if (seed) config.seed = *seed;
  const DynamicsTable table = read_dynamics(dynamics_path);
  const DetectorTrainResult result = train_detector(table, config);
  const fs::path dir = ensure_out_dir(out);
  save_detector(result.model, dir / "detector.json");
  write_losses(result.epoch_losses, dir / "detector_losses.csv");
  report_written(dir / "detector.json");
  return 0;
}

int run_finetune(const std::string& config_path, const std::string& model_path,
                 const std::string& dynamics_path, std::optional<std::uint64_t> seed,
                 const std::string& out) {
  if (model_path.empty()) throw std::invalid_argument("finetune needs --model");
  if (dynamics_path.empty()) throw std::invalid_argument("finetune needs --dynamics");
  DetectorTrainConfig config;
  config.learning_rate = 0.03;
  if (!config_path.empty()) {
    config = DetectorTrainConfig::from_json_string(read_text_file(config_path));
  }
  if (seed) config.seed = *seed;
  const DetectorModel model = load_detector(model_path);
  const DynamicsTable table = read_dynamics(dynamics_path);
  const DetectorTrainResult result = fine_tune(model, table, config);
  const fs::path dir = ensure_out_dir(out);
  save_detector(result.model, dir / "detector.json");
  write_losses(result.epoch_losses, dir / "detector_losses.csv");
  report_written(dir / "detector.json");
  return 0;
}

int run_score(const std::string& model_path, const std::string& dynamics_path,
              const std::string& out) {
  if (model_path.empty()) throw std::invalid_argument("score needs --model");
  if (dynamics_path.empty()) throw std::invalid_argument("score needs --dynamics");
  const DetectorModel model = load_detector(model_path);
  const DynamicsTable table = read_dynamics(dynamics_path);
  const std::vector<double> scores = score(model, table);
  const std::vector<double> baseline = baseline_score(table);
  const fs::path dir = ensure_out_dir(out);
  write_scores(table, scores, baseline, dir / "scores.csv");
  report_written(dir / "scores.csv");
  return 0;
}

int run_eval(const std::string& scores_path, const std::string& noise_kind, double noise_ratio,
             const std::string& out) {
  if (scores_path.empty()) throw std::invalid_argument("eval needs --scores");
  const ScoresFile file = read_scores(scores_path);
  const std::vector<int> flags = known_flags(file, scores_path);
  double realized = 0.0;
  for (int f : flags) realized += f;
  if (!flags.empty()) realized /= static_cast<double>(flags.size());
  const double ratio = noise_ratio >= 0.0 ? noise_ratio : realized;

  const std::vector<ReportRow> rows = {
      {"detector", noise_kind, ratio, evaluate(file.scores, flags)},
      {"baseline", noise_kind, ratio, evaluate(file.baseline, flags)},
  };
  const fs::path dir = ensure_out_dir(out);
  write_report(rows, dir / "report.csv");
  report_written(dir / "report.csv");
  std::cout << "detector map=" << rows[0].metrics.map << " auc=" << rows[0].metrics.roc_auc
            << " p@95=" << rows[0].metrics.precision_at_95 << '\n';
  std::cout << "baseline map=" << rows[1].metrics.map << " auc=" << rows[1].metrics.roc_auc
            << " p@95=" << rows[1].metrics.precision_at_95 << '\n';
  return 0;
}

int run_exclude_retrain(const std::string& config_path, const std::string& data_path,
                        const std::string& test_path, const std::string& scores_path,
                        double threshold, double top_k_percent,
                        std::optional<std::uint64_t> seed, const std::string& out) {
  if (data_path.empty() || test_path.empty() || scores_path.empty()) {
    throw std::invalid_argument("exclude-retrain needs --data, --test and --scores");
  }
  TrainConfig config;
  if (!config_path.empty()) config = TrainConfig::from_json_string(read_text_file(config_path));
  if (seed) config.seed = *seed;
  const LabeledDataset train = read_dataset(data_path);
  const LabeledDataset test = read_dataset(test_path);
  const ScoresFile file = read_scores(scores_path);
  const RetrainReport report =
      exclude_and_retrain(train, test, file.scores, config, threshold, top_k_percent);

  std::size_t flagged = 0;
  for (int f : train.flags) flagged += f != 0;
  const fs::path dir = ensure_out_dir(out);
  const fs::path path = dir / "retrain.csv";
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << "arm,test_accuracy,excluded\n";
  f << "standard," << csv::format_exact(report.standard_acc) << ",0\n";
  f << "cleaned," << csv::format_exact(report.cleaned_acc) << ',' << report.excluded << '\n';
  f << "oracle," << csv::format_exact(report.oracle_acc) << ',' << flagged << '\n';
  report_written(path);
  std::cout << "standard=" << report.standard_acc << " cleaned=" << report.cleaned_acc
            << " oracle=" << report.oracle_acc << '\n';
  return 0;
}

int run_debug(const std::string& config_path, const std::string& data_path,
              const std::string& test_path, const std::string& scores_path, double fraction,
              const std::string& mode, const std::string& pseudo_model_path,
              std::optional<std::uint64_t> seed, const std::string& out) {
  if (data_path.empty() || test_path.empty() || scores_path.empty()) {
    throw std::invalid_argument("debug needs --data, --test and --scores");
  }
  TrainConfig config;
  if (!config_path.empty()) config = TrainConfig::from_json_string(read_text_file(config_path));
  if (seed) config.seed = *seed;
  DebugPlan plan;
  plan.fraction = fraction;
  if (mode == "oracle") {
    plan.mode = CorrectionMode::oracle;
  } else if (mode == "pseudo_label") {
    plan.mode = CorrectionMode::pseudo_label;
  } else {
    throw std::invalid_argument("unknown correction mode '" + mode + "'");
  }
  const LabeledDataset train = read_dataset(data_path);
  const LabeledDataset test = read_dataset(test_path);
  const ScoresFile file = read_scores(scores_path);
  std::optional<ClassifierModel> pseudo;
  if (!pseudo_model_path.empty()) pseudo = load_classifier(pseudo_model_path);
  const DebugReport report = debug_dataset(train, test, file.scores, plan, config,
                                           pseudo ? &*pseudo : nullptr);

  const fs::path dir = ensure_out_dir(out);
  write_dataset(report.corrected, dir / "corrected.csv");
  const fs::path path = dir / "debug_report.csv";
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << "arm,test_accuracy,corrected\n";
  f << "uncorrected," << csv::format_exact(report.uncorrected_acc) << ",0\n";
  f << "corrected," << csv::format_exact(report.corrected_acc) << ',' << report.corrected_count
    << '\n';
  report_written(dir / "corrected.csv");
  report_written(path);
  std::cout << "uncorrected=" << report.uncorrected_acc
            << " corrected=" << report.corrected_acc << '\n';
  return 0;
}

int run_explain(const std::string& model_path, const std::string& dynamics_path,
                std::size_t row, int perturbations, double kernel_width,
                std::optional<std::uint64_t> seed, const std::string& out) {
  if (model_path.empty()) throw std::invalid_argument("explain needs --model");
  if (dynamics_path.empty()) throw std::invalid_argument("explain needs --dynamics");
  const DetectorModel model = load_detector(model_path);
  const DynamicsTable table = read_dynamics(dynamics_path);
  if (row >= table.num_samples()) {
    throw std::invalid_argument("row " + std::to_string(row) + " out of range (" +
                                std::to_string(table.num_samples()) + " samples)");
  }
  std::vector<double> seq(table.row(row).begin(), table.row(row).end());
  if (static_cast<int>(seq.size()) != model.input_len) {
    seq = resample_sequence(seq, model.input_len);
  }
  const Explanation explanation =
      explain_instance(model, seq, perturbations, kernel_width, seed.value_or(0));
  const fs::path dir = ensure_out_dir(out);
  write_explanation(explanation, dir / "explanation.csv");
  emit_explanation_plot(explanation, dir / "explanation.svg");
  report_written(dir / "explanation.csv");
  report_written(dir / "explanation.svg");
  std::cout << "fidelity=" << explanation.fidelity
            << (explanation.ridge_fallback ? " (ridge fallback)" : "") << '\n';
  return 0;
}

int run_plot(const std::string& dynamics_path, const std::string& out) {
  if (dynamics_path.empty()) throw std::invalid_argument("plot needs --dynamics");
  const DynamicsTable table = read_dynamics(dynamics_path);
  const fs::path dir = ensure_out_dir(out);
  emit_dynamics_plot(table, dir / "dynamics.svg");
  report_written(dir / "dynamics.svg");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mislabeled-sample identification from training dynamics"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed_value = 0;
  std::string out = ".";
  app.add_option("--config", config_path, "JSON config file for the subcommand");
  CLI::Option* seed_opt =
      app.add_option("--seed", seed_value, "Root seed override for the loaded config");
  app.add_option("--out", out, "Output directory (created if missing)");

  auto* synth = app.add_subcommand("synth", "Sample a Gaussian-blob dataset (train/test CSVs)");
  auto* corrupt =
      app.add_subcommand("corrupt", "Inject label noise into a dataset per a noise spec");
  auto* train_ref = app.add_subcommand(
      "train-ref", "Train the reference classifier and record its training dynamics");
  auto* train_detector =
      app.add_subcommand("train-detector", "Train the LSTM noise detector on dynamics");
  auto* finetune =
      app.add_subcommand("finetune", "Fine-tune a saved detector on new dynamics (lr 0.03)");
  auto* score_cmd =
      app.add_subcommand("score", "Score dynamics rows with a saved detector + baseline");
  auto* eval = app.add_subcommand("eval", "Evaluate a scores file against its flags");
  auto* exclude_retrain = app.add_subcommand(
      "exclude-retrain", "Retrain standard/cleaned/oracle arms after excluding suspects");
  auto* debug = app.add_subcommand(
      "debug", "Correct the top-scored labels (oracle or pseudo) and retrain");
  auto* explain =
      app.add_subcommand("explain", "Fit a local surrogate explanation for one sample");
  auto* plot = app.add_subcommand("plot", "Render mean/std dynamics curves as SVG");

  std::string data_path, test_path, scores_path, model_path, dynamics_path;
  std::string noise_kind = "unknown";
  double noise_ratio = -1.0;
  double threshold = 0.5;
  double top_k_percent = -1.0;
  double fraction = 0.1;
  std::string mode = "oracle";
  std::string pseudo_model_path;
  std::size_t row = 0;
  int perturbations = 1000;
  double kernel_width = 0.0;

  for (CLI::App* sub : {corrupt, train_ref, exclude_retrain, debug}) {
    sub->add_option("--data", data_path, "Input dataset CSV");
  }
  for (CLI::App* sub : {exclude_retrain, debug}) {
    sub->add_option("--test", test_path, "Held-out clean test CSV");
    sub->add_option("--scores", scores_path, "scores.csv from the score subcommand");
  }
  for (CLI::App* sub : {finetune, score_cmd, explain}) {
    sub->add_option("--model", model_path, "Saved detector JSON");
  }
  for (CLI::App* sub : {train_detector, finetune, score_cmd, explain, plot}) {
    sub->add_option("--dynamics", dynamics_path, "Dynamics CSV");
  }
  eval->add_option("--scores", scores_path, "scores.csv from the score subcommand");
  eval->add_option("--noise-kind", noise_kind, "Annotation column for the report");
  eval->add_option("--noise-ratio", noise_ratio,
                   "Annotation column; defaults to the realized flag fraction");
  exclude_retrain->add_option("--threshold", threshold, "Exclude samples with score > threshold");
  exclude_retrain->add_option("--top-k-percent", top_k_percent,
                              "Exclude the top k% scores instead of thresholding");
  debug->add_option("--fraction", fraction, "Top fraction of scores to correct");
  debug->add_option("--mode", mode, "Correction mode: oracle or pseudo_label");
  debug->add_option("--pseudo-model", pseudo_model_path,
                    "Classifier JSON supplying pseudo labels");
  explain->add_option("--row", row, "Sample id to explain");
  explain->add_option("--perturbations", perturbations, "Number of mask perturbations");
  explain->add_option("--kernel-width", kernel_width,
                      "Proximity kernel width; <= 0 selects 0.75*sqrt(len)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::optional<std::uint64_t> seed =
      seed_opt->count() ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
  try {
    if (app.got_subcommand(synth)) return run_synth(config_path, seed, out);
    if (app.got_subcommand(corrupt)) return run_corrupt(config_path, data_path, seed, out);
    if (app.got_subcommand(train_ref)) return run_train_ref(config_path, data_path, seed, out);
    if (app.got_subcommand(train_detector)) {
      return run_train_detector(config_path, dynamics_path, seed, out);
    }
    if (app.got_subcommand(finetune)) {
      return run_finetune(config_path, model_path, dynamics_path, seed, out);
    }
    if (app.got_subcommand(score_cmd)) return run_score(model_path, dynamics_path, out);
    if (app.got_subcommand(eval)) return run_eval(scores_path, noise_kind, noise_ratio, out);
    if (app.got_subcommand(exclude_retrain)) {
      return run_exclude_retrain(config_path, data_path, test_path, scores_path, threshold,
                                 top_k_percent, seed, out);
    }
    if (app.got_subcommand(debug)) {
      return run_debug(config_path, data_path, test_path, scores_path, fraction, mode,
                       pseudo_model_path, seed, out);
    }
    if (app.got_subcommand(explain)) {
      return run_explain(model_path, dynamics_path, row, perturbations, kernel_width, seed, out);
    }
    if (app.got_subcommand(plot)) return run_plot(dynamics_path, out);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const UndefinedMetricError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
