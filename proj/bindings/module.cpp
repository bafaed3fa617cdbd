#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "traindyn/classifier.hpp"
#include "traindyn/dataset.hpp"
#include "traindyn/detector.hpp"
#include "traindyn/dynamics.hpp"
#include "traindyn/explain.hpp"
#include "traindyn/metrics.hpp"
#include "traindyn/noise.hpp"
#include "traindyn/pipeline.hpp"

namespace py = pybind11;
using namespace traindyn;

namespace {

std::vector<std::size_t> all_rows(std::size_t n) {
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  return rows;
}

}  // namespace

PYBIND11_MODULE(_traindyn, m) {
  m.doc() = "Mislabel detection from training dynamics";

  py::class_<LabeledDataset>(m, "LabeledDataset")
      .def(py::init<>())
      .def_readwrite("num_classes", &LabeledDataset::num_classes)
      .def_readwrite("feature_dim", &LabeledDataset::feature_dim)
      .def_readwrite("features", &LabeledDataset::features)
      .def_readwrite("given_labels", &LabeledDataset::given_labels)
      .def_readwrite("true_labels", &LabeledDataset::true_labels)
      .def_readwrite("flags", &LabeledDataset::flags)
      .def_readwrite("underlying_flags", &LabeledDataset::underlying_flags)
      .def("__len__", &LabeledDataset::size)
      .def("validate", &LabeledDataset::validate);

  m.def("read_dataset", &read_dataset, py::arg("path"));
  m.def("write_dataset", &write_dataset, py::arg("dataset"), py::arg("path"));

  py::class_<DynamicsTable>(m, "DynamicsTable")
      .def(py::init<>())
      .def_readwrite("num_epochs", &DynamicsTable::num_epochs)
      .def_readwrite("values", &DynamicsTable::values)
      .def_readwrite("labels", &DynamicsTable::labels)
      .def_readwrite("true_labels", &DynamicsTable::true_labels)
      .def_readwrite("flags", &DynamicsTable::flags)
      .def_readwrite("metadata", &DynamicsTable::metadata)
      .def("num_samples", &DynamicsTable::num_samples)
      .def("row",
           [](const DynamicsTable& t, std::size_t i) {
             auto r = t.row(i);
             return std::vector<double>(r.begin(), r.end());
           },
           py::arg("i"))
      .def("validate", &DynamicsTable::validate);

  m.def("resample_sequence",
        [](const std::vector<double>& seq, int target_len) {
          return resample_sequence(seq, target_len);
        },
        py::arg("seq"), py::arg("target_len"));
  m.def("read_dynamics", &read_dynamics, py::arg("path"));
  m.def("write_dynamics", &write_dynamics, py::arg("table"), py::arg("path"));

  py::class_<BlobSpec>(m, "BlobSpec")
      .def(py::init<>())
      .def_readwrite("num_classes", &BlobSpec::num_classes)
      .def_readwrite("per_class", &BlobSpec::per_class)
      .def_readwrite("dim", &BlobSpec::dim)
      .def_readwrite("separation", &BlobSpec::separation)
      .def_readwrite("label_overlap_fraction", &BlobSpec::label_overlap_fraction)
      .def_readwrite("seed", &BlobSpec::seed)
      .def("validate", &BlobSpec::validate)
      .def("to_json", &BlobSpec::to_json_string)
      .def_static("from_json", &BlobSpec::from_json_string, py::arg("text"));

  py::class_<BlobData>(m, "BlobData")
      .def_readwrite("train", &BlobData::train)
      .def_readwrite("test", &BlobData::test)
      .def_readwrite("centers", &BlobData::centers);

  m.def("make_blobs", py::overload_cast<const BlobSpec&>(&make_blobs), py::arg("spec"));

  py::enum_<NoiseKind>(m, "NoiseKind")
      .value("symmetric", NoiseKind::symmetric)
      .value("asymmetric", NoiseKind::asymmetric)
      .value("superclass", NoiseKind::superclass);

  py::class_<NoiseSpec>(m, "NoiseSpec")
      .def(py::init<>())
      .def_readwrite("kind", &NoiseSpec::kind)
      .def_readwrite("ratio", &NoiseSpec::ratio)
      .def_readwrite("class_to_group", &NoiseSpec::class_to_group)
      .def_readwrite("class_permutation", &NoiseSpec::class_permutation)
      .def_readwrite("seed", &NoiseSpec::seed)
      .def_readwrite("allow_true_class_redraw", &NoiseSpec::allow_true_class_redraw)
      .def("validate", &NoiseSpec::validate, py::arg("num_classes"))
      .def("to_json", &NoiseSpec::to_json_string)
      .def_static("from_json", &NoiseSpec::from_json_string, py::arg("text"));

  m.def("inject_noise", &inject_noise, py::arg("dataset"), py::arg("spec"));
  m.def("contaminate_twice", &contaminate_twice, py::arg("dataset"), py::arg("underlying"),
        py::arg("synthesized"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &TrainConfig::epochs)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("momentum", &TrainConfig::momentum)
      .def_readwrite("weight_decay", &TrainConfig::weight_decay)
      .def_readwrite("lr_drop_epochs", &TrainConfig::lr_drop_epochs)
      .def_readwrite("lr_drop_factor", &TrainConfig::lr_drop_factor)
      .def_readwrite("hidden_size", &TrainConfig::hidden_size)
      .def_readwrite("seed", &TrainConfig::seed)
      .def("validate", &TrainConfig::validate)
      .def("to_json", &TrainConfig::to_json_string)
      .def_static("from_json", &TrainConfig::from_json_string, py::arg("text"));

  py::class_<ClassifierModel>(m, "ClassifierModel")
      .def_static("init", &ClassifierModel::init, py::arg("input_dim"), py::arg("hidden_size"),
                  py::arg("num_classes"), py::arg("seed"))
      .def_readwrite("input_dim", &ClassifierModel::input_dim)
      .def_readwrite("hidden_size", &ClassifierModel::hidden_size)
      .def_readwrite("num_classes", &ClassifierModel::num_classes)
      .def_readwrite("params", &ClassifierModel::params)
      .def("num_params", &ClassifierModel::num_params)
      .def("probabilities",
           [](const ClassifierModel& model, const std::vector<double>& x) {
             return model.probabilities(x);
           },
           py::arg("x"))
      .def("predict",
           [](const ClassifierModel& model, const std::vector<double>& x) {
             return model.predict(x);
           },
           py::arg("x"));

  py::class_<ClassifierTrainResult>(m, "ClassifierTrainResult")
      .def_readwrite("model", &ClassifierTrainResult::model)
      .def_readwrite("dynamics", &ClassifierTrainResult::dynamics)
      .def_readwrite("epoch_losses", &ClassifierTrainResult::epoch_losses);

  m.def("train_classifier", &train_classifier, py::arg("dataset"), py::arg("config"));
  m.def("classifier_loss_and_grad",
        [](const ClassifierModel& model, const LabeledDataset& dataset) {
          return classifier_loss_and_grad(model, dataset, all_rows(dataset.size()));
        },
        py::arg("model"), py::arg("dataset"));
  m.def("evaluate_classifier", &evaluate_classifier, py::arg("model"), py::arg("test"));
  m.def("save_classifier", &save_classifier, py::arg("model"), py::arg("path"));
  m.def("load_classifier", &load_classifier, py::arg("path"));

  py::class_<DetectorTrainConfig>(m, "DetectorTrainConfig")
      .def(py::init<>())
      .def_readwrite("epochs", &DetectorTrainConfig::epochs)
      .def_readwrite("learning_rate", &DetectorTrainConfig::learning_rate)
      .def_readwrite("batch_size", &DetectorTrainConfig::batch_size)
      .def_readwrite("beta1", &DetectorTrainConfig::beta1)
      .def_readwrite("beta2", &DetectorTrainConfig::beta2)
      .def_readwrite("epsilon", &DetectorTrainConfig::epsilon)
      .def_readwrite("weight_decay", &DetectorTrainConfig::weight_decay)
      .def_readwrite("clip_norm", &DetectorTrainConfig::clip_norm)
      .def_readwrite("seed", &DetectorTrainConfig::seed)
      .def("validate", &DetectorTrainConfig::validate, py::arg("fine_tuning") = false)
      .def("to_json", &DetectorTrainConfig::to_json_string)
      .def_static("from_json", &DetectorTrainConfig::from_json_string, py::arg("text"));

  py::class_<DetectorModel>(m, "DetectorModel")
      .def_static("init", &DetectorModel::init, py::arg("input_len"), py::arg("seed"),
                  py::arg("num_layers") = 2, py::arg("hidden_size") = 64)
      .def_readwrite("num_layers", &DetectorModel::num_layers)
      .def_readwrite("hidden_size", &DetectorModel::hidden_size)
      .def_readwrite("input_len", &DetectorModel::input_len)
      .def_readwrite("params", &DetectorModel::params)
      .def("num_params", &DetectorModel::num_params);

  py::class_<DetectorTrainResult>(m, "DetectorTrainResult")
      .def_readwrite("model", &DetectorTrainResult::model)
      .def_readwrite("epoch_losses", &DetectorTrainResult::epoch_losses);

  m.def("detector_forward",
        [](const DetectorModel& model, const std::vector<double>& seq) {
          return detector_forward(model, seq);
        },
        py::arg("model"), py::arg("seq"));
  m.def("train_detector", &train_detector, py::arg("table"), py::arg("config"));
  m.def("fine_tune", &fine_tune, py::arg("model"), py::arg("table"), py::arg("config"));
  m.def("score", &score, py::arg("model"), py::arg("table"));
  m.def("baseline_score", &baseline_score, py::arg("table"));
  m.def("save_detector", &save_detector, py::arg("model"), py::arg("path"));
  m.def("load_detector", &load_detector, py::arg("path"));

  py::class_<EvalReport>(m, "EvalReport")
      .def(py::init<>())
      .def_readwrite("map", &EvalReport::map)
      .def_readwrite("roc_auc", &EvalReport::roc_auc)
      .def_readwrite("precision_at_95", &EvalReport::precision_at_95);

  m.def("average_precision",
        [](const std::vector<double>& scores, const std::vector<int>& flags) {
          return average_precision(scores, flags);
        },
        py::arg("scores"), py::arg("flags"));
  m.def("roc_auc",
        [](const std::vector<double>& scores, const std::vector<int>& flags) {
          return roc_auc(scores, flags);
        },
        py::arg("scores"), py::arg("flags"));
  m.def("precision_at_recall",
        [](const std::vector<double>& scores, const std::vector<int>& flags, double target) {
          return precision_at_recall(scores, flags, target);
        },
        py::arg("scores"), py::arg("flags"), py::arg("target") = 0.95);
  m.def("evaluate",
        [](const std::vector<double>& scores, const std::vector<int>& flags) {
          return evaluate(scores, flags);
        },
        py::arg("scores"), py::arg("flags"));

  py::class_<Explanation>(m, "Explanation")
      .def_readwrite("epoch_importances", &Explanation::epoch_importances)
      .def_readwrite("intercept", &Explanation::intercept)
      .def_readwrite("fidelity", &Explanation::fidelity)
      .def_readwrite("ridge_fallback", &Explanation::ridge_fallback);

  m.def("explain_instance",
        [](const DetectorModel& model, const std::vector<double>& seq, int num_perturbations,
           double kernel_width, std::uint64_t seed) {
          return explain_instance(model, seq, num_perturbations, kernel_width, seed);
        },
        py::arg("model"), py::arg("seq"), py::arg("num_perturbations") = 1000,
        py::arg("kernel_width") = 0.0, py::arg("seed") = 0);
  m.def("write_explanation", &write_explanation, py::arg("explanation"), py::arg("path"));

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("blobs", &PipelineConfig::blobs)
      .def_readwrite("source_noise", &PipelineConfig::source_noise)
      .def_readwrite("underlying_noise", &PipelineConfig::underlying_noise)
      .def_readwrite("ref_config", &PipelineConfig::ref_config)
      .def_readwrite("detector_config", &PipelineConfig::detector_config)
      .def_readwrite("target_blobs", &PipelineConfig::target_blobs)
      .def_readwrite("target_noise", &PipelineConfig::target_noise)
      .def_readwrite("target_ref_config", &PipelineConfig::target_ref_config)
      .def_readwrite("seed", &PipelineConfig::seed)
      .def("validate", &PipelineConfig::validate)
      .def("to_json", &PipelineConfig::to_json_string)
      .def_static("from_json", &PipelineConfig::from_json_string, py::arg("text"));

  py::class_<IdentificationResult>(m, "IdentificationResult")
      .def_readwrite("detector_report", &IdentificationResult::detector_report)
      .def_readwrite("baseline_report", &IdentificationResult::baseline_report)
      .def_readwrite("scores", &IdentificationResult::scores)
      .def_readwrite("baseline_scores", &IdentificationResult::baseline_scores)
      .def_readwrite("detector", &IdentificationResult::detector)
      .def_readwrite("target_dynamics", &IdentificationResult::target_dynamics);

  m.def("run_identification", &run_identification, py::arg("config"), py::arg("out_dir"));

  py::class_<RetrainReport>(m, "RetrainReport")
      .def_readwrite("standard_acc", &RetrainReport::standard_acc)
      .def_readwrite("cleaned_acc", &RetrainReport::cleaned_acc)
      .def_readwrite("oracle_acc", &RetrainReport::oracle_acc)
      .def_readwrite("excluded", &RetrainReport::excluded);

  m.def("exclude_and_retrain",
        [](const LabeledDataset& train, const LabeledDataset& test,
           const std::vector<double>& scores, const TrainConfig& ref_config, double threshold,
           double top_k_percent) {
          return exclude_and_retrain(train, test, scores, ref_config, threshold, top_k_percent);
        },
        py::arg("train"), py::arg("test"), py::arg("scores"), py::arg("ref_config"),
        py::arg("threshold") = 0.5, py::arg("top_k_percent") = -1.0);

  py::enum_<CorrectionMode>(m, "CorrectionMode")
      .value("oracle", CorrectionMode::oracle)
      .value("pseudo_label", CorrectionMode::pseudo_label);

  py::class_<DebugPlan>(m, "DebugPlan")
      .def(py::init<>())
      .def_readwrite("fraction", &DebugPlan::fraction)
      .def_readwrite("mode", &DebugPlan::mode);

  py::class_<DebugReport>(m, "DebugReport")
      .def_readwrite("corrected", &DebugReport::corrected)
      .def_readwrite("uncorrected_acc", &DebugReport::uncorrected_acc)
      .def_readwrite("corrected_acc", &DebugReport::corrected_acc)
      .def_readwrite("corrected_count", &DebugReport::corrected_count);

  m.def("debug_dataset",
        [](const LabeledDataset& train, const LabeledDataset& test,
           const std::vector<double>& scores, const DebugPlan& plan, const TrainConfig& ref_config,
           const std::optional<ClassifierModel>& pseudo_model) {
          return debug_dataset(train, test, scores, plan, ref_config,
                               pseudo_model ? &*pseudo_model : nullptr);
        },
        py::arg("train"), py::arg("test"), py::arg("scores"), py::arg("plan"),
        py::arg("ref_config"), py::arg("pseudo_model") = std::nullopt);
}
