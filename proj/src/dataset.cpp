#include "traindyn/dataset.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "csv.hpp"
#include "traindyn/dynamics.hpp"

namespace traindyn {

void LabeledDataset::validate() const {
  if (num_classes < 1) throw std::invalid_argument("dataset num_classes must be positive");
  const std::size_t n = size();
  if (features.size() != n * static_cast<std::size_t>(feature_dim)) {
    throw std::invalid_argument("feature buffer does not match num_samples x feature_dim");
  }
  for (int y : given_labels) {
    if (y < 0 || y >= num_classes) throw std::invalid_argument("given label out of range");
  }
  if (!true_labels.empty()) {
    if (true_labels.size() != n) throw std::invalid_argument("true_labels size mismatch");
    for (int y : true_labels) {
      if (y < 0 || y >= num_classes) throw std::invalid_argument("true label out of range");
    }
  }
  if (!flags.empty() && flags.size() != n) throw std::invalid_argument("flags size mismatch");
  if (!underlying_flags.empty() && underlying_flags.size() != n) {
    throw std::invalid_argument("underlying_flags size mismatch");
  }
  for (int k : flags) {
    if (k != 0 && k != 1) throw std::invalid_argument("flag must be 0 or 1");
  }
  if (!flags.empty() && !true_labels.empty()) {
    for (std::size_t i = 0; i < n; ++i) {
      const int expected = given_labels[i] != true_labels[i] ? 1 : 0;
      if (flags[i] != expected) {
        throw std::invalid_argument("flag does not match label change at sample " +
                                    std::to_string(i));
      }
    }
  }
}

void write_dataset(const LabeledDataset& dataset, const std::filesystem::path& path) {
  dataset.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "sample_id,given_label,true_label,flag,underlying_flag";
  for (int j = 0; j < dataset.feature_dim; ++j) out << ",x_" << j;
  out << "\n";
  const std::size_t n = dataset.size();
  for (std::size_t i = 0; i < n; ++i) {
    out << i << ',' << dataset.given_labels[i] << ','
        << (dataset.has_true_labels() ? dataset.true_labels[i] : -1) << ','
        << (dataset.has_flags() ? dataset.flags[i] : -1) << ','
        << (dataset.has_underlying_flags() ? dataset.underlying_flags[i] : -1);
    for (double v : dataset.sample(i)) out << ',' << csv::format_exact(v);
    out << "\n";
  }
  out.close();
  if (!out) throw std::runtime_error("write failed: " + path.string());

  nlohmann::json meta;
  meta["num_classes"] = dataset.num_classes;
  meta["dim"] = dataset.feature_dim;
  meta["num_samples"] = n;
  std::ofstream mout(meta_sidecar_path(path), std::ios::binary);
  mout << meta.dump(2) << "\n";
}

LabeledDataset read_dataset(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) csv::fail(path, 1, 1, "empty file");
  const auto header = csv::split_fields(lines[0]);
  const std::vector<std::string> fixed = {"sample_id", "given_label", "true_label", "flag",
                                          "underlying_flag"};
  for (std::size_t c = 0; c < fixed.size(); ++c) {
    if (c >= header.size() || header[c] != fixed[c]) {
      csv::fail(path, 1, c + 1, "malformed header, expected '" + fixed[c] + "'");
    }
  }
  int dim = 0;
  for (std::size_t c = fixed.size(); c < header.size(); ++c) {
    const std::string expected = "x_" + std::to_string(c - fixed.size());
    if (header[c] != expected) {
      csv::fail(path, 1, c + 1, "malformed header, expected '" + expected + "'");
    }
    ++dim;
  }
  if (dim < 1) csv::fail(path, 1, fixed.size() + 1, "need at least one feature column");

  LabeledDataset ds;
  ds.feature_dim = dim;
  bool any_true = false;
  bool any_flag = false;
  bool any_underlying = false;
  std::vector<int> true_labels;
  std::vector<int> flags;
  std::vector<int> underlying;

  const std::size_t ncols = header.size();
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = csv::split_fields(lines[li]);
    if (fields.size() != ncols) {
      csv::fail(path, li + 1, fields.size(),
                "row has " + std::to_string(fields.size()) + " fields, expected " +
                    std::to_string(ncols));
    }
    if (csv::parse_int(fields[0], path, li + 1, 1) != static_cast<long>(li - 1)) {
      csv::fail(path, li + 1, 1, "sample ids must be contiguous from 0");
    }
    ds.given_labels.push_back(static_cast<int>(csv::parse_int(fields[1], path, li + 1, 2)));
    const int tl = static_cast<int>(csv::parse_int(fields[2], path, li + 1, 3));
    const int fl = static_cast<int>(csv::parse_int(fields[3], path, li + 1, 4));
    const int ul = static_cast<int>(csv::parse_int(fields[4], path, li + 1, 5));
    true_labels.push_back(tl);
    flags.push_back(fl);
    underlying.push_back(ul);
    any_true |= tl >= 0;
    any_flag |= fl >= 0;
    any_underlying |= ul >= 0;
    for (std::size_t c = 5; c < ncols; ++c) {
      ds.features.push_back(csv::parse_double(fields[c], path, li + 1, c + 1));
    }
  }
  if (any_true) ds.true_labels = std::move(true_labels);
  if (any_flag) ds.flags = std::move(flags);
  if (any_underlying) ds.underlying_flags = std::move(underlying);

  const auto meta_path = meta_sidecar_path(path);
  if (!std::filesystem::exists(meta_path)) {
    throw ParseError(meta_path.string() + ": dataset sidecar not found (needed for num_classes)");
  }
  std::ifstream min(meta_path);
  nlohmann::json meta = nlohmann::json::parse(min, nullptr, false);
  if (meta.is_discarded() || !meta.contains("num_classes")) {
    throw ParseError(meta_path.string() + ": invalid sidecar, expected a num_classes field");
  }
  ds.num_classes = meta["num_classes"].get<int>();
  ds.validate();
  return ds;
}

}  // namespace traindyn
