#include "traindyn/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "csv.hpp"

namespace traindyn {

void DynamicsTable::validate() const {
  if (num_epochs < 2) throw std::invalid_argument("dynamics table needs at least 2 epochs");
  const std::size_t n = num_samples();
  if (values.size() != n * static_cast<std::size_t>(num_epochs)) {
    throw std::invalid_argument("dynamics value buffer does not match num_samples x num_epochs");
  }
  if (labels.size() != n) throw std::invalid_argument("dynamics labels size mismatch");
  if (!true_labels.empty() && true_labels.size() != n) {
    throw std::invalid_argument("dynamics true_labels size mismatch");
  }
  if (!flags.empty() && flags.size() != n) {
    throw std::invalid_argument("dynamics flags size mismatch");
  }
  for (double v : values) {
    if (std::isnan(v)) continue;  // missing epoch, filled at write time
    if (v < 0.0 || v > 1.0) throw std::invalid_argument("probability outside [0,1]");
  }
}

std::vector<double> resample_sequence(std::span<const double> seq, int target_len) {
  if (seq.size() < 2) throw std::invalid_argument("resample_sequence: source length must be >= 2");
  if (target_len < 2) throw std::invalid_argument("resample_sequence: target length must be >= 2");
  for (double v : seq) {
    if (!std::isfinite(v)) throw std::invalid_argument("resample_sequence: non-finite entry");
  }
  const std::size_t src_len = seq.size();
  std::vector<double> out(static_cast<std::size_t>(target_len));
  const double step = static_cast<double>(src_len - 1) / (target_len - 1);
  for (int j = 0; j < target_len; ++j) {
    const double pos = j * step;
    auto k = static_cast<std::size_t>(pos);
    if (k >= src_len - 1) k = src_len - 2;
    const double frac = pos - static_cast<double>(k);
    out[static_cast<std::size_t>(j)] = seq[k] + frac * (seq[k + 1] - seq[k]);
  }
  out.front() = seq.front();
  out.back() = seq.back();
  return out;
}

std::filesystem::path meta_sidecar_path(const std::filesystem::path& path) {
  std::filesystem::path p = path;
  if (p.extension() == ".csv") p.replace_extension();
  p += ".meta.json";
  return p;
}

namespace {

// Fill NaN cells by linear interpolation between nearest recorded epochs;
// leading/trailing gaps extend the nearest value.
void fill_missing_epochs(std::vector<double>& row) {
  const std::size_t n = row.size();
  std::size_t i = 0;
  while (i < n && std::isnan(row[i])) ++i;
  if (i == n) throw std::invalid_argument("dynamics row has no recorded epochs");
  for (std::size_t j = 0; j < i; ++j) row[j] = row[i];
  std::size_t prev = i;
  for (std::size_t j = i + 1; j < n; ++j) {
    if (std::isnan(row[j])) continue;
    if (j > prev + 1) {
      const double lo = row[prev];
      const double hi = row[j];
      const double span = static_cast<double>(j - prev);
      for (std::size_t k = prev + 1; k < j; ++k) {
        row[k] = lo + (hi - lo) * static_cast<double>(k - prev) / span;
      }
    }
    prev = j;
  }
  for (std::size_t k = prev + 1; k < n; ++k) row[k] = row[prev];
}

std::string meta_value(const std::map<std::string, std::string>& meta, const std::string& key) {
  const auto it = meta.find(key);
  return it == meta.end() ? std::string() : it->second;
}

}  // namespace

void write_dynamics(const DynamicsTable& table, const std::filesystem::path& path) {
  table.validate();
  const std::size_t n = table.num_samples();
  const int t = table.num_epochs;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << "sample_id,given_label,true_label,flag";
  for (int e = 0; e < t; ++e) out << ",p_" << e;
  out << "\n";

  std::vector<double> row(static_cast<std::size_t>(t));
  for (std::size_t i = 0; i < n; ++i) {
    const auto src = table.row(i);
    row.assign(src.begin(), src.end());
    fill_missing_epochs(row);
    out << i << ',' << table.labels[i] << ','
        << (table.has_true_labels() ? table.true_labels[i] : -1) << ','
        << (table.has_flags() ? table.flags[i] : -1);
    for (double v : row) out << ',' << csv::format_fixed(v, 6);
    out << "\n";
  }
  out.close();
  if (!out) throw std::runtime_error("write failed: " + path.string());

  nlohmann::json meta;
  meta["num_classes"] = meta_value(table.metadata, "num_classes");
  meta["num_epochs"] = t;
  meta["seed"] = meta_value(table.metadata, "seed");
  meta["schedule"] = meta_value(table.metadata, "schedule");
  meta["generator"] = meta_value(table.metadata, "generator");
  std::ofstream mout(meta_sidecar_path(path), std::ios::binary);
  mout << meta.dump(2) << "\n";
}

DynamicsTable read_dynamics(const std::filesystem::path& path) {
  const auto lines = csv::read_lines(path);
  if (lines.empty()) csv::fail(path, 1, 1, "empty file");

  const auto header = csv::split_fields(lines[0]);
  // Fixed columns; true_label and flag may be omitted entirely.
  std::size_t col = 0;
  if (col >= header.size() || header[col] != "sample_id") {
    csv::fail(path, 1, col + 1, "malformed header, expected 'sample_id'");
  }
  ++col;
  if (col >= header.size() || header[col] != "given_label") {
    csv::fail(path, 1, col + 1, "malformed header, expected 'given_label'");
  }
  ++col;
  bool has_true_col = false;
  bool has_flag_col = false;
  if (col < header.size() && header[col] == "true_label") {
    has_true_col = true;
    ++col;
  }
  if (col < header.size() && header[col] == "flag") {
    has_flag_col = true;
    ++col;
  }
  const std::size_t first_prob_col = col;
  int num_epochs = 0;
  for (; col < header.size(); ++col) {
    const std::string expected = "p_" + std::to_string(col - first_prob_col);
    if (header[col] != expected) {
      csv::fail(path, 1, col + 1, "malformed header, expected '" + expected + "'");
    }
    ++num_epochs;
  }
  if (num_epochs < 2) csv::fail(path, 1, first_prob_col + 1, "need at least 2 probability columns");

  DynamicsTable table;
  table.num_epochs = num_epochs;
  const std::size_t ncols = header.size();
  bool any_true = false;
  bool any_flag = false;
  std::vector<int> true_labels;
  std::vector<int> flags;

  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto fields = csv::split_fields(lines[li]);
    if (fields.size() != ncols) {
      csv::fail(path, li + 1, fields.size(),
                "row has " + std::to_string(fields.size()) + " fields, expected " +
                    std::to_string(ncols));
    }
    const long sid = csv::parse_int(fields[0], path, li + 1, 1);
    if (sid != static_cast<long>(li - 1)) {
      csv::fail(path, li + 1, 1, "sample ids must be contiguous from 0");
    }
    std::size_t f = 1;
    table.labels.push_back(static_cast<int>(csv::parse_int(fields[f], path, li + 1, f + 1)));
    ++f;
    if (has_true_col) {
      const int v = static_cast<int>(csv::parse_int(fields[f], path, li + 1, f + 1));
      true_labels.push_back(v);
      if (v >= 0) any_true = true;
      ++f;
    }
    if (has_flag_col) {
      const int v = static_cast<int>(csv::parse_int(fields[f], path, li + 1, f + 1));
      if (v < -1 || v > 1) csv::fail(path, li + 1, f + 1, "flag must be -1, 0 or 1");
      flags.push_back(v);
      if (v >= 0) any_flag = true;
      ++f;
    }
    for (; f < ncols; ++f) {
      const double p = csv::parse_double(fields[f], path, li + 1, f + 1);
      if (!(p >= 0.0 && p <= 1.0)) {
        csv::fail(path, li + 1, f + 1, "probability outside [0,1]");
      }
      table.values.push_back(p);
    }
  }
  if (any_true) table.true_labels = std::move(true_labels);
  if (any_flag) table.flags = std::move(flags);

  const auto meta_path = meta_sidecar_path(path);
  if (std::filesystem::exists(meta_path)) {
    std::ifstream min(meta_path);
    nlohmann::json meta = nlohmann::json::parse(min, nullptr, false);
    if (meta.is_discarded()) throw ParseError(meta_path.string() + ": invalid JSON");
    if (meta.contains("num_epochs") && meta["num_epochs"].is_number_integer() &&
        meta["num_epochs"].get<int>() != num_epochs) {
      throw ParseError(meta_path.string() + ": num_epochs disagrees with the CSV header");
    }
    for (const auto& key : {"num_classes", "seed", "schedule", "generator"}) {
      if (!meta.contains(key)) continue;
      const auto& v = meta[key];
      table.metadata[key] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  table.validate();
  return table;
}

}  // namespace traindyn
