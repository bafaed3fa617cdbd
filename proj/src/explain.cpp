#include "traindyn/explain.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "csv.hpp"
#include "traindyn/rng.hpp"

namespace traindyn {

namespace {

/// Gaussian elimination with partial pivoting; a is n x n row-major, b length
/// n; solution lands in b. Returns false on a (near-)singular pivot.
bool solve_linear(std::vector<double> a, std::vector<double>& b, std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    if (std::abs(a[pivot * n + col]) < 1e-12) return false;
    if (pivot != col) {
      for (std::size_t k = col; k < n; ++k) std::swap(a[col * n + k], a[pivot * n + k]);
      std::swap(b[col], b[pivot]);
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double factor = a[r * n + col] / a[col * n + col];
      if (factor == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) a[r * n + k] -= factor * a[col * n + k];
      b[r] -= factor * b[col];
    }
  }
  for (std::size_t col = n; col-- > 0;) {
    double s = b[col];
    for (std::size_t k = col + 1; k < n; ++k) s -= a[col * n + k] * b[k];
    b[col] = s / a[col * n + col];
  }
  return true;
}

}  // namespace

Explanation explain_instance(const DetectorModel& model, std::span<const double> seq,
                             int num_perturbations, double kernel_width,
                             std::uint64_t seed) {
  const int t_len = model.input_len;
  if (static_cast<int>(seq.size()) != t_len) {
    throw std::invalid_argument("sequence length does not match the detector's input_len");
  }
  if (num_perturbations < 2 * t_len) {
    throw std::invalid_argument("need at least 2 * input_len perturbations");
  }
  if (kernel_width <= 0.0) kernel_width = 0.75 * std::sqrt(static_cast<double>(t_len));

  double mean = 0.0;
  for (double v : seq) mean += v;
  mean /= static_cast<double>(t_len);

  Rng rng(seed);
  const std::size_t n = static_cast<std::size_t>(num_perturbations);
  std::vector<int> masks(n * static_cast<std::size_t>(t_len));
  std::vector<double> outputs(n), weights(n), perturbed(t_len);
  for (std::size_t i = 0; i < n; ++i) {
    int* mask = masks.data() + i * static_cast<std::size_t>(t_len);
    int masked = 0;
    for (int t = 0; t < t_len; ++t) {
      // The first perturbation is the instance itself (distance 0, weight 1).
      mask[t] = (i == 0) ? 1 : static_cast<int>(rng.below(2));
      if (mask[t] == 0) ++masked;
      perturbed[t] = mask[t] ? seq[t] : mean;
    }
    outputs[i] = detector_forward(model, perturbed);
    const double d = static_cast<double>(masked);
    weights[i] = std::exp(-(d * d) / (kernel_width * kernel_width));
  }

  // Weighted least squares for y ~ b0 + sum_t b_t * mask_t, with the
  // intercept eliminated by centering so a constant target yields exactly
  // zero coefficients up to rounding.
  double w_sum = 0.0, y_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    w_sum += weights[i];
    y_mean += weights[i] * outputs[i];
  }
  y_mean /= w_sum;
  const std::size_t dim = static_cast<std::size_t>(t_len);
  std::vector<double> x_mean(dim, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const int* mask = masks.data() + i * dim;
    for (std::size_t t = 0; t < dim; ++t) x_mean[t] += weights[i] * mask[t];
  }
  for (std::size_t t = 0; t < dim; ++t) x_mean[t] /= w_sum;

  std::vector<double> ata(dim * dim, 0.0), aty(dim, 0.0), row(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const int* mask = masks.data() + i * dim;
    for (std::size_t t = 0; t < dim; ++t) row[t] = mask[t] - x_mean[t];
    const double w = weights[i];
    const double yc = outputs[i] - y_mean;
    for (std::size_t r = 0; r < dim; ++r) {
      const double wr = w * row[r];
      for (std::size_t c = r; c < dim; ++c) ata[r * dim + c] += wr * row[c];
      aty[r] += wr * yc;
    }
  }
  for (std::size_t r = 0; r < dim; ++r) {
    for (std::size_t c = 0; c < r; ++c) ata[r * dim + c] = ata[c * dim + r];
  }

  Explanation out;
  std::vector<double> beta = aty;
  if (!solve_linear(ata, beta, dim)) {
    out.ridge_fallback = true;
    for (std::size_t r = 0; r < dim; ++r) ata[r * dim + r] += 1e-6;
    beta = aty;
    if (!solve_linear(ata, beta, dim)) {
      throw std::runtime_error("surrogate fit failed even with ridge regularization");
    }
  }
  double intercept = y_mean;
  for (std::size_t t = 0; t < dim; ++t) intercept -= beta[t] * x_mean[t];
  out.intercept = intercept;
  out.epoch_importances.assign(beta.begin(), beta.end());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int* mask = masks.data() + i * dim;
    double fit = out.intercept;
    for (std::size_t t = 0; t < dim; ++t) fit += beta[t] * static_cast<double>(mask[t]);
    ss_res += weights[i] * (outputs[i] - fit) * (outputs[i] - fit);
    ss_tot += weights[i] * (outputs[i] - y_mean) * (outputs[i] - y_mean);
  }
  out.fidelity = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;
  return out;
}

void write_explanation(const Explanation& explanation, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << "epoch,importance\n";
  for (std::size_t t = 0; t < explanation.epoch_importances.size(); ++t) {
    f << t << ',' << csv::format_exact(explanation.epoch_importances[t]) << '\n';
  }
}

}  // namespace traindyn
