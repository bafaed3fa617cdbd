#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace traindyn {

struct AdamWConfig {
  double learning_rate = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;

  void validate() const;
};

struct AdamWState {
  std::vector<double> m;  // first-moment EMA
  std::vector<double> v;  // second-moment EMA
  long step = 0;          // completed steps

  explicit AdamWState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One AdamW update with bias correction and decoupled weight decay:
///   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + wd * theta).
/// Throws std::invalid_argument on shape mismatch or a non-finite gradient.
void adamw_step(std::vector<double>& params, std::span<const double> grads,
                AdamWState& state, const AdamWConfig& config);

}  // namespace traindyn
