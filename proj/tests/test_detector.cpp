#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "traindyn/detector.hpp"
#include "traindyn/dynamics.hpp"
#include "traindyn/rng.hpp"

using namespace traindyn;

namespace {

DynamicsTable random_table(int num_samples, int num_epochs, std::uint64_t seed) {
  Rng rng(seed);
  DynamicsTable t;
  t.num_epochs = num_epochs;
  t.values.resize(static_cast<std::size_t>(num_samples) * num_epochs);
  for (double& v : t.values) v = rng.uniform();
  t.labels.assign(num_samples, 0);
  t.flags.resize(num_samples);
  for (int& f : t.flags) f = rng.below(2) ? 1 : 0;
  if (num_samples > 1) {
    t.flags[0] = 1;  // keep both classes present
    t.flags[1] = 0;
  }
  return t;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-4});
}

}  // namespace

TEST_CASE("detector gradient matches central finite differences") {
  const int T = 8, H = 3, B = 3;
  DetectorModel model = DetectorModel::init(T, 99, 2, H);
  Rng rng(7);
  // Move off the symmetric init point so every gate is exercised.
  for (double& p : model.params) p += 0.2 * (2.0 * rng.uniform() - 1.0);

  std::vector<double> seqs(static_cast<std::size_t>(B) * T);
  for (double& v : seqs) v = rng.uniform();
  const std::vector<int> flags = {1, 0, 1};

  const auto [loss, grad] = detector_loss_and_grad(model, seqs, flags);
  REQUIRE(grad.size() == model.params.size());

  const double h = 1e-5;
  double max_err = 0.0;
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    DetectorModel plus = model;
    plus.params[i] += h;
    DetectorModel minus = model;
    minus.params[i] -= h;
    const double numeric = (detector_loss_and_grad(plus, seqs, flags).first -
                            detector_loss_and_grad(minus, seqs, flags).first) /
                           (2.0 * h);
    max_err = std::max(max_err, rel_err(grad[i], numeric));
  }
  CHECK(max_err < 1e-4);
}

TEST_CASE("zero model outputs one half and ln2 loss") {
  DetectorModel model = DetectorModel::init(5, 1, 2, 4);
  std::fill(model.params.begin(), model.params.end(), 0.0);
  const std::vector<double> seq = {0.1, 0.9, 0.3, 0.7, 0.5};
  CHECK(detector_forward(model, seq) == doctest::Approx(0.5).epsilon(1e-15));

  const std::vector<int> flags = {1};
  const auto [loss, grad] = detector_loss_and_grad(model, seq, flags);
  CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("hand-evaluated single-cell recurrence") {
  DetectorModel model;
  model.num_layers = 1;
  model.hidden_size = 1;
  model.input_len = 1;
  // Layout: w_ih (4x1), w_hh (4x1), b_ih (4), b_hh (4), head w (1), head b (1).
  const double wi = 0.3, wf = -0.2, wg = 0.5, wo = 0.4;
  const double bi = 0.1, bf = 1.0, bg = -0.3, bo = 0.2;
  model.params = {wi, wf, wg, wo, 0.7, -0.6, 0.9, -0.8, bi, bf, bg, bo,
                  0.0, 0.0, 0.0, 0.0, 1.5, -0.25};
  const double x = 0.6;
  const auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const double i = sig(wi * x + bi);
  const double f = sig(wf * x + bf);
  const double g = std::tanh(wg * x + bg);
  const double o = sig(wo * x + bo);
  const double c = f * 0.0 + i * g;
  const double h0 = o * std::tanh(c);
  const double expected = sig(1.5 * h0 - 0.25);

  const std::vector<double> seq = {x};
  CHECK(detector_forward(model, seq) == doctest::Approx(expected).epsilon(1e-15));
  (void)wf;
}

TEST_CASE("batch loss is the mean of single-sequence losses") {
  const int T = 6;
  DetectorModel model = DetectorModel::init(T, 3, 2, 4);
  Rng rng(11);
  std::vector<double> seqs(4 * T);
  for (double& v : seqs) v = rng.uniform();
  const std::vector<int> flags = {1, 0, 0, 1};

  const auto [batch_loss, batch_grad] = detector_loss_and_grad(model, seqs, flags);
  double mean = 0.0;
  for (int b = 0; b < 4; ++b) {
    const std::span<const double> one(seqs.data() + b * T, T);
    const std::vector<int> one_flag = {flags[b]};
    mean += detector_loss_and_grad(model, one, one_flag).first;
  }
  mean /= 4.0;
  CHECK(batch_loss == doctest::Approx(mean).epsilon(1e-12));

  SUBCASE("duplicating every element changes nothing") {
    std::vector<double> doubled(seqs);
    doubled.insert(doubled.end(), seqs.begin(), seqs.end());
    std::vector<int> dflags(flags);
    dflags.insert(dflags.end(), flags.begin(), flags.end());
    const auto [dup_loss, dup_grad] = detector_loss_and_grad(model, doubled, dflags);
    CHECK(dup_loss == doctest::Approx(batch_loss).epsilon(1e-12));
    for (std::size_t i = 0; i < batch_grad.size(); ++i) {
      CHECK(dup_grad[i] == doctest::Approx(batch_grad[i]).epsilon(1e-12));
    }
  }
}

TEST_CASE("batched scoring equals per-row forward exactly") {
  DynamicsTable t = random_table(70, 12, 5);
  DetectorModel model = DetectorModel::init(12, 6);
  const std::vector<double> scores = score(model, t);
  REQUIRE(scores.size() == t.num_samples());
  for (std::size_t i = 0; i < t.num_samples(); ++i) {
    CHECK(scores[i] == detector_forward(model, t.row(i)));
  }
}

TEST_CASE("scores stay in the open unit interval") {
  Rng rng(31);
  DetectorModel model = DetectorModel::init(4, 17);
  for (double& p : model.params) p += 2.0 * (2.0 * rng.uniform() - 1.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::vector<double> seq = {rng.uniform(), rng.uniform(), rng.uniform(),
                                     rng.uniform()};
    const double p = detector_forward(model, seq);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
}

TEST_CASE("training is deterministic and improves the loss") {
  DynamicsTable t = random_table(120, 10, 42);
  // Give the flags real signal: flagged rows get depressed values.
  for (std::size_t i = 0; i < t.num_samples(); ++i) {
    if (!t.flags[i]) continue;
    for (int e = 0; e < t.num_epochs; ++e) {
      t.values[i * 10 + e] *= 0.3;
    }
  }
  DetectorTrainConfig config;
  config.epochs = 5;
  config.batch_size = 32;
  config.seed = 9;

  const DetectorTrainResult a = train_detector(t, config);
  const DetectorTrainResult b = train_detector(t, config);
  CHECK(a.model.params == b.model.params);
  CHECK(a.epoch_losses == b.epoch_losses);
  CHECK(a.epoch_losses.back() < a.epoch_losses.front());
}

TEST_CASE("all-clean supervision drives scores toward zero") {
  DynamicsTable t = random_table(128, 8, 3);
  std::fill(t.flags.begin(), t.flags.end(), 0);
  DetectorTrainConfig config;
  config.seed = 4;
  const DetectorTrainResult r = train_detector(t, config);
  const std::vector<double> scores = score(r.model, t);
  double mean = 0.0;
  for (double s : scores) mean += s;
  mean /= static_cast<double>(scores.size());
  CHECK(mean < 0.1);
}

TEST_CASE("fine-tune no-ops leave the model bit-identical") {
  DynamicsTable t = random_table(64, 10, 8);
  DetectorModel model = DetectorModel::init(10, 2);

  DetectorTrainConfig zero_epochs;
  zero_epochs.epochs = 0;
  zero_epochs.learning_rate = 0.03;
  CHECK(fine_tune(model, t, zero_epochs).model.params == model.params);

  DetectorTrainConfig zero_lr;
  zero_lr.epochs = 3;
  zero_lr.learning_rate = 0.0;
  zero_lr.weight_decay = 0.0;
  CHECK(fine_tune(model, t, zero_lr).model.params == model.params);
}

TEST_CASE("fine-tune resamples mismatched sequence lengths") {
  DynamicsTable t = random_table(64, 15, 12);
  DetectorModel model = DetectorModel::init(10, 2);
  DetectorTrainConfig config;
  config.epochs = 1;
  config.learning_rate = 0.03;
  config.seed = 5;
  const DetectorTrainResult r = fine_tune(model, t, config);
  CHECK(r.model.input_len == 10);
  CHECK(r.epoch_losses.size() == 1);
}

TEST_CASE("scoring is permutation-equivariant") {
  DynamicsTable t = random_table(40, 9, 21);
  DetectorModel model = DetectorModel::init(9, 6);
  const std::vector<double> base = score(model, t);

  DynamicsTable reversed;
  reversed.num_epochs = t.num_epochs;
  reversed.labels = t.labels;
  reversed.flags = t.flags;
  const std::size_t n = t.num_samples();
  reversed.values.resize(t.values.size());
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = t.row(n - 1 - i);
    std::copy(row.begin(), row.end(), reversed.values.begin() + i * 9);
  }
  const std::vector<double> flipped = score(model, reversed);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(flipped[i] == base[n - 1 - i]);
  }
}

TEST_CASE("constant-extending a constant sequence leaves the score put") {
  DetectorModel model = DetectorModel::init(12, 33);
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const std::vector<double> seq(12, rng.uniform());
    const double base = detector_forward(model, seq);

    std::vector<double> extended(seq);
    extended.insert(extended.begin(), 3, seq.front());
    const std::vector<double> back = resample_sequence(extended, 12);
    const double moved = detector_forward(model, back);
    CHECK(std::abs(moved - base) < 1e-6);
  }
}

TEST_CASE("baseline score is one minus the row mean") {
  DynamicsTable t;
  t.num_epochs = 4;
  t.values = {1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.2, 0.4, 0.6, 0.8};
  t.labels = {0, 0, 0};
  const std::vector<double> s = baseline_score(t);
  CHECK(s[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(s[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(s[2] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("checkpoint round-trip preserves scores exactly") {
  const auto dir = std::filesystem::temp_directory_path() / "traindyn_det_rt";
  std::filesystem::create_directories(dir);
  DynamicsTable t = random_table(32, 7, 77);
  DetectorModel model = DetectorModel::init(7, 13);
  Rng rng(14);
  for (double& p : model.params) p += 0.1 * (2.0 * rng.uniform() - 1.0);

  save_detector(model, dir / "det.json");
  const DetectorModel loaded = load_detector(dir / "det.json");
  CHECK(loaded.params == model.params);
  CHECK(score(loaded, t) == score(model, t));
}

TEST_CASE("forward rejects malformed inputs") {
  DetectorModel model = DetectorModel::init(6, 1);
  const std::vector<double> wrong_len = {0.1, 0.2};
  CHECK_THROWS_AS((void)detector_forward(model, wrong_len), std::invalid_argument);

  DynamicsTable empty;
  empty.num_epochs = 6;
  CHECK_THROWS_AS((void)score(model, empty), std::invalid_argument);
}
