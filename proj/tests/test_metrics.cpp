#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "traindyn/errors.hpp"
#include "traindyn/metrics.hpp"
#include "traindyn/rng.hpp"

using namespace traindyn;

namespace {

// Brute-force oracles. AUC counts every positive/negative pair; AP and P@95
// sweep the distinct thresholds explicitly over a sorted copy.
double oracle_auc(const std::vector<double>& scores, const std::vector<int>& flags) {
  double wins = 0.0;
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (flags[i] != 1) continue;
    ++pos;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (flags[j] != 0) continue;
      if (scores[i] > scores[j]) wins += 1.0;
      if (scores[i] == scores[j]) wins += 0.5;
    }
  }
  for (int f : flags) neg += f == 0;
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

struct Curve {
  std::vector<double> precision, recall;
};

Curve oracle_curve(std::vector<double> scores, std::vector<int> flags) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double total_pos = 0.0;
  for (int f : flags) total_pos += f;

  Curve c;
  double tp = 0.0, p = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += flags[order[j]];
      p += 1.0;
      ++j;
    }
    c.precision.push_back(tp / p);
    c.recall.push_back(tp / total_pos);
    i = j;
  }
  return c;
}

double oracle_ap(const std::vector<double>& scores, const std::vector<int>& flags) {
  const Curve c = oracle_curve(scores, flags);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t g = 0; g < c.precision.size(); ++g) {
    ap += (c.recall[g] - prev_recall) * c.precision[g];
    prev_recall = c.recall[g];
  }
  return ap;
}

double oracle_p_at(const std::vector<double>& scores, const std::vector<int>& flags,
                   double target) {
  const Curve c = oracle_curve(scores, flags);
  for (std::size_t g = 0; g < c.precision.size(); ++g) {
    if (c.recall[g] >= target) return c.precision[g];
  }
  return c.precision.back();
}

}  // namespace

TEST_CASE("metrics match brute-force oracles on random tied instances") {
  Rng rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.below(49);
    std::vector<double> scores(n);
    std::vector<int> flags(n);
    // Quantized scores force ties; ensure both classes appear.
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng.below(8)) / 7.0;
      flags[i] = rng.below(2) ? 1 : 0;
    }
    flags[0] = 1;
    flags[n - 1] = 0;

    CHECK(roc_auc(scores, flags) == oracle_auc(scores, flags));
    CHECK(average_precision(scores, flags) == oracle_ap(scores, flags));
    CHECK(precision_at_recall(scores, flags, 0.95) == oracle_p_at(scores, flags, 0.95));
  }
}

TEST_CASE("hand-computed metric fixtures") {
  // Descending by score: flags 1,0,1,1 -> AP = 1/1*(1/3) + 3/4*(... ) etc.
  const std::vector<double> scores = {0.9, 0.8, 0.7, 0.6};
  const std::vector<int> flags = {1, 0, 1, 1};
  // Groups: tp/p = 1/1, 1/2, 2/3, 3/4; recalls 1/3, 1/3, 2/3, 1.
  const double expected_ap = (1.0 / 3.0) * 1.0 + (1.0 / 3.0) * (2.0 / 3.0) +
                             (1.0 / 3.0) * (3.0 / 4.0);
  CHECK(average_precision(scores, flags) == doctest::Approx(expected_ap).epsilon(1e-15));
  // Pairs: (1,0): 0.9>0.8 win, 0.7<0.8 lose, 0.6<0.8 lose -> 1 of 3.
  CHECK(roc_auc(scores, flags) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(precision_at_recall(scores, flags, 0.95) == doctest::Approx(0.75).epsilon(1e-15));

  const std::vector<double> s1 = {0.9, 0.8, 0.7};
  const std::vector<int> f1 = {1, 0, 1};
  CHECK(average_precision(s1, f1) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));

  const std::vector<double> s_alt = {0.9, 0.8, 0.7, 0.6};
  const std::vector<int> f_alt = {1, 0, 1, 0};
  CHECK(roc_auc(s_alt, f_alt) == doctest::Approx(0.75).epsilon(1e-15));

  const std::vector<double> s2 = {0.8, 0.7, 0.6, 0.5};
  const std::vector<int> f2 = {1, 1, 0, 1};
  // AP = (1/3)*1 + (1/3)*1 + (1/3)*(3/4) = 11/12.
  CHECK(average_precision(s2, f2) == doctest::Approx(11.0 / 12.0).epsilon(1e-15));
  CHECK(roc_auc(s2, f2) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  // Perfect and inverted rankings.
  const std::vector<double> s3 = {0.9, 0.8, 0.2, 0.1};
  const std::vector<int> f3 = {1, 1, 0, 0};
  CHECK(roc_auc(s3, f3) == 1.0);
  CHECK(average_precision(s3, f3) == 1.0);
  const std::vector<int> f4 = {0, 0, 1, 1};
  CHECK(roc_auc(s3, f4) == 0.0);
}

TEST_CASE("all-tied scores collapse to base rates") {
  const std::vector<double> scores = {0.5, 0.5, 0.5, 0.5, 0.5};
  const std::vector<int> flags = {1, 0, 1, 0, 0};
  CHECK(roc_auc(scores, flags) == 0.5);
  CHECK(average_precision(scores, flags) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(precision_at_recall(scores, flags, 0.95) == doctest::Approx(0.4).epsilon(1e-15));
}

TEST_CASE("degenerate flag vectors raise undefined-metric errors") {
  const std::vector<double> scores = {0.1, 0.2, 0.3};
  const std::vector<int> all_neg = {0, 0, 0};
  const std::vector<int> all_pos = {1, 1, 1};
  CHECK_THROWS_AS((void)average_precision(scores, all_neg), UndefinedMetricError);
  CHECK_THROWS_AS((void)roc_auc(scores, all_neg), UndefinedMetricError);
  CHECK_THROWS_AS((void)roc_auc(scores, all_pos), UndefinedMetricError);
  CHECK_THROWS_AS((void)precision_at_recall(scores, all_neg, 0.95), UndefinedMetricError);
  CHECK_THROWS_AS((void)evaluate(scores, all_neg), UndefinedMetricError);
}

TEST_CASE("metric inputs are validated") {
  const std::vector<double> scores = {0.1, 0.2};
  const std::vector<int> flags = {1, 0};
  const std::vector<int> short_flags = {1};
  CHECK_THROWS_AS((void)roc_auc(scores, short_flags), std::invalid_argument);
  const std::vector<double> bad = {0.1, std::nan("")};
  CHECK_THROWS_AS((void)roc_auc(bad, flags), std::invalid_argument);
  const std::vector<int> bad_flag = {1, 2};
  CHECK_THROWS_AS((void)roc_auc(scores, bad_flag), std::invalid_argument);
  CHECK_THROWS_AS((void)precision_at_recall(scores, flags, 1.5), std::invalid_argument);
}

TEST_CASE("report CSV carries six fractional digits") {
  const auto path = std::filesystem::temp_directory_path() / "traindyn_report_test.csv";
  const std::vector<ReportRow> rows = {
      {"detector", "symmetric", 0.4, {0.912345678, 0.95, 0.625}},
      {"baseline", "symmetric", 0.4, {0.5, 0.5, 0.5}},
  };
  write_report(rows, path);
  std::ifstream f(path);
  std::string line;
  std::getline(f, line);
  CHECK(line == "method,noise_kind,noise_ratio,map,roc_auc,precision_at_95");
  std::getline(f, line);
  CHECK(line == "detector,symmetric,0.400000,0.912346,0.950000,0.625000");
  std::getline(f, line);
  CHECK(line == "baseline,symmetric,0.400000,0.500000,0.500000,0.500000");
}

TEST_CASE("permuting samples leaves every metric unchanged") {
  Rng rng(55);
  std::vector<double> scores(40);
  std::vector<int> flags(40);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = rng.uniform();
    flags[i] = rng.below(2) ? 1 : 0;
  }
  flags[0] = 1;
  flags[1] = 0;
  const EvalReport base = evaluate(scores, flags);

  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<double> ps(scores.size());
  std::vector<int> pf(flags.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    ps[i] = scores[order[i]];
    pf[i] = flags[order[i]];
  }
  const EvalReport shuffled = evaluate(ps, pf);
  CHECK(shuffled.map == base.map);
  CHECK(shuffled.roc_auc == base.roc_auc);
  CHECK(shuffled.precision_at_95 == base.precision_at_95);
}
