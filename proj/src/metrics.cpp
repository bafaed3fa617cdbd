#include "traindyn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "csv.hpp"
#include "traindyn/errors.hpp"

namespace traindyn {

namespace {

struct Group {
  long tp = 0;  // positives at this score
  long fp = 0;  // negatives at this score
};

struct Ranked {
  std::vector<Group> groups;  // descending score
  long pos = 0;
  long neg = 0;
};

Ranked rank(std::span<const double> scores, std::span<const int> flags) {
  if (scores.size() != flags.size()) throw std::invalid_argument("scores/flags size mismatch");
  if (scores.empty()) throw std::invalid_argument("empty score vector");
  for (double s : scores) {
    if (!std::isfinite(s)) throw std::invalid_argument("non-finite score");
  }
  for (int k : flags) {
    if (k != 0 && k != 1) throw std::invalid_argument("flags must be 0 or 1");
  }
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  Ranked r;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    Group g;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      if (flags[idx[j]]) {
        ++g.tp;
      } else {
        ++g.fp;
      }
      ++j;
    }
    r.groups.push_back(g);
    i = j;
  }
  for (const Group& g : r.groups) {
    r.pos += g.tp;
    r.neg += g.fp;
  }
  return r;
}

}  // namespace

double average_precision(std::span<const double> scores, std::span<const int> flags) {
  const Ranked r = rank(scores, flags);
  if (r.pos == 0) throw UndefinedMetricError("average precision needs a positive flag");
  const double p = static_cast<double>(r.pos);
  double ap = 0.0;
  double prev_recall = 0.0;
  long tp = 0, fp = 0;
  for (const Group& g : r.groups) {
    tp += g.tp;
    fp += g.fp;
    const double recall = static_cast<double>(tp) / p;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

double roc_auc(std::span<const double> scores, std::span<const int> flags) {
  const Ranked r = rank(scores, flags);
  if (r.pos == 0 || r.neg == 0) {
    throw UndefinedMetricError("roc auc needs both a positive and a negative flag");
  }
  // Numerator in units of concordant pairs; integers and halves are exact in
  // double, so this matches pairwise counting bit for bit.
  double s = 0.0;
  long neg_above = 0;
  for (const Group& g : r.groups) {
    const long neg_below = r.neg - neg_above - g.fp;
    s += static_cast<double>(g.tp) * static_cast<double>(neg_below) +
         0.5 * static_cast<double>(g.tp) * static_cast<double>(g.fp);
    neg_above += g.fp;
  }
  return s / (static_cast<double>(r.pos) * static_cast<double>(r.neg));
}

double precision_at_recall(std::span<const double> scores, std::span<const int> flags,
                           double target) {
  if (!(target >= 0.0 && target <= 1.0)) {
    throw std::invalid_argument("recall target must lie in [0, 1]");
  }
  const Ranked r = rank(scores, flags);
  if (r.pos == 0) throw UndefinedMetricError("precision at recall needs a positive flag");
  const double p = static_cast<double>(r.pos);
  long tp = 0, fp = 0;
  for (const Group& g : r.groups) {
    tp += g.tp;
    fp += g.fp;
    if (static_cast<double>(tp) / p >= target) {
      return static_cast<double>(tp) / static_cast<double>(tp + fp);
    }
  }
  // recall hits 1.0 at the last group, so this is unreachable for valid input
  return static_cast<double>(r.pos) / static_cast<double>(r.pos + r.neg);
}

EvalReport evaluate(std::span<const double> scores, std::span<const int> flags) {
  EvalReport report;
  report.map = average_precision(scores, flags);
  report.roc_auc = roc_auc(scores, flags);
  report.precision_at_95 = precision_at_recall(scores, flags, 0.95);
  return report;
}

void write_report(std::span<const ReportRow> rows, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << "method,noise_kind,noise_ratio,map,roc_auc,precision_at_95\n";
  for (const ReportRow& r : rows) {
    f << r.method << ',' << r.noise_kind << ',' << csv::format_fixed(r.noise_ratio, 6) << ','
      << csv::format_fixed(r.metrics.map, 6) << ',' << csv::format_fixed(r.metrics.roc_auc, 6) << ','
      << csv::format_fixed(r.metrics.precision_at_95, 6) << '\n';
  }
}

}  // namespace traindyn
