#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace traindyn {

struct EvalReport {
  double map = 0.0;
  double roc_auc = 0.0;
  double precision_at_95 = 0.0;
};

/// Area under the precision-recall curve as the step sum
/// AP = sum_n (R_n - R_{n-1}) * P_n over distinct descending score
/// thresholds; tied scores form one threshold group. Throws
/// UndefinedMetricError without a positive flag.
double average_precision(std::span<const double> scores, std::span<const int> flags);

/// Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 * P(tie). Throws
/// UndefinedMetricError unless both classes are present.
double roc_auc(std::span<const double> scores, std::span<const int> flags);

/// Precision of the smallest prediction set whose recall reaches `target`
/// (tied scores enter together). Throws UndefinedMetricError without a
/// positive flag.
double precision_at_recall(std::span<const double> scores, std::span<const int> flags,
                           double target = 0.95);

EvalReport evaluate(std::span<const double> scores, std::span<const int> flags);

struct ReportRow {
  std::string method;
  std::string noise_kind;
  double noise_ratio = 0.0;
  EvalReport metrics;
};

/// CSV: method,noise_kind,noise_ratio,map,roc_auc,precision_at_95.
void write_report(std::span<const ReportRow> rows, const std::filesystem::path& path);

}  // namespace traindyn
