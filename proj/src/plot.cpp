#include "traindyn/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "csv.hpp"

namespace traindyn {

namespace {

constexpr double kWidth = 640.0, kHeight = 400.0;
constexpr double kLeft = 56.0, kRight = 16.0, kTop = 24.0, kBottom = 40.0;

std::string pt(double x, double y) {
  return csv::format_fixed(x, 2) + "," + csv::format_fixed(y, 2) + " ";
}

struct Series {
  std::vector<double> mean, stddev;
  std::string color, label;
};

Series summarize(const DynamicsTable& table, int wanted_flag, const std::string& color,
                 const std::string& label) {
  Series s;
  s.color = color;
  s.label = label;
  const int t_len = table.num_epochs;
  s.mean.assign(t_len, 0.0);
  s.stddev.assign(t_len, 0.0);
  std::size_t count = 0;
  for (std::size_t i = 0; i < table.num_samples(); ++i) {
    if (wanted_flag >= 0 && table.flags[i] != wanted_flag) continue;
    ++count;
    const auto row = table.row(i);
    for (int t = 0; t < t_len; ++t) s.mean[t] += row[t];
  }
  if (count == 0) return s;
  for (double& m : s.mean) m /= static_cast<double>(count);
  for (std::size_t i = 0; i < table.num_samples(); ++i) {
    if (wanted_flag >= 0 && table.flags[i] != wanted_flag) continue;
    const auto row = table.row(i);
    for (int t = 0; t < t_len; ++t) {
      const double d = row[t] - s.mean[t];
      s.stddev[t] += d * d;
    }
  }
  for (double& v : s.stddev) v = std::sqrt(v / static_cast<double>(count));
  return s;
}

}  // namespace

void emit_dynamics_plot(const DynamicsTable& table, const std::filesystem::path& path) {
  table.validate();
  if (table.num_samples() == 0) throw std::invalid_argument("empty dynamics table");
  const int t_len = table.num_epochs;

  std::vector<Series> series;
  if (table.has_flags()) {
    series.push_back(summarize(table, 0, "#1f77b4", "clean"));
    series.push_back(summarize(table, 1, "#d62728", "mislabeled"));
  } else {
    series.push_back(summarize(table, -1, "#1f77b4", "all"));
  }

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto sx = [&](double epoch) { return kLeft + plot_w * epoch / (t_len - 1); };
  auto sy = [&](double p) { return kTop + plot_h * (1.0 - std::clamp(p, 0.0, 1.0)); };

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
    << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
  f << "<rect width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  // axes
  f << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
    << kTop + plot_h << "\" stroke=\"black\"/>\n";
  f << "<line x1=\"" << kLeft << "\" y1=\"" << kTop + plot_h << "\" x2=\"" << kLeft + plot_w
    << "\" y2=\"" << kTop + plot_h << "\" stroke=\"black\"/>\n";
  for (double tick : {0.0, 0.5, 1.0}) {
    f << "<text x=\"" << kLeft - 8 << "\" y=\"" << csv::format_fixed(sy(tick) + 4, 2)
      << "\" font-size=\"12\" text-anchor=\"end\">" << csv::format_fixed(tick, 1) << "</text>\n";
  }
  f << "<text x=\"" << kLeft << "\" y=\"" << kHeight - 8
    << "\" font-size=\"12\" text-anchor=\"middle\">0</text>\n";
  f << "<text x=\"" << kLeft + plot_w << "\" y=\"" << kHeight - 8
    << "\" font-size=\"12\" text-anchor=\"middle\">" << (t_len - 1) << "</text>\n";
  f << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 8
    << "\" font-size=\"12\" text-anchor=\"middle\">epoch</text>\n";
  f << "<text x=\"14\" y=\"" << kTop + plot_h / 2 << "\" font-size=\"12\" text-anchor=\""
    << "middle\" transform=\"rotate(-90 14 " << kTop + plot_h / 2
    << ")\">given-label probability</text>\n";

  double legend_y = kTop + 8;
  for (const Series& s : series) {
    if (s.mean.empty()) continue;
    // shaded mean +- std band
    f << "<polygon fill=\"" << s.color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
    for (int t = 0; t < t_len; ++t) f << pt(sx(t), sy(s.mean[t] + s.stddev[t]));
    for (int t = t_len - 1; t >= 0; --t) f << pt(sx(t), sy(s.mean[t] - s.stddev[t]));
    f << "\"/>\n";
    f << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
    for (int t = 0; t < t_len; ++t) f << pt(sx(t), sy(s.mean[t]));
    f << "\"/>\n";
    f << "<text x=\"" << kLeft + plot_w - 4 << "\" y=\"" << csv::format_fixed(legend_y, 2)
      << "\" font-size=\"12\" text-anchor=\"end\" fill=\"" << s.color << "\">" << s.label
      << "</text>\n";
    legend_y += 16.0;
  }
  f << "</svg>\n";
}

void emit_explanation_plot(const Explanation& explanation,
                           const std::filesystem::path& path) {
  const auto& imp = explanation.epoch_importances;
  if (imp.empty()) throw std::invalid_argument("empty explanation");
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = 300.0 - kTop - kBottom;
  double lo = 0.0, hi = 0.0;
  for (double v : imp) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi == lo) hi = lo + 1.0;
  auto sy = [&](double v) { return kTop + plot_h * (hi - v) / (hi - lo); };
  const double bar_w = plot_w / static_cast<double>(imp.size());

  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
    << "\" height=\"300\" viewBox=\"0 0 " << kWidth << " 300\">\n";
  f << "<rect width=\"" << kWidth << "\" height=\"300\" fill=\"white\"/>\n";
  f << "<line x1=\"" << kLeft << "\" y1=\"" << csv::format_fixed(sy(0.0), 2) << "\" x2=\""
    << kLeft + plot_w << "\" y2=\"" << csv::format_fixed(sy(0.0), 2) << "\" stroke=\"black\"/>\n";
  for (std::size_t t = 0; t < imp.size(); ++t) {
    const double x = kLeft + bar_w * static_cast<double>(t);
    const double y0 = sy(0.0), y1 = sy(imp[t]);
    f << "<rect x=\"" << csv::format_fixed(x + bar_w * 0.1, 2) << "\" y=\""
      << csv::format_fixed(std::min(y0, y1), 2) << "\" width=\"" << csv::format_fixed(bar_w * 0.8, 2)
      << "\" height=\"" << csv::format_fixed(std::abs(y1 - y0), 2)
      << "\" fill=\"#1f77b4\"/>\n";
  }
  f << "<text x=\"" << kLeft + plot_w / 2
    << "\" y=\"292\" font-size=\"12\" text-anchor=\"middle\">epoch</text>\n";
  f << "</svg>\n";
}

}  // namespace traindyn
