#pragma once

#include "cosmic/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace cosmic {

struct GradCheckEntry {
  Eigen::Index index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool passed = true;
  std::vector<GradCheckEntry> worst;  // descending relative error
};

/// Compares an analytic gradient with central differences
/// (f(x+h e_i) - f(x-h e_i)) / 2h, coordinate by coordinate. Relative error
/// is |a - n| / max(|a|, |n|, floor); `floor` keeps exact zeros from
/// dividing by zero.
inline GradCheckReport finite_diff_check(const std::function<double(const VecXd&)>& loss, const VecXd& x,
                                         const VecXd& analytic, double h = 1e-6, double tol = 1e-4,
                                         double floor = 1e-8, std::size_t keep_worst = 5) {
  if (analytic.size() != x.size()) throw Error("finite_diff_check: gradient size mismatch");
  GradCheckReport report;
  std::vector<GradCheckEntry> all;
  VecXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    probe(i) = x(i) + h;
    const double up = loss(probe);
    probe(i) = x(i) - h;
    const double down = loss(probe);
    probe(i) = x(i);
    GradCheckEntry e;
    e.index = i;
    e.analytic = analytic(i);
    e.numeric = (up - down) / (2.0 * h);
    e.rel_error = std::abs(e.analytic - e.numeric) /
                  std::max({std::abs(e.analytic), std::abs(e.numeric), floor});
    all.push_back(e);
  }
  std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.rel_error > b.rel_error; });
  if (!all.empty()) report.max_rel_error = all.front().rel_error;
  report.passed = report.max_rel_error < tol;
  all.resize(std::min(all.size(), keep_worst));
  report.worst = std::move(all);
  return report;
}

}  // namespace cosmic
