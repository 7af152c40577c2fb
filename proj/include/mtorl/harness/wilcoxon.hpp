#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "mtorl/errors.hpp"

namespace mtorl::harness {

struct WilcoxonResult {
  double statistic = 0.0;  ///< W+, rank sum of positive differences x - y
  double z = 0.0;
  double p_value = 1.0;    ///< two-sided
  std::size_t n = 0;       ///< non-zero differences used
};

/// Two-sided Wilcoxon signed-rank test, normal approximation with the tie
/// correction on the variance; zero differences are dropped.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                           std::size_t min_pairs = 6) {
  if (x.size() != y.size()) throw DimensionError("wilcoxon: samples must have equal length");
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    if (diff != 0.0) d.push_back(diff);
  }
  const std::size_t n = d.size();
  if (n < min_pairs) {
    throw InsufficientDataError("wilcoxon: only " + std::to_string(n) + " non-zero differences (need " +
                                std::to_string(min_pairs) + ")");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });

  std::vector<double> rank(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t m = i; m <= j; ++m) rank[order[m]] = avg;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  WilcoxonResult r;
  r.n = n;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0.0) r.statistic += rank[i];
  }
  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  r.z = var > 0.0 ? (r.statistic - mean) / std::sqrt(var) : 0.0;
  r.p_value = std::erfc(std::abs(r.z) / std::sqrt(2.0));
  return r;
}

}  // namespace mtorl::harness
