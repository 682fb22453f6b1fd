#include <algorithm>
#include <cmath>

#include "sparseprop/gradients.hpp"

namespace sparseprop {

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

DeviationStats gradient_deviation_stats(std::span<const double> g1, std::span<const double> g2) {
  if (g1.size() != g2.size()) throw ShapeMismatch("gradient vectors differ in length");
  std::vector<double> d(g1.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = std::abs(g1[i] - g2[i]);
  std::sort(d.begin(), d.end());
  DeviationStats s;
  s.median = quantile_sorted(d, 0.5);
  s.q_low = quantile_sorted(d, 0.025);
  s.q_high = quantile_sorted(d, 0.975);
  s.max = d.empty() ? 0.0 : d.back();
  return s;
}

template <typename T>
DeviationStats gradient_deviation_stats(const GradAccumulator<T>& g1, const GradAccumulator<T>& g2) {
  const auto a = g1.flat();
  const auto b = g2.flat();
  const std::vector<double> da(a.begin(), a.end());
  const std::vector<double> db(b.begin(), b.end());
  return gradient_deviation_stats(std::span<const double>(da), std::span<const double>(db));
}

template DeviationStats gradient_deviation_stats<float>(const GradAccumulator<float>&, const GradAccumulator<float>&);
template DeviationStats gradient_deviation_stats<double>(const GradAccumulator<double>&,
                                                         const GradAccumulator<double>&);

}  // namespace sparseprop
