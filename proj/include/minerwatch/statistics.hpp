#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string_view>

#include <Eigen/Core>

namespace minerwatch {

inline constexpr std::size_t kStatisticCount = 12;

/// Per-event summary statistics, in feature order.
enum class StatisticKind : std::size_t {
  q20,
  q40,
  q60,
  q80,
  sigma1,
  sigma2,
  sigma3,
  skewness,
  kurtosis,
  mean_arith,
  mean_geom,
  variance,
};

constexpr std::array<std::string_view, kStatisticCount> kStatisticNames{
    "q20",    "q40",      "q60",      "q80",        "sigma1",    "sigma2",
    "sigma3", "skewness", "kurtosis", "mean_arith", "mean_geom", "variance"};

constexpr std::string_view to_string(StatisticKind k) {
  return kStatisticNames[static_cast<std::size_t>(k)];
}

/// Quantile of an ascending-sorted range by linear interpolation between the
/// order statistics at position p*(n-1).
template <typename Derived>
typename Derived::Scalar sorted_quantile(const Eigen::DenseBase<Derived>& sorted,
                                         typename Derived::Scalar p) {
  using Scalar = typename Derived::Scalar;
  const auto n = sorted.size();
  if (n == 1) return sorted(0);
  const Scalar pos = p * static_cast<Scalar>(n - 1);
  const auto lo = static_cast<Eigen::Index>(std::floor(pos));
  const auto hi = std::min<Eigen::Index>(lo + 1, n - 1);
  const Scalar frac = pos - static_cast<Scalar>(lo);
  return sorted(lo) + frac * (sorted(hi) - sorted(lo));
}

/// The twelve statistics of one non-empty series of non-negative values.
///
/// sigma-k is mean + k * population stddev. Skewness is m3 / m2^1.5 and
/// kurtosis is the excess m4 / m2^2 - 3, both 0 for a constant series.
/// Variance divides by n. The geometric mean is 0 when any element is 0.
template <typename Derived>
std::array<typename Derived::Scalar, kStatisticCount> series_statistics(
    const Eigen::DenseBase<Derived>& series) {
  using Scalar = typename Derived::Scalar;
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::array<Scalar, kStatisticCount> out{};
  const auto n = series.size();
  if (n == 0) return out;

  Vec sorted = series.derived().reshaped();
  std::sort(sorted.data(), sorted.data() + n);

  const auto at = [&out](StatisticKind k) -> Scalar& { return out[static_cast<std::size_t>(k)]; };
  at(StatisticKind::q20) = sorted_quantile(sorted, Scalar(0.2));
  at(StatisticKind::q40) = sorted_quantile(sorted, Scalar(0.4));
  at(StatisticKind::q60) = sorted_quantile(sorted, Scalar(0.6));
  at(StatisticKind::q80) = sorted_quantile(sorted, Scalar(0.8));

  const bool constant = sorted(0) == sorted(n - 1);
  const Scalar mean = constant ? sorted(0) : sorted.mean();
  Scalar m2 = 0, m3 = 0, m4 = 0;
  if (!constant) {
    const Vec d = sorted.array() - mean;
    const Vec d2 = d.array().square();
    m2 = d2.mean();
    m3 = (d2.array() * d.array()).mean();
    m4 = d2.array().square().mean();
  }
  const Scalar sd = std::sqrt(m2);

  at(StatisticKind::sigma1) = mean + sd;
  at(StatisticKind::sigma2) = mean + 2 * sd;
  at(StatisticKind::sigma3) = mean + 3 * sd;
  at(StatisticKind::skewness) = m2 > 0 ? m3 / std::pow(m2, Scalar(1.5)) : Scalar(0);
  at(StatisticKind::kurtosis) = m2 > 0 ? m4 / (m2 * m2) - Scalar(3) : Scalar(0);
  at(StatisticKind::mean_arith) = mean;
  if (sorted(0) <= 0) {
    at(StatisticKind::mean_geom) = 0;
  } else if (constant) {
    at(StatisticKind::mean_geom) = sorted(0);
  } else {
    at(StatisticKind::mean_geom) = std::exp(sorted.array().log().mean());
  }
  at(StatisticKind::variance) = m2;
  return out;
}

}  // namespace minerwatch
