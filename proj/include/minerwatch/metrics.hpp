#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace minerwatch {

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;  // support-weighted over classes
  double recall = 0.0;
  double f1 = 0.0;
  Eigen::MatrixXi confusion;  // rows = truth, cols = prediction
  Eigen::VectorXd class_precision;
  Eigen::VectorXd class_recall;
  Eigen::VectorXd class_f1;
};

/// Per-class scores use 0 for 0/0. Labels must lie in [0, n_classes).
Metrics evaluate(std::span<const int> truth, std::span<const int> predicted, int n_classes);

struct MeanMargin {
  double mean = 0.0;
  double margin = 0.0;  // half-width of the 95% confidence interval
};

struct AggregateMetrics {
  MeanMargin accuracy;
  MeanMargin precision;
  MeanMargin recall;
  MeanMargin f1;
  Eigen::MatrixXi confusion;  // elementwise sum over runs
  std::size_t runs = 0;
};

/// Two-sided Student-t quantile t(0.975, n-1) used for the margins.
double t_critical_95(std::size_t n);

/// Mean and t(0.975, n-1) * s / sqrt(n) of the values. Requires n >= 2.
MeanMargin mean_margin(std::span<const double> values);

AggregateMetrics aggregate_runs(std::span<const Metrics> runs);

}  // namespace minerwatch
