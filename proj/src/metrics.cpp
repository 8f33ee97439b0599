#include "minerwatch/metrics.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/distributions/students_t.hpp>

#include "minerwatch/error.hpp"

namespace minerwatch {

Metrics evaluate(std::span<const int> truth, std::span<const int> predicted, int n_classes) {
  if (truth.size() != predicted.size()) {
    throw Error(ErrorKind::invalid_argument, "truth and prediction lengths differ");
  }
  if (truth.empty()) throw Error(ErrorKind::invalid_argument, "cannot evaluate an empty prediction set");

  Metrics m;
  m.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= n_classes || predicted[i] < 0 || predicted[i] >= n_classes) {
      throw Error(ErrorKind::invalid_argument, "label outside 0.." + std::to_string(n_classes - 1));
    }
    ++m.confusion(truth[i], predicted[i]);
  }

  const Eigen::VectorXd support = m.confusion.rowwise().sum().cast<double>();
  const Eigen::VectorXd predicted_count = m.confusion.colwise().sum().transpose().cast<double>();
  const double total = support.sum();

  m.class_precision.resize(n_classes);
  m.class_recall.resize(n_classes);
  m.class_f1.resize(n_classes);
  for (int k = 0; k < n_classes; ++k) {
    const double tp = m.confusion(k, k);
    const double p = predicted_count[k] > 0 ? tp / predicted_count[k] : 0.0;
    const double r = support[k] > 0 ? tp / support[k] : 0.0;
    m.class_precision[k] = p;
    m.class_recall[k] = r;
    m.class_f1[k] = p + r > 0 ? 2 * p * r / (p + r) : 0.0;
  }

  m.accuracy = m.confusion.trace() / total;
  m.precision = support.dot(m.class_precision) / total;
  m.recall = support.dot(m.class_recall) / total;
  m.f1 = support.dot(m.class_f1) / total;
  return m;
}

double t_critical_95(std::size_t n) {
  if (n < 2) throw Error(ErrorKind::invalid_argument, "margin of error needs at least 2 runs");
  boost::math::students_t dist(static_cast<double>(n - 1));
  return boost::math::quantile(dist, 0.975);
}

MeanMargin mean_margin(std::span<const double> values) {
  const std::size_t n = values.size();
  const double t = t_critical_95(n);
  if (std::all_of(values.begin(), values.end(), [&](double v) { return v == values[0]; })) {
    return {values[0], 0.0};
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  return {mean, t * sd / std::sqrt(static_cast<double>(n))};
}

AggregateMetrics aggregate_runs(std::span<const Metrics> runs) {
  if (runs.size() < 2) throw Error(ErrorKind::invalid_argument, "margin of error needs at least 2 runs");
  std::vector<double> acc, prec, rec, f1;
  AggregateMetrics out;
  out.confusion = Eigen::MatrixXi::Zero(runs[0].confusion.rows(), runs[0].confusion.cols());
  for (const auto& m : runs) {
    acc.push_back(m.accuracy);
    prec.push_back(m.precision);
    rec.push_back(m.recall);
    f1.push_back(m.f1);
    if (m.confusion.rows() != out.confusion.rows()) {
      throw Error(ErrorKind::invalid_argument, "runs disagree on class count");
    }
    out.confusion += m.confusion;
  }
  out.accuracy = mean_margin(acc);
  out.precision = mean_margin(prec);
  out.recall = mean_margin(rec);
  out.f1 = mean_margin(f1);
  out.runs = runs.size();
  return out;
}

}  // namespace minerwatch
