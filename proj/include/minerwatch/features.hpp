#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "minerwatch/events.hpp"
#include "minerwatch/statistics.hpp"

namespace minerwatch {

inline constexpr std::size_t kFeatureCount = kEventCount * kStatisticCount;  // 336

/// Index of (event, statistic) in a feature vector: event-major.
constexpr std::size_t feature_index(std::size_t event, StatisticKind stat) {
  return event * kStatisticCount + static_cast<std::size_t>(stat);
}

/// "<event>.<stat>" for every slot.
const std::vector<std::string>& feature_names();

struct FeatureLabel {
  Task task;
  std::string subclass;
};

struct FeatureVector {
  Eigen::VectorXd values;
  std::optional<FeatureLabel> label;
  std::string sample_id;
};

/// Row-per-sample feature table.
struct FeatureSet {
  Eigen::MatrixXd values;  // n x features
  std::vector<std::string> ids;
  std::vector<Task> tasks;
  std::vector<std::string> subclasses;

  Eigen::Index size() const { return values.rows(); }
  FeatureSet rows(std::span<const std::size_t> index) const;
  FeatureVector vector(std::size_t row) const;
};

/// Replaces each NaN by the mean of the non-NaN readings of its event;
/// an all-NaN column becomes zeros.
RawSample impute(const RawSample& sample);

/// 28 x 12 statistics of an imputed sample.
Eigen::VectorXd extract(const RawSample& sample);

/// impute + extract over a dataset, in dataset order.
FeatureSet extract_all(const Dataset& dataset);

struct ScalerParams {
  Eigen::VectorXd mean;
  Eigen::VectorXd stddev;  // population
};

/// Throws Error(invalid_argument) on an empty training set.
ScalerParams fit_scaler(const Eigen::Ref<const Eigen::MatrixXd>& train);
ScalerParams fit_scaler(const FeatureSet& train);

/// (x - mean) / stddev per feature; zero-stddev features map to 0.
Eigen::MatrixXd apply_scaler(const ScalerParams& params, const Eigen::Ref<const Eigen::MatrixXd>& x);
FeatureVector apply_scaler(const ScalerParams& params, const FeatureVector& v);

struct FeatureMask {
  std::vector<bool> selected;
  Eigen::VectorXd importance;  // non-negative, sums to 1

  std::size_t count() const;
  std::vector<Eigen::Index> indices() const;
};

struct RankOptions {
  int n_estimators = 100;
  std::uint64_t seed = 10;
};

/// Mean-decrease-in-impurity importances from an auxiliary forest fitted on
/// the (scaled) training rows against `labels`. The default mask keeps
/// features whose importance is at least the mean importance.
FeatureMask rank_features(const Eigen::Ref<const Eigen::MatrixXd>& train, std::span<const int> labels,
                          const RankOptions& options = {});

/// Mask keeping everything, importances carried over.
FeatureMask select_all(const FeatureMask& ranked);

/// Keeps the floor(psi% * n) least important features (ties by index).
FeatureMask select_first_psi(const FeatureMask& ranked, double psi_percent);

/// Columns of `x` selected by `mask`.
Eigen::MatrixXd apply_mask(const FeatureMask& mask, const Eigen::Ref<const Eigen::MatrixXd>& x);

/// CSV dump: header `sample_id,label,<event>.<stat>...`.
void write_features_csv(const FeatureSet& features, const std::filesystem::path& path);

}  // namespace minerwatch
