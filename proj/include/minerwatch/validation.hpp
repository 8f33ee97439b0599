#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "minerwatch/forest.hpp"
#include "minerwatch/svm.hpp"

namespace minerwatch {

struct Split {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Per-stratum shuffled partition. Each stratum contributes
/// round(n_s * test_fraction) members to the test side. Throws naming the
/// stratum when it has fewer than ceil(1 / test_fraction) members.
Split stratified_split(std::span<const std::string> strata, double test_fraction, std::uint64_t seed);

/// k disjoint folds covering every index; per-stratum counts across folds
/// differ by at most one. Requires k >= 2 and every stratum >= k.
std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const std::string> strata, int k,
                                                        std::uint64_t seed);

struct RFGrid {
  std::vector<int> n_estimators;
  std::vector<std::optional<int>> max_depth;
  std::vector<MaxFeatures> max_features;
  std::vector<SplitCriterion> criterion;
  std::vector<bool> bootstrap;
  std::uint64_t random_state = 10;

  /// Validated hyper-parameter ranges of the random forest.
  static RFGrid full();
  /// A few candidates, for smoke tests and live calibration.
  static RFGrid quick();

  /// Enumeration order: n_estimators outermost, then max_depth,
  /// max_features, criterion, bootstrap.
  std::vector<RFParams> candidates() const;
};

struct SVMGrid {
  std::vector<Kernel> kernel;
  std::vector<double> C;
  std::vector<std::optional<double>> gamma;
  int degree = 3;
  std::uint64_t random_state = 10;

  static SVMGrid full();
  static SVMGrid quick();
  std::vector<SVMParams> candidates() const;
};

struct CandidateScore {
  double mean_f1 = 0.0;
  std::vector<double> fold_f1;
};

template <typename Params>
struct GridSearchResult {
  std::vector<Params> candidates;
  std::vector<CandidateScore> scores;
  std::size_t best_index = 0;

  const Params& best() const { return candidates[best_index]; }
  double best_score() const { return scores[best_index].mean_f1; }
};

/// Cross-validated mean F1 of every candidate over the given folds (indices
/// into the rows of x); best = highest mean, ties to the earliest candidate.
///
/// Candidates sharing max_features, criterion, bootstrap and random_state are
/// scored from one forest of the largest tree count grown to the largest
/// depth: tree seeds depend only on the tree index and node RNG only on the
/// node path, so every smaller forest is a prefix and every shallower tree a
/// truncation. Scores equal fitting each candidate separately.
GridSearchResult<RFParams> grid_search_rf(const std::vector<RFParams>& candidates,
                                          const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> y,
                                          int n_classes, const std::vector<std::vector<std::size_t>>& folds);

/// Reference implementation fitting one forest per candidate and fold.
GridSearchResult<RFParams> grid_search_rf_naive(const std::vector<RFParams>& candidates,
                                                const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> y,
                                                int n_classes, const std::vector<std::vector<std::size_t>>& folds);

GridSearchResult<SVMParams> grid_search_svm(const std::vector<SVMParams>& candidates,
                                            const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> y,
                                            int n_classes, const std::vector<std::vector<std::size_t>>& folds);

/// Winner counts per parameter, in grid value order (every grid value listed,
/// zero when never selected).
using SelectionCounts = std::vector<std::pair<std::string, std::vector<std::pair<std::string, int>>>>;

SelectionCounts count_selections(const RFGrid& grid, std::span<const RFParams> winners);
SelectionCounts count_selections(const SVMGrid& grid, std::span<const SVMParams> winners);

std::string depth_label(const std::optional<int>& depth);
std::string gamma_label(const std::optional<double>& gamma);

}  // namespace minerwatch
