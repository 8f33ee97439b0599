#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace minerwatch {

enum class MaxFeatures { sqrt, log2, all };
enum class SplitCriterion { gini, entropy };

std::string to_string(MaxFeatures m);
std::string to_string(SplitCriterion c);
MaxFeatures parse_max_features(const std::string& s);
SplitCriterion parse_criterion(const std::string& s);

struct RFParams {
  int n_estimators = 100;
  std::optional<int> max_depth;  // nullopt = grow until pure
  MaxFeatures max_features = MaxFeatures::sqrt;
  SplitCriterion criterion = SplitCriterion::gini;
  bool bootstrap = true;
  std::uint64_t random_state = 10;

  bool operator==(const RFParams&) const = default;
};

std::string describe(const RFParams& p);

/// Number of candidate features per split for `n_features` inputs.
int features_per_split(MaxFeatures m, int n_features);

double impurity(SplitCriterion c, std::span<const int> class_counts, int total);

struct TreeNode {
  int feature = -1;  // -1 for a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int majority = 0;  // prediction if the walk stops here
  int depth = 0;
  int n_samples = 0;
  double impurity = 0.0;

  bool is_leaf() const { return feature < 0; }
};

/// CART classification tree. Rows go left when x[feature] <= threshold.
///
/// The candidate features examined at a node are drawn from an RNG seeded by
/// (tree seed, node path), so a tree grown with a depth cap equals the
/// uncapped tree cut at that depth.
struct DecisionTree {
  std::vector<TreeNode> nodes;

  /// Predicted class for row `row` of `x`, stopping at `max_depth` if set.
  int predict(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::Index row,
              std::optional<int> max_depth = std::nullopt) const;
  int predict(const Eigen::Ref<const Eigen::VectorXd>& v) const;

  int depth() const;
};

struct TreeFitOptions {
  std::optional<int> max_depth;
  MaxFeatures max_features = MaxFeatures::sqrt;
  SplitCriterion criterion = SplitCriterion::gini;
  std::uint64_t seed = 0;
};

/// Fits one tree on the rows listed in `sample_rows` (repeats allowed).
/// Per-feature impurity decrease weighted by node size is added to
/// `importance` when given.
DecisionTree fit_tree(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> y, int n_classes,
                      std::span<const Eigen::Index> sample_rows, const TreeFitOptions& options,
                      Eigen::VectorXd* importance = nullptr);

/// n draws with replacement from [0, n).
std::vector<Eigen::Index> bootstrap_indices(Eigen::Index n, std::uint64_t seed);

class RandomForest {
public:
  RandomForest() = default;
  RandomForest(RFParams params, int n_classes, int n_features, std::vector<DecisionTree> trees,
               Eigen::VectorXd importances);

  /// Requires >= 2 samples and >= 2 distinct classes among `y` (labels in
  /// [0, n_classes)). Trees are trained in parallel; output is identical for
  /// any thread count.
  static RandomForest fit(const RFParams& params, const Eigen::Ref<const Eigen::MatrixXd>& x,
                          std::span<const int> y, int n_classes);

  const RFParams& params() const { return params_; }
  int n_classes() const { return n_classes_; }
  int n_features() const { return n_features_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }

  /// Majority vote, ties to the lowest class index.
  Eigen::VectorXi predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

  /// n x n_classes fraction of trees voting for each class.
  Eigen::MatrixXd vote_fractions(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

  /// Mean decrease in impurity, normalized to sum to 1.
  const Eigen::VectorXd& feature_importances() const { return importances_; }

private:
  RFParams params_;
  int n_classes_ = 0;
  int n_features_ = 0;
  std::vector<DecisionTree> trees_;
  Eigen::VectorXd importances_;
};

}  // namespace minerwatch
