#pragma once

#include <cstdint>
#include <mutex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "minerwatch/features.hpp"
#include "minerwatch/forest.hpp"
#include "minerwatch/svm.hpp"
#include "minerwatch/validation.hpp"

namespace minerwatch {

enum class ClassifierKind { rf, svm };

std::string to_string(ClassifierKind k);
ClassifierKind parse_classifier(const std::string& s);

enum class SelectionRule {
  mean_importance,  // keep importance >= mean importance
  all,
  least_important_psi,  // first psi% in ascending importance
};

struct PipelineConfig {
  ClassifierKind classifier = ClassifierKind::rf;
  RFGrid rf_grid = RFGrid::full();
  SVMGrid svm_grid = SVMGrid::full();
  int folds = 5;
  int rank_trees = 100;
  SelectionRule selection = SelectionRule::mean_importance;
  double psi = 100.0;
};

/// Records which sample ids reached each fitting stage.
class LeakageAudit {
public:
  struct Record {
    std::string context;
    std::string stage;  // "split-train", "split-test", "scaler", "ranking"
    std::vector<std::string> ids;
  };

  void record(std::string context, std::string stage, std::vector<std::string> ids);
  std::vector<Record> records() const;

private:
  mutable std::mutex mutex_;
  std::vector<Record> records_;
};

class Classifier {
public:
  Classifier() = default;
  explicit Classifier(RandomForest forest) : model_(std::move(forest)) {}
  explicit Classifier(SvmModel svm) : model_(std::move(svm)) {}

  Eigen::VectorXi predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const;
  Eigen::MatrixXd vote_fractions(const Eigen::Ref<const Eigen::MatrixXd>& x) const;

  const std::variant<RandomForest, SvmModel>& model() const { return model_; }

private:
  std::variant<RandomForest, SvmModel> model_;
};

using Hyperparameters = std::variant<RFParams, SVMParams>;

std::string describe(const Hyperparameters& p);

/// A fitted scaler + feature mask + classifier, applied to raw 336-slot
/// feature rows.
struct TrainedPipeline {
  ScalerParams scaler;
  FeatureMask mask;
  Classifier classifier;
  Hyperparameters winner;
  double cv_f1 = 0.0;

  Eigen::MatrixXd transform(const Eigen::Ref<const Eigen::MatrixXd>& raw) const;
  Eigen::VectorXi predict(const Eigen::Ref<const Eigen::MatrixXd>& raw) const;
  Eigen::MatrixXd vote_fractions(const Eigen::Ref<const Eigen::MatrixXd>& raw) const;
};

/// Fit scaler on `train`, rank features, select, grid-search with stratified
/// k-fold (strata = subclass), then refit the winner on all of `train`.
/// `labels[i]` is the class of row i. `seed` feeds the ranking forest, the
/// folds and the classifier random_state.
TrainedPipeline train_pipeline(const FeatureSet& train, std::span<const int> labels, int n_classes,
                               const PipelineConfig& config, std::uint64_t seed, LeakageAudit* audit = nullptr,
                               const std::string& audit_context = {});

}  // namespace minerwatch
