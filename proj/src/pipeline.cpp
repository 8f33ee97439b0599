#include "minerwatch/pipeline.hpp"

#include "minerwatch/error.hpp"
#include "minerwatch/random.hpp"

namespace minerwatch {

std::string to_string(ClassifierKind k) { return k == ClassifierKind::rf ? "rf" : "svm"; }

ClassifierKind parse_classifier(const std::string& s) {
  if (s == "rf") return ClassifierKind::rf;
  if (s == "svm") return ClassifierKind::svm;
  throw Error(ErrorKind::invalid_argument, "unknown classifier '" + s + "'");
}

void LeakageAudit::record(std::string context, std::string stage, std::vector<std::string> ids) {
  std::lock_guard lock(mutex_);
  records_.push_back({std::move(context), std::move(stage), std::move(ids)});
}

std::vector<LeakageAudit::Record> LeakageAudit::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

Eigen::VectorXi Classifier::predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  return std::visit([&](const auto& m) { return m.predict(x); }, model_);
}

Eigen::MatrixXd Classifier::vote_fractions(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  return std::visit([&](const auto& m) { return m.vote_fractions(x); }, model_);
}

std::string describe(const Hyperparameters& p) {
  return std::visit([](const auto& v) { return describe(v); }, p);
}

Eigen::MatrixXd TrainedPipeline::transform(const Eigen::Ref<const Eigen::MatrixXd>& raw) const {
  return apply_mask(mask, apply_scaler(scaler, raw));
}

Eigen::VectorXi TrainedPipeline::predict(const Eigen::Ref<const Eigen::MatrixXd>& raw) const {
  return classifier.predict(transform(raw));
}

Eigen::MatrixXd TrainedPipeline::vote_fractions(const Eigen::Ref<const Eigen::MatrixXd>& raw) const {
  return classifier.vote_fractions(transform(raw));
}

TrainedPipeline train_pipeline(const FeatureSet& train, std::span<const int> labels, int n_classes,
                               const PipelineConfig& config, std::uint64_t seed, LeakageAudit* audit,
                               const std::string& audit_context) {
  if (static_cast<std::size_t>(train.size()) != labels.size()) {
    throw Error(ErrorKind::invalid_argument, "training rows and labels differ in length");
  }
  if (train.size() < 2) throw Error(ErrorKind::training, "need at least 2 training samples");

  TrainedPipeline out;
  if (audit) audit->record(audit_context, "scaler", train.ids);
  out.scaler = fit_scaler(train);
  const Eigen::MatrixXd scaled = apply_scaler(out.scaler, train.values);

  if (audit) audit->record(audit_context, "ranking", train.ids);
  const auto ranked = rank_features(scaled, labels, RankOptions{config.rank_trees, derive_seed(seed, "rank")});
  switch (config.selection) {
    case SelectionRule::mean_importance: out.mask = ranked; break;
    case SelectionRule::all: out.mask = select_all(ranked); break;
    case SelectionRule::least_important_psi: out.mask = select_first_psi(ranked, config.psi); break;
  }
  const Eigen::MatrixXd x = apply_mask(out.mask, scaled);

  const auto folds = stratified_kfold(train.subclasses, config.folds, derive_seed(seed, "cv"));
  if (config.classifier == ClassifierKind::rf) {
    auto grid = config.rf_grid;
    grid.random_state = seed;
    const auto search = grid_search_rf(grid.candidates(), x, labels, n_classes, folds);
    out.winner = search.best();
    out.cv_f1 = search.best_score();
    out.classifier = Classifier(RandomForest::fit(search.best(), x, labels, n_classes));
  } else {
    auto grid = config.svm_grid;
    grid.random_state = seed;
    const auto search = grid_search_svm(grid.candidates(), x, labels, n_classes, folds);
    out.winner = search.best();
    out.cv_f1 = search.best_score();
    out.classifier = Classifier(SvmModel::fit(search.best(), x, labels, n_classes));
  }
  return out;
}

}  // namespace minerwatch
