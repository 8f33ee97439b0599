#include "minerwatch/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "minerwatch/dataset_io.hpp"
#include "minerwatch/error.hpp"
#include "minerwatch/forest.hpp"
#include "minerwatch/parallel.hpp"

namespace minerwatch {

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    out.reserve(kFeatureCount);
    for (const auto& e : all_events()) {
      for (auto stat : kStatisticNames) out.push_back(std::string(e.name) + "." + std::string(stat));
    }
    return out;
  }();
  return names;
}

FeatureSet FeatureSet::rows(std::span<const std::size_t> index) const {
  FeatureSet out;
  out.values.resize(static_cast<Eigen::Index>(index.size()), values.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = values.row(static_cast<Eigen::Index>(index[i]));
    out.ids.push_back(ids[index[i]]);
    out.tasks.push_back(tasks[index[i]]);
    out.subclasses.push_back(subclasses[index[i]]);
  }
  return out;
}

FeatureVector FeatureSet::vector(std::size_t row) const {
  return {values.row(static_cast<Eigen::Index>(row)).transpose(), FeatureLabel{tasks[row], subclasses[row]},
          ids[row]};
}

RawSample impute(const RawSample& sample) {
  RawSample out = sample;
  for (Eigen::Index c = 0; c < out.readings.cols(); ++c) {
    auto col = out.readings.col(c);
    double sum = 0.0;
    Eigen::Index present = 0;
    for (Eigen::Index r = 0; r < col.size(); ++r) {
      if (!is_missing(col[r])) {
        sum += col[r];
        ++present;
      }
    }
    const double fill = present > 0 ? sum / static_cast<double>(present) : 0.0;
    for (Eigen::Index r = 0; r < col.size(); ++r) {
      if (is_missing(col[r])) col[r] = fill;
    }
  }
  return out;
}

Eigen::VectorXd extract(const RawSample& sample) {
  const Eigen::Index events = sample.readings.cols();
  Eigen::VectorXd out(events * static_cast<Eigen::Index>(kStatisticCount));
  for (Eigen::Index e = 0; e < events; ++e) {
    const auto stats = series_statistics(sample.readings.col(e));
    for (std::size_t s = 0; s < kStatisticCount; ++s) {
      out[e * static_cast<Eigen::Index>(kStatisticCount) + static_cast<Eigen::Index>(s)] = stats[s];
    }
  }
  return out;
}

FeatureSet extract_all(const Dataset& dataset) {
  FeatureSet out;
  const auto n = dataset.samples.size();
  out.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(kFeatureCount));
  parallel_for(n, [&](std::size_t i) {
    out.values.row(static_cast<Eigen::Index>(i)) = extract(impute(dataset.samples[i].sample)).transpose();
  });
  for (const auto& s : dataset.samples) {
    out.ids.push_back(s.id);
    out.tasks.push_back(s.task);
    out.subclasses.push_back(s.subclass);
  }
  return out;
}

ScalerParams fit_scaler(const Eigen::Ref<const Eigen::MatrixXd>& train) {
  if (train.rows() == 0) throw Error(ErrorKind::invalid_argument, "cannot fit a scaler on an empty training set");
  ScalerParams p;
  p.mean = train.colwise().mean().transpose();
  p.stddev = ((train.rowwise() - p.mean.transpose()).array().square().colwise().mean()).sqrt().transpose();
  return p;
}

ScalerParams fit_scaler(const FeatureSet& train) { return fit_scaler(train.values); }

Eigen::MatrixXd apply_scaler(const ScalerParams& params, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (x.cols() != params.mean.size()) {
    throw Error(ErrorKind::invalid_argument, "scaler fitted on a different feature count");
  }
  Eigen::MatrixXd out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double sd = params.stddev[c];
    if (sd > 0) {
      out.col(c) = (x.col(c).array() - params.mean[c]) / sd;
    } else {
      out.col(c).setZero();
    }
  }
  return out;
}

FeatureVector apply_scaler(const ScalerParams& params, const FeatureVector& v) {
  FeatureVector out = v;
  out.values = apply_scaler(params, v.values.transpose()).transpose();
  return out;
}

std::size_t FeatureMask::count() const { return static_cast<std::size_t>(std::count(selected.begin(), selected.end(), true)); }

std::vector<Eigen::Index> FeatureMask::indices() const {
  std::vector<Eigen::Index> out;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (selected[i]) out.push_back(static_cast<Eigen::Index>(i));
  }
  return out;
}

FeatureMask rank_features(const Eigen::Ref<const Eigen::MatrixXd>& train, std::span<const int> labels,
                          const RankOptions& options) {
  const std::set<int> classes(labels.begin(), labels.end());
  if (classes.size() < 2) throw Error(ErrorKind::training, "importance undefined for a single-class training set");
  const int n_classes = *classes.rbegin() + 1;

  RFParams params;
  params.n_estimators = options.n_estimators;
  params.max_depth = std::nullopt;
  params.max_features = MaxFeatures::sqrt;
  params.bootstrap = true;
  params.random_state = options.seed;
  const auto forest = RandomForest::fit(params, train, labels, n_classes);

  FeatureMask mask;
  mask.importance = forest.feature_importances();
  if (!(mask.importance.sum() > 0)) throw Error(ErrorKind::training, "importance undefined: forest made no splits");
  const double threshold = mask.importance.mean();
  mask.selected.resize(static_cast<std::size_t>(mask.importance.size()));
  for (Eigen::Index i = 0; i < mask.importance.size(); ++i) {
    mask.selected[static_cast<std::size_t>(i)] = mask.importance[i] >= threshold;
  }
  return mask;
}

FeatureMask select_all(const FeatureMask& ranked) {
  FeatureMask out = ranked;
  std::fill(out.selected.begin(), out.selected.end(), true);
  return out;
}

FeatureMask select_first_psi(const FeatureMask& ranked, double psi_percent) {
  if (!(psi_percent > 0.0 && psi_percent <= 100.0)) {
    throw Error(ErrorKind::invalid_argument, "psi must be in (0, 100]");
  }
  const auto n = static_cast<std::size_t>(ranked.importance.size());
  const auto keep = static_cast<std::size_t>(std::floor(psi_percent / 100.0 * static_cast<double>(n) + 1e-9));
  if (keep == 0) throw Error(ErrorKind::invalid_argument, "psi selects no features");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ranked.importance[static_cast<Eigen::Index>(a)] < ranked.importance[static_cast<Eigen::Index>(b)];
  });

  FeatureMask out;
  out.importance = ranked.importance;
  out.selected.assign(n, false);
  for (std::size_t i = 0; i < keep; ++i) out.selected[order[i]] = true;
  return out;
}

Eigen::MatrixXd apply_mask(const FeatureMask& mask, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (static_cast<std::size_t>(x.cols()) != mask.selected.size()) {
    throw Error(ErrorKind::invalid_argument, "mask length does not match feature count");
  }
  const auto idx = mask.indices();
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(idx[j]);
  return out;
}

void write_features_csv(const FeatureSet& features, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << "sample_id,label";
  for (const auto& name : feature_names()) out << ',' << name;
  out << '\n';
  for (Eigen::Index r = 0; r < features.values.rows(); ++r) {
    const auto i = static_cast<std::size_t>(r);
    out << features.ids[i] << ',' << to_string(features.tasks[i]) << '/' << features.subclasses[i];
    for (Eigen::Index c = 0; c < features.values.cols(); ++c) out << ',' << format_number(features.values(r, c));
    out << '\n';
  }
}

}  // namespace minerwatch
