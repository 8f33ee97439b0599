#include "minerwatch/validation.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <tuple>

#include "minerwatch/error.hpp"
#include "minerwatch/metrics.hpp"
#include "minerwatch/parallel.hpp"
#include "minerwatch/random.hpp"

namespace minerwatch {

namespace {

std::map<std::string, std::vector<std::size_t>> group_strata(std::span<const std::string> strata) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < strata.size(); ++i) groups[strata[i]].push_back(i);
  return groups;
}

Eigen::MatrixXd take_rows(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  return out;
}

std::vector<int> take(std::span<const int> y, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(y[r]);
  return out;
}

std::vector<std::size_t> complement(const std::vector<std::vector<std::size_t>>& folds, std::size_t skip) {
  std::vector<std::size_t> out;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    if (f != skip) out.insert(out.end(), folds[f].begin(), folds[f].end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> sorted_copy(const std::vector<std::size_t>& v) {
  auto out = v;
  std::sort(out.begin(), out.end());
  return out;
}

template <typename Params>
void pick_best(GridSearchResult<Params>& result) {
  result.best_index = 0;
  for (std::size_t c = 0; c < result.scores.size(); ++c) {
    auto& s = result.scores[c];
    s.mean_f1 = std::accumulate(s.fold_f1.begin(), s.fold_f1.end(), 0.0) / static_cast<double>(s.fold_f1.size());
    if (s.mean_f1 > result.scores[result.best_index].mean_f1) result.best_index = c;
  }
}

void check_grid_inputs(std::size_t n_candidates, const std::vector<std::vector<std::size_t>>& folds) {
  if (n_candidates == 0) throw Error(ErrorKind::invalid_argument, "empty parameter grid");
  if (folds.size() < 2) throw Error(ErrorKind::invalid_argument, "grid search needs at least 2 folds");
}

std::string format_value(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

Split stratified_split(std::span<const std::string> strata, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::invalid_argument, "test fraction must be in (0, 1)");
  }
  const auto min_members = static_cast<std::size_t>(std::ceil(1.0 / test_fraction - 1e-9));
  Split split;
  Rng rng(derive_seed(seed, "split"));
  for (auto& [name, members] : group_strata(strata)) {
    if (members.size() < min_members) {
      throw Error(ErrorKind::invalid_argument, "stratum '" + name + "' has " + std::to_string(members.size()) +
                                                   " members, needs at least " + std::to_string(min_members));
    }
    std::shuffle(members.begin(), members.end(), rng);
    auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(members.size()) * test_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, members.size() - 1);
    split.test.insert(split.test.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_test));
    split.train.insert(split.train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_test), members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const std::string> strata, int k,
                                                        std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::invalid_argument, "k-fold needs k >= 2");
  const auto folds_n = static_cast<std::size_t>(k);
  std::vector<std::vector<std::size_t>> folds(folds_n);
  Rng rng(derive_seed(seed, "kfold"));
  std::size_t offset = 0;
  for (auto& [name, members] : group_strata(strata)) {
    if (members.size() < folds_n) {
      throw Error(ErrorKind::invalid_argument, "stratum '" + name + "' has " + std::to_string(members.size()) +
                                                   " members, fewer than k=" + std::to_string(k));
    }
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t j = 0; j < members.size(); ++j) folds[(offset + j) % folds_n].push_back(members[j]);
    offset = (offset + members.size()) % folds_n;
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

RFGrid RFGrid::full() {
  return RFGrid{{10, 25, 50, 75, 100, 125, 150},
                {2, 3, 4, 5, 6, 7, std::nullopt},
                {MaxFeatures::sqrt, MaxFeatures::log2},
                {SplitCriterion::gini, SplitCriterion::entropy},
                {true, false},
                10};
}

RFGrid RFGrid::quick() {
  return RFGrid{{10, 25}, {3, std::nullopt}, {MaxFeatures::sqrt}, {SplitCriterion::gini}, {true}, 10};
}

std::vector<RFParams> RFGrid::candidates() const {
  std::vector<RFParams> out;
  for (int n : n_estimators)
    for (const auto& d : max_depth)
      for (auto mf : max_features)
        for (auto c : criterion)
          for (bool b : bootstrap) out.push_back(RFParams{n, d, mf, c, b, random_state});
  return out;
}

SVMGrid SVMGrid::full() {
  SVMGrid g;
  g.kernel = {Kernel::rbf, Kernel::poly, Kernel::sigmoid};
  for (int e = -3; e <= 5; ++e) g.C.push_back(std::pow(10.0, e));
  g.gamma.push_back(std::nullopt);
  for (int e = -7; e <= 3; ++e) g.gamma.push_back(std::pow(10.0, e));
  return g;
}

SVMGrid SVMGrid::quick() {
  SVMGrid g;
  g.kernel = {Kernel::rbf};
  g.C = {1.0, 100.0};
  g.gamma = {std::nullopt, 1e-3};
  return g;
}

std::vector<SVMParams> SVMGrid::candidates() const {
  std::vector<SVMParams> out;
  for (auto k : kernel)
    for (double c : C)
      for (const auto& g : gamma) {
        SVMParams p;
        p.kernel = k;
        p.C = c;
        p.gamma = g;
        p.degree = degree;
        p.random_state = random_state;
        out.push_back(p);
      }
  return out;
}

GridSearchResult<RFParams> grid_search_rf(const std::vector<RFParams>& candidates,
                                          const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> y,
                                          int n_classes, const std::vector<std::vector<std::size_t>>& folds) {
  check_grid_inputs(candidates.size(), folds);
  GridSearchResult<RFParams> result;
  result.candidates = candidates;
  result.scores.assign(candidates.size(), CandidateScore{0.0, std::vector<double>(folds.size(), 0.0)});

  using GroupKey = std::tuple<MaxFeatures, SplitCriterion, bool, std::uint64_t>;
  std::map<GroupKey, std::vector<std::size_t>> groups;
  std::vector<GroupKey> group_order;
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    const auto& p = candidates[c];
    if (p.n_estimators < 1) throw Error(ErrorKind::invalid_argument, "n_estimators must be >= 1");
    GroupKey key{p.max_features, p.criterion, p.bootstrap, p.random_state};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) group_order.push_back(key);
    it->second.push_back(c);
  }

  struct Task {
    const std::vector<std::size_t>* members;
    GroupKey key;
    std::size_t fold;
  };
  std::vector<Task> tasks;
  for (const auto& key : group_order) {
    for (std::size_t f = 0; f < folds.size(); ++f) tasks.push_back({&groups[key], key, f});
  }

  parallel_for(tasks.size(), [&](std::size_t ti) {
    const auto& task = tasks[ti];
    const auto& members = *task.members;

    RFParams grown;
    grown.max_features = std::get<0>(task.key);
    grown.criterion = std::get<1>(task.key);
    grown.bootstrap = std::get<2>(task.key);
    grown.random_state = std::get<3>(task.key);
    grown.n_estimators = 0;
    bool unlimited = false;
    int deepest = 0;
    // depth option (INT_MAX = unlimited) -> tree count -> candidate indices
    std::map<int, std::map<int, std::vector<std::size_t>>> checkpoints;
    for (auto c : members) {
      const auto& p = candidates[c];
      grown.n_estimators = std::max(grown.n_estimators, p.n_estimators);
      if (p.max_depth) {
        deepest = std::max(deepest, *p.max_depth);
      } else {
        unlimited = true;
      }
      checkpoints[p.max_depth.value_or(INT_MAX)][p.n_estimators].push_back(c);
    }
    grown.max_depth = unlimited ? std::nullopt : std::optional<int>(deepest);

    const auto train_rows = complement(folds, task.fold);
    const auto val_rows = sorted_copy(folds[task.fold]);
    const Eigen::MatrixXd x_train = take_rows(x, train_rows);
    const Eigen::MatrixXd x_val = take_rows(x, val_rows);
    const auto y_train = take(y, train_rows);
    const auto y_val = take(y, val_rows);
    const auto forest = RandomForest::fit(grown, x_train, y_train, n_classes);

    const auto n_val = static_cast<Eigen::Index>(val_rows.size());
    std::vector<int> depth_options;
    for (const auto& [d, _] : checkpoints) depth_options.push_back(d);
    std::vector<Eigen::MatrixXi> votes(depth_options.size(), Eigen::MatrixXi::Zero(n_val, n_classes));
    std::vector<int> path;
    std::vector<int> predicted(val_rows.size());

    for (std::size_t t = 0; t < forest.trees().size(); ++t) {
      const auto& nodes = forest.trees()[t].nodes;
      for (Eigen::Index r = 0; r < n_val; ++r) {
        path.clear();
        int i = 0;
        while (true) {
          path.push_back(nodes[i].majority);
          if (nodes[i].is_leaf()) break;
          i = x_val(r, nodes[i].feature) <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
        }
        for (std::size_t d = 0; d < depth_options.size(); ++d) {
          const auto stop = std::min<std::size_t>(static_cast<std::size_t>(depth_options[d]), path.size() - 1);
          ++votes[d](r, path[stop]);
        }
      }
      const int count = static_cast<int>(t + 1);
      for (std::size_t d = 0; d < depth_options.size(); ++d) {
        auto it = checkpoints[depth_options[d]].find(count);
        if (it == checkpoints[depth_options[d]].end()) continue;
        for (Eigen::Index r = 0; r < n_val; ++r) {
          Eigen::Index best = 0;
          votes[d].row(r).maxCoeff(&best);
          predicted[static_cast<std::size_t>(r)] = static_cast<int>(best);
        }
        const double f1 = evaluate(y_val, predicted, n_classes).f1;
        for (auto c : it->second) result.scores[c].fold_f1[task.fold] = f1;
      }
    }
  });

  pick_best(result);
  return result;
}

GridSearchResult<RFParams> grid_search_rf_naive(const std::vector<RFParams>& candidates,
                                                const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> y,
                                                int n_classes, const std::vector<std::vector<std::size_t>>& folds) {
  check_grid_inputs(candidates.size(), folds);
  GridSearchResult<RFParams> result;
  result.candidates = candidates;
  result.scores.assign(candidates.size(), CandidateScore{0.0, std::vector<double>(folds.size(), 0.0)});
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    for (std::size_t f = 0; f < folds.size(); ++f) {
      const auto train_rows = complement(folds, f);
      const auto val_rows = sorted_copy(folds[f]);
      const auto forest = RandomForest::fit(candidates[c], take_rows(x, train_rows), take(y, train_rows), n_classes);
      const Eigen::VectorXi pred = forest.predict(take_rows(x, val_rows));
      result.scores[c].fold_f1[f] =
          evaluate(take(y, val_rows), std::span<const int>(pred.data(), static_cast<std::size_t>(pred.size())), n_classes).f1;
    }
  }
  pick_best(result);
  return result;
}

GridSearchResult<SVMParams> grid_search_svm(const std::vector<SVMParams>& candidates,
                                            const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> y,
                                            int n_classes, const std::vector<std::vector<std::size_t>>& folds) {
  check_grid_inputs(candidates.size(), folds);
  GridSearchResult<SVMParams> result;
  result.candidates = candidates;
  result.scores.assign(candidates.size(), CandidateScore{0.0, std::vector<double>(folds.size(), 0.0)});
  parallel_for(candidates.size() * folds.size(), [&](std::size_t task) {
    const std::size_t c = task / folds.size();
    const std::size_t f = task % folds.size();
    const auto train_rows = complement(folds, f);
    const auto val_rows = sorted_copy(folds[f]);
    const auto model = SvmModel::fit(candidates[c], take_rows(x, train_rows), take(y, train_rows), n_classes);
    const Eigen::VectorXi pred = model.predict(take_rows(x, val_rows));
    result.scores[c].fold_f1[f] =
        evaluate(take(y, val_rows), std::span<const int>(pred.data(), static_cast<std::size_t>(pred.size())), n_classes).f1;
  });
  pick_best(result);
  return result;
}

std::string depth_label(const std::optional<int>& depth) { return depth ? std::to_string(*depth) : "none"; }

std::string gamma_label(const std::optional<double>& gamma) { return gamma ? format_value(*gamma) : "auto"; }

SelectionCounts count_selections(const RFGrid& grid, std::span<const RFParams> winners) {
  SelectionCounts out;
  auto tally = [&](const std::string& name, auto values, auto label, auto get) {
    std::vector<std::pair<std::string, int>> counts;
    for (const auto& v : values) {
      int n = 0;
      for (const auto& w : winners) n += get(w) == v ? 1 : 0;
      counts.emplace_back(label(v), n);
    }
    out.emplace_back(name, std::move(counts));
  };
  tally("bootstrap", grid.bootstrap, [](bool b) { return std::string(b ? "true" : "false"); },
        [](const RFParams& p) { return p.bootstrap; });
  tally("max_features", grid.max_features, [](MaxFeatures m) { return to_string(m); },
        [](const RFParams& p) { return p.max_features; });
  tally("max_depth", grid.max_depth, [](const std::optional<int>& d) { return depth_label(d); },
        [](const RFParams& p) { return p.max_depth; });
  tally("split_criterion", grid.criterion, [](SplitCriterion c) { return to_string(c); },
        [](const RFParams& p) { return p.criterion; });
  tally("n_estimators", grid.n_estimators, [](int n) { return std::to_string(n); },
        [](const RFParams& p) { return p.n_estimators; });
  return out;
}

SelectionCounts count_selections(const SVMGrid& grid, std::span<const SVMParams> winners) {
  SelectionCounts out;
  auto tally = [&](const std::string& name, auto values, auto label, auto get) {
    std::vector<std::pair<std::string, int>> counts;
    for (const auto& v : values) {
      int n = 0;
      for (const auto& w : winners) n += get(w) == v ? 1 : 0;
      counts.emplace_back(label(v), n);
    }
    out.emplace_back(name, std::move(counts));
  };
  tally("kernel", grid.kernel, [](Kernel k) { return to_string(k); }, [](const SVMParams& p) { return p.kernel; });
  tally("C", grid.C, [](double c) { return format_value(c); }, [](const SVMParams& p) { return p.C; });
  tally("gamma", grid.gamma, [](const std::optional<double>& g) { return gamma_label(g); },
        [](const SVMParams& p) { return p.gamma; });
  return out;
}

}  // namespace minerwatch
