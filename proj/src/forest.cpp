#include "minerwatch/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "minerwatch/error.hpp"
#include "minerwatch/parallel.hpp"
#include "minerwatch/random.hpp"

namespace minerwatch {

std::string to_string(MaxFeatures m) {
  switch (m) {
    case MaxFeatures::sqrt: return "sqrt";
    case MaxFeatures::log2: return "log2";
    case MaxFeatures::all: return "all";
  }
  return "?";
}

std::string to_string(SplitCriterion c) { return c == SplitCriterion::gini ? "gini" : "entropy"; }

MaxFeatures parse_max_features(const std::string& s) {
  if (s == "sqrt" || s == "auto") return MaxFeatures::sqrt;
  if (s == "log2") return MaxFeatures::log2;
  if (s == "all") return MaxFeatures::all;
  throw Error(ErrorKind::invalid_argument, "unknown max_features '" + s + "'");
}

SplitCriterion parse_criterion(const std::string& s) {
  if (s == "gini") return SplitCriterion::gini;
  if (s == "entropy") return SplitCriterion::entropy;
  throw Error(ErrorKind::invalid_argument, "unknown split criterion '" + s + "'");
}

std::string describe(const RFParams& p) {
  return "n_estimators=" + std::to_string(p.n_estimators) +
         " max_depth=" + (p.max_depth ? std::to_string(*p.max_depth) : std::string("none")) +
         " max_features=" + to_string(p.max_features) + " criterion=" + to_string(p.criterion) +
         " bootstrap=" + (p.bootstrap ? "true" : "false");
}

int features_per_split(MaxFeatures m, int n_features) {
  switch (m) {
    case MaxFeatures::sqrt: return std::max(1, static_cast<int>(std::sqrt(static_cast<double>(n_features))));
    case MaxFeatures::log2: return std::max(1, static_cast<int>(std::log2(static_cast<double>(n_features))));
    case MaxFeatures::all: return std::max(1, n_features);
  }
  return 1;
}

double impurity(SplitCriterion c, std::span<const int> class_counts, int total) {
  if (total <= 0) return 0.0;
  const double n = total;
  double acc = 0.0;
  if (c == SplitCriterion::gini) {
    for (int k : class_counts) acc += (k / n) * (k / n);
    return 1.0 - acc;
  }
  for (int k : class_counts) {
    if (k > 0) acc -= (k / n) * std::log2(k / n);
  }
  return acc;
}

int DecisionTree::predict(const Eigen::Ref<const Eigen::MatrixXd>& x, Eigen::Index row,
                          std::optional<int> max_depth) const {
  int i = 0;
  while (!nodes[i].is_leaf() && (!max_depth || nodes[i].depth < *max_depth)) {
    const auto& n = nodes[i];
    i = x(row, n.feature) <= n.threshold ? n.left : n.right;
  }
  return nodes[i].majority;
}

int DecisionTree::predict(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  int i = 0;
  while (!nodes[i].is_leaf()) {
    const auto& n = nodes[i];
    i = v[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[i].majority;
}

int DecisionTree::depth() const {
  int d = 0;
  for (const auto& n : nodes) d = std::max(d, n.depth);
  return d;
}

namespace {

struct Frame {
  std::size_t begin;
  std::size_t end;
  int node;
  std::uint64_t key;
};

struct ValueLabel {
  double value;
  int label;
};

/// Weighted child impurity n_l*I(l) + n_r*I(r).
double weighted_children(SplitCriterion c, std::span<const int> left, int n_left, std::span<const int> right,
                         int n_right) {
  return n_left * impurity(c, left, n_left) + n_right * impurity(c, right, n_right);
}

}  // namespace

DecisionTree fit_tree(const Eigen::Ref<const Eigen::MatrixXd>& x, std::span<const int> y, int n_classes,
                      std::span<const Eigen::Index> sample_rows, const TreeFitOptions& options,
                      Eigen::VectorXd* importance) {
  const int n_features = static_cast<int>(x.cols());
  const int mtry = features_per_split(options.max_features, n_features);
  const double total = static_cast<double>(sample_rows.size());

  DecisionTree tree;
  std::vector<Eigen::Index> rows(sample_rows.begin(), sample_rows.end());
  std::vector<int> counts(n_classes), left(n_classes), right(n_classes);
  std::vector<int> order(n_features);
  std::vector<ValueLabel> buffer;
  buffer.reserve(rows.size());

  tree.nodes.emplace_back();
  std::vector<Frame> stack{{0, rows.size(), 0, 1}};

  while (!stack.empty()) {
    const Frame f = stack.back();
    stack.pop_back();
    const int n = static_cast<int>(f.end - f.begin);

    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = f.begin; i < f.end; ++i) ++counts[y[rows[i]]];

    TreeNode& node = tree.nodes[f.node];
    node.n_samples = n;
    node.impurity = impurity(options.criterion, counts, n);
    node.majority = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    const int depth = node.depth;

    const bool pure = counts[node.majority] == n;
    if (pure || n < 2 || (options.max_depth && depth >= *options.max_depth)) continue;

    Rng rng(derive_seed(options.seed, f.key));
    std::iota(order.begin(), order.end(), 0);

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_score = std::numeric_limits<double>::infinity();
    int examined = 0;

    for (int j = 0; j < n_features && examined < mtry; ++j) {
      std::uniform_int_distribution<int> pick(j, n_features - 1);
      std::swap(order[j], order[pick(rng)]);
      const int feature = order[j];

      buffer.clear();
      for (std::size_t i = f.begin; i < f.end; ++i) buffer.push_back({x(rows[i], feature), y[rows[i]]});
      std::sort(buffer.begin(), buffer.end(),
                [](const ValueLabel& a, const ValueLabel& b) { return a.value < b.value; });
      if (buffer.front().value == buffer.back().value) continue;
      ++examined;

      std::fill(left.begin(), left.end(), 0);
      std::copy(counts.begin(), counts.end(), right.begin());
      for (int i = 0; i + 1 < n; ++i) {
        ++left[buffer[i].label];
        --right[buffer[i].label];
        const double lo = buffer[i].value;
        const double hi = buffer[i + 1].value;
        if (!(lo < hi)) continue;
        const double score = weighted_children(options.criterion, left, i + 1, right, n - i - 1);
        if (score < best_score) {
          best_score = score;
          best_feature = feature;
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid < hi)) mid = lo;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) continue;  // every feature constant here

    auto* first = rows.data() + f.begin;
    auto* last = rows.data() + f.end;
    auto* mid = std::partition(first, last, [&](Eigen::Index r) { return x(r, best_feature) <= best_threshold; });
    const std::size_t split = f.begin + static_cast<std::size_t>(mid - first);

    if (importance) {
      (*importance)[best_feature] += (n * node.impurity - best_score) / total;
    }

    const int left_id = static_cast<int>(tree.nodes.size());
    const int right_id = left_id + 1;
    {
      TreeNode& parent = tree.nodes[f.node];
      parent.feature = best_feature;
      parent.threshold = best_threshold;
      parent.left = left_id;
      parent.right = right_id;
    }
    tree.nodes.emplace_back().depth = depth + 1;
    tree.nodes.emplace_back().depth = depth + 1;
    stack.push_back({split, f.end, right_id, splitmix64(f.key * 2 + 1)});
    stack.push_back({f.begin, split, left_id, splitmix64(f.key * 2)});
  }
  return tree;
}

std::vector<Eigen::Index> bootstrap_indices(Eigen::Index n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
  std::vector<Eigen::Index> out(static_cast<std::size_t>(n));
  for (auto& v : out) v = pick(rng);
  return out;
}

RandomForest::RandomForest(RFParams params, int n_classes, int n_features, std::vector<DecisionTree> trees,
                           Eigen::VectorXd importances)
    : params_(params),
      n_classes_(n_classes),
      n_features_(n_features),
      trees_(std::move(trees)),
      importances_(std::move(importances)) {}

RandomForest RandomForest::fit(const RFParams& params, const Eigen::Ref<const Eigen::MatrixXd>& x,
                               std::span<const int> y, int n_classes) {
  const Eigen::Index n = x.rows();
  if (static_cast<std::size_t>(n) != y.size()) {
    throw Error(ErrorKind::invalid_argument, "feature rows and labels differ in length");
  }
  if (n < 2) throw Error(ErrorKind::training, "random forest needs at least 2 samples");
  if (params.n_estimators < 1) throw Error(ErrorKind::invalid_argument, "n_estimators must be >= 1");
  if (params.max_depth && *params.max_depth < 1) throw Error(ErrorKind::invalid_argument, "max_depth must be >= 1");
  std::set<int> distinct;
  for (int label : y) {
    if (label < 0 || label >= n_classes) throw Error(ErrorKind::invalid_argument, "label out of range");
    distinct.insert(label);
  }
  if (distinct.size() < 2) throw Error(ErrorKind::training, "random forest needs at least 2 classes");

  const auto n_trees = static_cast<std::size_t>(params.n_estimators);
  std::vector<DecisionTree> trees(n_trees);
  std::vector<Eigen::VectorXd> per_tree(n_trees);

  parallel_for(n_trees, [&](std::size_t t) {
    const auto tree_seed = derive_seed(params.random_state, t);
    std::vector<Eigen::Index> rows;
    if (params.bootstrap) {
      rows = bootstrap_indices(n, derive_seed(tree_seed, "bootstrap"));
    } else {
      rows.resize(static_cast<std::size_t>(n));
      std::iota(rows.begin(), rows.end(), Eigen::Index{0});
    }
    TreeFitOptions opts{params.max_depth, params.max_features, params.criterion, tree_seed};
    per_tree[t] = Eigen::VectorXd::Zero(x.cols());
    trees[t] = fit_tree(x, y, n_classes, rows, opts, &per_tree[t]);
  });

  Eigen::VectorXd importances = Eigen::VectorXd::Zero(x.cols());
  int contributing = 0;
  for (const auto& imp : per_tree) {
    const double s = imp.sum();
    if (s > 0) {
      importances += imp / s;
      ++contributing;
    }
  }
  if (contributing > 0) importances /= importances.sum();

  return RandomForest(params, n_classes, static_cast<int>(x.cols()), std::move(trees), std::move(importances));
}

Eigen::MatrixXd RandomForest::vote_fractions(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  Eigen::MatrixXd votes = Eigen::MatrixXd::Zero(x.rows(), n_classes_);
  for (const auto& tree : trees_) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) votes(r, tree.predict(x, r)) += 1.0;
  }
  if (!trees_.empty()) votes /= static_cast<double>(trees_.size());
  return votes;
}

Eigen::VectorXi RandomForest::predict(const Eigen::Ref<const Eigen::MatrixXd>& x) const {
  const Eigen::MatrixXd votes = vote_fractions(x);
  Eigen::VectorXi out(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    Eigen::Index best = 0;
    votes.row(r).maxCoeff(&best);  // first maximum wins
    out[r] = static_cast<int>(best);
  }
  return out;
}

}  // namespace minerwatch
