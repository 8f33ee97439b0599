#include "minerwatch/model_bundle.hpp"

#include <algorithm>
#include <fstream>

#include "minerwatch/error.hpp"
#include "minerwatch/events.hpp"

namespace minerwatch {

namespace {

using json = nlohmann::json;

json vec(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::VectorXd to_vector(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

json rf_params(const RFParams& p) {
  return {{"n_estimators", p.n_estimators},
          {"max_depth", p.max_depth ? json(*p.max_depth) : json(nullptr)},
          {"max_features", to_string(p.max_features)},
          {"criterion", to_string(p.criterion)},
          {"bootstrap", p.bootstrap},
          {"random_state", p.random_state}};
}

RFParams rf_params(const json& j) {
  RFParams p;
  p.n_estimators = j.at("n_estimators").get<int>();
  if (!j.at("max_depth").is_null()) p.max_depth = j.at("max_depth").get<int>();
  p.max_features = parse_max_features(j.at("max_features").get<std::string>());
  p.criterion = parse_criterion(j.at("criterion").get<std::string>());
  p.bootstrap = j.at("bootstrap").get<bool>();
  p.random_state = j.at("random_state").get<std::uint64_t>();
  return p;
}

json svm_params(const SVMParams& p) {
  return {{"kernel", to_string(p.kernel)},
          {"C", p.C},
          {"gamma", p.gamma ? json(*p.gamma) : json(nullptr)},
          {"degree", p.degree},
          {"coef0", p.coef0},
          {"random_state", p.random_state},
          {"tolerance", p.tolerance},
          {"max_iterations", p.max_iterations}};
}

SVMParams svm_params(const json& j) {
  SVMParams p;
  p.kernel = parse_kernel(j.at("kernel").get<std::string>());
  p.C = j.at("C").get<double>();
  if (!j.at("gamma").is_null()) p.gamma = j.at("gamma").get<double>();
  p.degree = j.at("degree").get<int>();
  p.coef0 = j.at("coef0").get<double>();
  p.random_state = j.at("random_state").get<std::uint64_t>();
  p.tolerance = j.at("tolerance").get<double>();
  p.max_iterations = j.at("max_iterations").get<long>();
  return p;
}

// Trees are stored column-wise: one array per node field.
json tree_json(const DecisionTree& t) {
  json feature = json::array(), threshold = json::array(), left = json::array(), right = json::array(),
       majority = json::array(), depth = json::array(), n_samples = json::array(), imp = json::array();
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    majority.push_back(n.majority);
    depth.push_back(n.depth);
    n_samples.push_back(n.n_samples);
    imp.push_back(n.impurity);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left},           {"right", right},
          {"majority", majority}, {"depth", depth},       {"n_samples", n_samples}, {"impurity", imp}};
}

DecisionTree tree_from_json(const json& j, int n_features, int n_classes) {
  const auto feature = j.at("feature").get<std::vector<int>>();
  const auto threshold = j.at("threshold").get<std::vector<double>>();
  const auto left = j.at("left").get<std::vector<int>>();
  const auto right = j.at("right").get<std::vector<int>>();
  const auto majority = j.at("majority").get<std::vector<int>>();
  const auto depth = j.at("depth").get<std::vector<int>>();
  const auto n_samples = j.at("n_samples").get<std::vector<int>>();
  const auto imp = j.at("impurity").get<std::vector<double>>();
  const std::size_t n = feature.size();
  if (threshold.size() != n || left.size() != n || right.size() != n || majority.size() != n ||
      depth.size() != n || n_samples.size() != n || imp.size() != n || n == 0) {
    throw Error(ErrorKind::format, "model file: inconsistent tree arrays");
  }
  DecisionTree t;
  t.nodes.resize(n);
  const int count = static_cast<int>(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = t.nodes[i];
    node = {feature[i], threshold[i], left[i], right[i], majority[i], depth[i], n_samples[i], imp[i]};
    if (node.feature >= n_features || node.majority < 0 || node.majority >= n_classes ||
        (!node.is_leaf() && (node.left <= static_cast<int>(i) || node.left >= count ||
                             node.right <= static_cast<int>(i) || node.right >= count))) {
      throw Error(ErrorKind::format, "model file: malformed tree node");
    }
  }
  return t;
}

json classifier_json(const Classifier& c) {
  if (const auto* rf = std::get_if<RandomForest>(&c.model())) {
    json trees = json::array();
    for (const auto& t : rf->trees()) trees.push_back(tree_json(t));
    return {{"kind", "rf"},
            {"params", rf_params(rf->params())},
            {"n_classes", rf->n_classes()},
            {"n_features", rf->n_features()},
            {"importances", vec(rf->feature_importances())},
            {"trees", trees}};
  }
  const auto& svm = std::get<SvmModel>(c.model());
  json pairs = json::array();
  for (const auto& p : svm.pairs()) {
    json sv = json::array();
    for (Eigen::Index i = 0; i < p.svm.support_vectors.rows(); ++i) {
      sv.push_back(vec(p.svm.support_vectors.row(i).transpose()));
    }
    pairs.push_back({{"positive", p.positive},
                     {"negative", p.negative},
                     {"rho", p.svm.rho},
                     {"converged", p.svm.converged},
                     {"coef", vec(p.svm.coef)},
                     {"support_vectors", sv}});
  }
  return {{"kind", "svm"},
          {"params", svm_params(svm.params())},
          {"gamma_value", svm.gamma()},
          {"n_classes", svm.n_classes()},
          {"pairs", pairs}};
}

Classifier classifier_from_json(const json& j, std::size_t n_inputs) {
  const auto kind = j.at("kind").get<std::string>();
  const int n_classes = j.at("n_classes").get<int>();
  if (n_classes < 2) throw Error(ErrorKind::format, "model file: fewer than 2 classes");
  if (kind == "rf") {
    const int n_features = j.at("n_features").get<int>();
    if (static_cast<std::size_t>(n_features) != n_inputs) {
      throw Error(ErrorKind::format, "model file: forest input width differs from feature mask");
    }
    std::vector<DecisionTree> trees;
    for (const auto& t : j.at("trees")) trees.push_back(tree_from_json(t, n_features, n_classes));
    return Classifier(RandomForest(rf_params(j.at("params")), n_classes, n_features, std::move(trees),
                                   to_vector(j.at("importances"))));
  }
  if (kind == "svm") {
    std::vector<SvmModel::Pair> pairs;
    for (const auto& p : j.at("pairs")) {
      SvmModel::Pair pair;
      pair.positive = p.at("positive").get<int>();
      pair.negative = p.at("negative").get<int>();
      pair.svm.rho = p.at("rho").get<double>();
      pair.svm.converged = p.at("converged").get<bool>();
      pair.svm.coef = to_vector(p.at("coef"));
      const auto& sv = p.at("support_vectors");
      pair.svm.support_vectors.resize(static_cast<Eigen::Index>(sv.size()), static_cast<Eigen::Index>(n_inputs));
      for (std::size_t i = 0; i < sv.size(); ++i) {
        const auto row = to_vector(sv[i]);
        if (static_cast<std::size_t>(row.size()) != n_inputs) {
          throw Error(ErrorKind::format, "model file: support vector width differs from feature mask");
        }
        pair.svm.support_vectors.row(static_cast<Eigen::Index>(i)) = row.transpose();
      }
      if (pair.svm.coef.size() != pair.svm.support_vectors.rows()) {
        throw Error(ErrorKind::format, "model file: coefficient count differs from support vectors");
      }
      pairs.push_back(std::move(pair));
    }
    return Classifier(SvmModel(svm_params(j.at("params")), j.at("gamma_value").get<double>(), n_classes,
                               std::move(pairs)));
  }
  throw Error(ErrorKind::format, "model file: unknown classifier kind '" + kind + "'");
}

Hyperparameters winner_of(const Classifier& c) {
  if (const auto* rf = std::get_if<RandomForest>(&c.model())) return rf->params();
  return std::get<SvmModel>(c.model()).params();
}

}  // namespace

std::optional<int> ModelBundle::positive_class() const {
  if (target != "binary") return std::nullopt;
  auto it = std::find(classes.begin(), classes.end(), "mining");
  if (it == classes.end()) return std::nullopt;
  return static_cast<int>(it - classes.begin());
}

nlohmann::json to_json(const ModelBundle& b) {
  std::vector<std::string> events;
  for (const auto& e : all_events()) events.emplace_back(e.name);
  std::vector<int> selected;
  for (bool s : b.pipeline.mask.selected) selected.push_back(s ? 1 : 0);
  const auto& p = b.provenance;
  return {
      {"format", "minerwatch-model"},
      {"version", kModelFormatVersion},
      {"target", b.target},
      {"classes", b.classes},
      {"positive_class", b.positive_class() ? json(*b.positive_class()) : json(nullptr)},
      {"events", events},
      {"scaler", {{"mean", vec(b.pipeline.scaler.mean)}, {"stddev", vec(b.pipeline.scaler.stddev)}}},
      {"mask", {{"selected", selected}, {"importance", vec(b.pipeline.mask.importance)}}},
      {"classifier", classifier_json(b.pipeline.classifier)},
      {"provenance",
       {{"seed", p.seed},
        {"winner", p.winner},
        {"cv_f1", p.cv_f1},
        {"machine_id", p.machine_id},
        {"n_train", p.n_train},
        {"window_s", p.window_s},
        {"rate_hz", p.rate_hz}}},
  };
}

ModelBundle model_from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string{}) != "minerwatch-model") {
      throw Error(ErrorKind::format, "not a minerwatch model file");
    }
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw Error(ErrorKind::format, "model format version " + std::to_string(version) + " is not supported (expected " +
                                         std::to_string(kModelFormatVersion) + ")");
    }
    const auto events = j.at("events").get<std::vector<std::string>>();
    if (events.size() != kEventCount) throw Error(ErrorKind::format, "model file: event list has wrong length");
    for (std::size_t e = 0; e < kEventCount; ++e) {
      if (events[e] != all_events()[e].name) throw Error(ErrorKind::format, "model file: event order differs");
    }

    ModelBundle b;
    b.target = j.at("target").get<std::string>();
    b.classes = j.at("classes").get<std::vector<std::string>>();
    auto& pipe = b.pipeline;
    pipe.scaler.mean = to_vector(j.at("scaler").at("mean"));
    pipe.scaler.stddev = to_vector(j.at("scaler").at("stddev"));
    const auto selected = j.at("mask").at("selected").get<std::vector<int>>();
    pipe.mask.importance = to_vector(j.at("mask").at("importance"));
    for (int s : selected) pipe.mask.selected.push_back(s != 0);
    if (pipe.scaler.mean.size() != static_cast<Eigen::Index>(kFeatureCount) ||
        pipe.scaler.stddev.size() != static_cast<Eigen::Index>(kFeatureCount) ||
        pipe.mask.selected.size() != kFeatureCount ||
        pipe.mask.importance.size() != static_cast<Eigen::Index>(kFeatureCount)) {
      throw Error(ErrorKind::format, "model file: scaler or mask has wrong width");
    }
    if (pipe.mask.count() == 0) throw Error(ErrorKind::format, "model file: empty feature mask");
    pipe.classifier = classifier_from_json(j.at("classifier"), pipe.mask.count());
    if (static_cast<std::size_t>(j.at("classifier").at("n_classes").get<int>()) != b.classes.size()) {
      throw Error(ErrorKind::format, "model file: class count differs from label dictionary");
    }
    pipe.winner = winner_of(pipe.classifier);

    const auto& p = j.at("provenance");
    b.provenance.seed = p.at("seed").get<std::uint64_t>();
    b.provenance.winner = p.at("winner").get<std::string>();
    b.provenance.cv_f1 = p.at("cv_f1").get<double>();
    b.provenance.machine_id = p.at("machine_id").get<std::string>();
    b.provenance.n_train = p.at("n_train").get<std::size_t>();
    b.provenance.window_s = p.at("window_s").get<double>();
    b.provenance.rate_hz = p.at("rate_hz").get<double>();
    pipe.cv_f1 = b.provenance.cv_f1;
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string("model file: ") + e.what());
  }
}

void save_model(const ModelBundle& bundle, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << to_json(bundle).dump() << "\n";
  if (!out) throw Error(ErrorKind::io, "write failed: " + path.string());
}

ModelBundle load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot read " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::format, path.string() + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace minerwatch
