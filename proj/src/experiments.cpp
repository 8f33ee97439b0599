#include "minerwatch/experiments.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "minerwatch/error.hpp"
#include "minerwatch/parallel.hpp"
#include "minerwatch/random.hpp"

namespace minerwatch {

namespace {

constexpr const char* kNonMining = "non-mining";

struct Problem {
  FeatureSet features;
  std::vector<int> labels;
  std::vector<std::string> classes;
};

Problem binary_problem(FeatureSet fs) {
  Problem p;
  p.labels.reserve(fs.tasks.size());
  for (auto t : fs.tasks) p.labels.push_back(static_cast<int>(t));
  p.classes = {kNonMining, "mining"};
  p.features = std::move(fs);
  return p;
}

std::vector<std::string> currencies_of(const FeatureSet& fs) {
  std::set<std::string> names;
  for (Eigen::Index i = 0; i < fs.size(); ++i) {
    if (fs.tasks[i] == Task::mining) names.insert(fs.subclasses[i]);
  }
  return {names.begin(), names.end()};
}

int class_of(const std::vector<std::string>& classes, const std::string& name) {
  auto it = std::find(classes.begin(), classes.end(), name);
  return static_cast<int>(it - classes.begin());
}

std::vector<std::size_t> mining_rows(const FeatureSet& fs) {
  std::vector<std::size_t> rows;
  for (Eigen::Index i = 0; i < fs.size(); ++i) {
    if (fs.tasks[i] == Task::mining) rows.push_back(static_cast<std::size_t>(i));
  }
  return rows;
}

Problem currency_problem(const FeatureSet& fs) {
  Problem p;
  p.classes = currencies_of(fs);
  if (p.classes.size() < 2) throw Error(ErrorKind::training, "currency classification needs at least 2 currencies");
  const auto rows = mining_rows(fs);
  p.features = fs.rows(rows);
  for (const auto& s : p.features.subclasses) p.labels.push_back(class_of(p.classes, s));
  return p;
}

std::vector<int> take(std::span<const int> y, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(y[r]);
  return out;
}

std::string run_context(const std::string& label, int run) { return fmt::format("{}/run{}", label, run); }

const RFParams* rf_winner(const TrainedPipeline& p) { return std::get_if<RFParams>(&p.winner); }
const SVMParams* svm_winner(const TrainedPipeline& p) { return std::get_if<SVMParams>(&p.winner); }

/// Winner counts of one stage over all runs.
SelectionCounts stage_selections(const PipelineConfig& config, const std::vector<TrainedPipeline>& fitted) {
  if (config.classifier == ClassifierKind::rf) {
    std::vector<RFParams> winners;
    for (const auto& p : fitted) winners.push_back(*rf_winner(p));
    return count_selections(config.rf_grid, winners);
  }
  std::vector<SVMParams> winners;
  for (const auto& p : fitted) winners.push_back(*svm_winner(p));
  return count_selections(config.svm_grid, winners);
}

struct RunOutput {
  Metrics metrics;
  std::vector<TrainedPipeline> stages;
};

ConfigurationResult collect(std::string label, std::optional<double> x, std::vector<std::string> classes,
                            const PipelineConfig& config, std::vector<RunOutput> outputs,
                            const std::vector<std::string>& stage_names) {
  ConfigurationResult result;
  result.label = std::move(label);
  result.x = x;
  result.classes = std::move(classes);
  for (auto& out : outputs) {
    result.runs.push_back(out.metrics);
    std::string winner;
    for (std::size_t s = 0; s < out.stages.size(); ++s) {
      if (s) winner += "; ";
      if (out.stages.size() > 1) winner += stage_names[s] + ": ";
      winner += describe(out.stages[s].winner);
    }
    result.winners.push_back(winner);
    result.cv_f1.push_back(out.stages.front().cv_f1);
  }
  result.aggregate = aggregate_runs(result.runs);
  for (std::size_t s = 0; s < stage_names.size(); ++s) {
    std::vector<TrainedPipeline> fitted;
    for (auto& out : outputs) fitted.push_back(std::move(out.stages[s]));
    result.selections.emplace_back(stage_names[s], stage_selections(config, fitted));
  }
  return result;
}

/// Repeated stratified split, fit on the train side, score on the test side.
ConfigurationResult evaluate_problem(const Problem& problem, const ExperimentSpec& spec, const PipelineConfig& config,
                                     const std::string& label, std::optional<double> x, LeakageAudit* audit) {
  const int k = static_cast<int>(problem.classes.size());
  std::vector<RunOutput> outputs(static_cast<std::size_t>(spec.runs));
  parallel_for(outputs.size(), [&](std::size_t r) {
    const std::uint64_t seed = spec.seed + r;
    const auto split = stratified_split(problem.features.subclasses, spec.test_fraction, seed);
    const auto train = problem.features.rows(split.train);
    const auto test = problem.features.rows(split.test);
    const auto ctx = run_context(label, static_cast<int>(r));
    if (audit) {
      audit->record(ctx, "split-train", train.ids);
      audit->record(ctx, "split-test", test.ids);
    }
    const auto y_train = take(problem.labels, split.train);
    const auto y_test = take(problem.labels, split.test);
    auto fitted = train_pipeline(train, y_train, k, config, seed, audit, ctx);
    const Eigen::VectorXi pred = fitted.predict(test.values);
    outputs[r].metrics = evaluate(y_test, std::span<const int>(pred.data(), static_cast<std::size_t>(pred.size())), k);
    outputs[r].stages.push_back(std::move(fitted));
    spdlog::debug("{}: f1 {:.4f}", ctx, outputs[r].metrics.f1);
  });
  return collect(label, x, problem.classes, config, std::move(outputs), {"classifier"});
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string format_x(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::binary: return "binary";
    case ExperimentKind::currency: return "currency";
    case ExperimentKind::nested: return "nested";
    case ExperimentKind::sample_length: return "sample-length";
    case ExperimentKind::feature_relevance: return "feature-relevance";
    case ExperimentKind::unseen_miner: return "unseen-miner";
  }
  return "?";
}

ExperimentKind parse_experiment_kind(const std::string& s) {
  for (auto k : {ExperimentKind::binary, ExperimentKind::currency, ExperimentKind::nested,
                 ExperimentKind::sample_length, ExperimentKind::feature_relevance, ExperimentKind::unseen_miner}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorKind::invalid_argument, "unknown experiment kind '" + s + "'");
}

void ExperimentSpec::validate() const {
  if (runs < 2) throw Error(ErrorKind::invalid_argument, "runs must be at least 2");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::invalid_argument, "test fraction must be in (0, 1)");
  }
  if (pipeline.folds < 2) throw Error(ErrorKind::invalid_argument, "folds must be at least 2");
  if (pipeline.rank_trees < 1) throw Error(ErrorKind::invalid_argument, "rank_trees must be positive");
  for (double l : lengths_s) {
    if (!(l > 0.0)) throw Error(ErrorKind::invalid_argument, "sample lengths must be positive");
  }
  for (double p : psi) {
    if (!(p > 0.0 && p <= 100.0)) throw Error(ErrorKind::invalid_argument, "psi values must be in (0, 100]");
  }
}

std::vector<int> compose_nested(std::span<const int> stage1_mining, std::span<const int> stage2_currency,
                                int n_currencies) {
  if (stage1_mining.size() != stage2_currency.size()) {
    throw Error(ErrorKind::invalid_argument, "stage predictions differ in length");
  }
  std::vector<int> out(stage1_mining.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = stage1_mining[i] == static_cast<int>(Task::mining) ? stage2_currency[i] : n_currencies;
  }
  return out;
}

Dataset shuffle_labels(const Dataset& dataset, std::uint64_t seed) {
  Dataset out = dataset;
  std::vector<std::size_t> perm(dataset.size());
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(derive_seed(seed, "shuffle"));
  std::shuffle(perm.begin(), perm.end(), rng);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out.samples[i].task = dataset.samples[perm[i]].task;
    out.samples[i].subclass = dataset.samples[perm[i]].subclass;
  }
  return out;
}

Dataset truncate_samples(const Dataset& dataset, double length_s) {
  Dataset out = dataset;
  for (auto& s : out.samples) {
    const auto n = expected_rows(s.sample.meta.rate_hz, length_s);
    if (n < 2) throw Error(ErrorKind::invalid_argument, fmt::format("sample length {}s is too short", length_s));
    if (n > s.sample.rows()) {
      throw Error(ErrorKind::invalid_argument,
                  fmt::format("sample '{}' holds {} readings, fewer than the {} needed for {}s", s.id, s.sample.rows(),
                              n, length_s));
    }
    s.sample = s.sample.head(n);
  }
  return out;
}

ExperimentReport run_binary(const Dataset& dataset, const ExperimentSpec& spec, LeakageAudit* audit) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report{spec, {}, 0.0};
  const auto problem = binary_problem(extract_all(dataset));
  report.configurations.push_back(evaluate_problem(problem, spec, spec.pipeline, "binary", std::nullopt, audit));
  report.wall_clock_s = elapsed_s(start);
  return report;
}

ExperimentReport run_currency(const Dataset& dataset, const ExperimentSpec& spec, LeakageAudit* audit) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report{spec, {}, 0.0};
  const auto problem = currency_problem(extract_all(dataset));
  report.configurations.push_back(evaluate_problem(problem, spec, spec.pipeline, "currency", std::nullopt, audit));
  report.wall_clock_s = elapsed_s(start);
  return report;
}

ExperimentReport run_nested(const Dataset& dataset, const ExperimentSpec& spec, LeakageAudit* audit) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report{spec, {}, 0.0};

  const auto fs = extract_all(dataset);
  auto classes = currencies_of(fs);
  if (classes.size() < 2) throw Error(ErrorKind::training, "nested classification needs at least 2 currencies");
  const int n_currencies = static_cast<int>(classes.size());
  classes.push_back(kNonMining);
  const int k = n_currencies + 1;

  std::vector<int> truth(static_cast<std::size_t>(fs.size()));
  std::vector<int> task(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    task[i] = static_cast<int>(fs.tasks[i]);
    truth[i] = fs.tasks[i] == Task::mining ? class_of(classes, fs.subclasses[i]) : n_currencies;
  }

  const std::string label = "nested";
  std::vector<RunOutput> outputs(static_cast<std::size_t>(spec.runs));
  parallel_for(outputs.size(), [&](std::size_t r) {
    const std::uint64_t seed = spec.seed + r;
    const auto split = stratified_split(fs.subclasses, spec.test_fraction, seed);
    const auto train = fs.rows(split.train);
    const auto test = fs.rows(split.test);
    const auto ctx = run_context(label, static_cast<int>(r));
    if (audit) {
      audit->record(ctx, "split-train", train.ids);
      audit->record(ctx, "split-test", test.ids);
    }

    auto stage1 = train_pipeline(train, take(task, split.train), 2, spec.pipeline, seed, audit, ctx + "/stage1");

    const auto mining = mining_rows(train);
    const auto train2 = train.rows(mining);
    std::vector<int> y2;
    for (const auto& s : train2.subclasses) y2.push_back(class_of(classes, s));
    auto stage2 = train_pipeline(train2, y2, n_currencies, spec.pipeline, seed, audit, ctx + "/stage2");

    const Eigen::VectorXi p1 = stage1.predict(test.values);
    const Eigen::VectorXi p2 = stage2.predict(test.values);
    const auto pred = compose_nested(std::span<const int>(p1.data(), static_cast<std::size_t>(p1.size())),
                                     std::span<const int>(p2.data(), static_cast<std::size_t>(p2.size())),
                                     n_currencies);
    outputs[r].metrics = evaluate(take(truth, split.test), pred, k);
    outputs[r].stages.push_back(std::move(stage1));
    outputs[r].stages.push_back(std::move(stage2));
  });
  report.configurations.push_back(
      collect(label, std::nullopt, classes, spec.pipeline, std::move(outputs), {"stage1", "stage2"}));
  report.wall_clock_s = elapsed_s(start);
  return report;
}

ExperimentReport run_sample_length(const Dataset& dataset, const ExperimentSpec& spec, LeakageAudit* audit) {
  spec.validate();
  if (spec.lengths_s.empty()) throw Error(ErrorKind::invalid_argument, "no sample lengths given");
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report{spec, {}, 0.0};
  for (double length : spec.lengths_s) {
    const auto problem = binary_problem(extract_all(truncate_samples(dataset, length)));
    report.configurations.push_back(
        evaluate_problem(problem, spec, spec.pipeline, "length=" + format_x(length) + "s", length, audit));
    spdlog::info("length {}s: f1 {:.4f}", length, report.configurations.back().aggregate.f1.mean);
  }
  report.wall_clock_s = elapsed_s(start);
  return report;
}

ExperimentReport run_feature_relevance(const Dataset& dataset, const ExperimentSpec& spec, LeakageAudit* audit) {
  spec.validate();
  if (spec.psi.empty()) throw Error(ErrorKind::invalid_argument, "no psi values given");
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report{spec, {}, 0.0};
  const auto problem = binary_problem(extract_all(dataset));
  for (double psi : spec.psi) {
    auto config = spec.pipeline;
    config.selection = SelectionRule::least_important_psi;
    config.psi = psi;
    report.configurations.push_back(evaluate_problem(problem, spec, config, "psi=" + format_x(psi), psi, audit));
    spdlog::info("psi {}: f1 {:.4f}", psi, report.configurations.back().aggregate.f1.mean);
  }
  report.wall_clock_s = elapsed_s(start);
  return report;
}

ExperimentReport run_unseen_miner(const Dataset& dataset, const ExperimentSpec& spec, LeakageAudit* audit) {
  spec.validate();
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report{spec, {}, 0.0};
  const auto fs = extract_all(dataset);

  std::map<std::string, std::vector<std::size_t>> by_program;
  std::vector<std::size_t> others;
  for (Eigen::Index i = 0; i < fs.size(); ++i) {
    const auto& s = dataset.samples[static_cast<std::size_t>(i)];
    if (s.subclass == spec.designated_subclass) {
      by_program[s.sample.meta.program_id].push_back(static_cast<std::size_t>(i));
    } else {
      others.push_back(static_cast<std::size_t>(i));
    }
  }
  if (by_program.empty()) {
    throw Error(ErrorKind::invalid_argument, "no samples of subclass '" + spec.designated_subclass + "'");
  }
  if (by_program.size() < 2 && !spec.include_same_program) {
    throw Error(ErrorKind::invalid_argument,
                "subclass '" + spec.designated_subclass + "' needs samples from at least 2 programs");
  }
  const auto all_labels = binary_problem(fs).labels;

  for (const auto& [train_program, train_rows] : by_program) {
    for (const auto& [test_program, test_pool] : by_program) {
      if (train_program == test_program && !spec.include_same_program) continue;
      const std::string label = "train=" + train_program + ",test=" + test_program;

      std::vector<std::size_t> base = others;
      base.insert(base.end(), train_rows.begin(), train_rows.end());
      std::sort(base.begin(), base.end());
      std::vector<std::string> strata;
      for (auto i : base) strata.push_back(fs.subclasses[i]);

      std::vector<RunOutput> outputs(static_cast<std::size_t>(spec.runs));
      parallel_for(outputs.size(), [&](std::size_t r) {
        const std::uint64_t seed = spec.seed + r;
        const auto split = stratified_split(strata, spec.test_fraction, seed);
        std::vector<std::size_t> train_idx, test_idx;
        for (auto i : split.train) train_idx.push_back(base[i]);
        std::size_t replaced = 0;
        for (auto i : split.test) {
          if (train_program != test_program && fs.subclasses[base[i]] == spec.designated_subclass) {
            ++replaced;
          } else {
            test_idx.push_back(base[i]);
          }
        }
        if (replaced > 0) {
          if (replaced > test_pool.size()) {
            throw Error(ErrorKind::invalid_argument,
                        fmt::format("program '{}' has {} samples, {} needed", test_program, test_pool.size(), replaced));
          }
          auto pool = test_pool;
          Rng rng(derive_seed(seed, "unseen"));
          std::shuffle(pool.begin(), pool.end(), rng);
          test_idx.insert(test_idx.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(replaced));
          std::sort(test_idx.begin(), test_idx.end());
        }

        const auto train = fs.rows(train_idx);
        const auto test = fs.rows(test_idx);
        const auto ctx = run_context(label, static_cast<int>(r));
        if (audit) {
          audit->record(ctx, "split-train", train.ids);
          audit->record(ctx, "split-test", test.ids);
        }
        auto fitted = train_pipeline(train, take(all_labels, train_idx), 2, spec.pipeline, seed, audit, ctx);
        const Eigen::VectorXi pred = fitted.predict(test.values);
        outputs[r].metrics = evaluate(take(all_labels, test_idx),
                                      std::span<const int>(pred.data(), static_cast<std::size_t>(pred.size())), 2);
        outputs[r].stages.push_back(std::move(fitted));
      });
      report.configurations.push_back(
          collect(label, std::nullopt, {kNonMining, "mining"}, spec.pipeline, std::move(outputs), {"classifier"}));
      spdlog::info("{}: f1 {:.4f}", label, report.configurations.back().aggregate.f1.mean);
    }
  }
  report.wall_clock_s = elapsed_s(start);
  return report;
}

ExperimentReport run_experiment(const Dataset& dataset, const ExperimentSpec& spec, LeakageAudit* audit) {
  if (spec.control_shuffle) {
    auto copy = spec;
    copy.control_shuffle = false;
    auto report = run_experiment(shuffle_labels(dataset, spec.seed), copy, audit);
    report.spec = spec;
    return report;
  }
  switch (spec.kind) {
    case ExperimentKind::binary: return run_binary(dataset, spec, audit);
    case ExperimentKind::currency: return run_currency(dataset, spec, audit);
    case ExperimentKind::nested: return run_nested(dataset, spec, audit);
    case ExperimentKind::sample_length: return run_sample_length(dataset, spec, audit);
    case ExperimentKind::feature_relevance: return run_feature_relevance(dataset, spec, audit);
    case ExperimentKind::unseen_miner: return run_unseen_miner(dataset, spec, audit);
  }
  throw Error(ErrorKind::internal, "unhandled experiment kind");
}

namespace {

const char* selection_name(SelectionRule rule) {
  switch (rule) {
    case SelectionRule::mean_importance: return "mean-importance";
    case SelectionRule::all: return "all";
    case SelectionRule::least_important_psi: return "least-important-psi";
  }
  return "?";
}

nlohmann::json to_json(const MeanMargin& m) { return {{"mean", m.mean}, {"margin", m.margin}}; }

nlohmann::json to_json(const Eigen::MatrixXi& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json to_json(const SelectionCounts& counts) {
  auto out = nlohmann::json::array();
  for (const auto& [param, values] : counts) {
    auto v = nlohmann::json::array();
    for (const auto& [value, n] : values) v.push_back({{"value", value}, {"count", n}});
    out.push_back({{"parameter", param}, {"counts", v}});
  }
  return out;
}

std::string file_label(const std::string& label) {
  std::string out;
  for (char c : label) out += std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ? c : '_';
  return out;
}

}  // namespace

nlohmann::json to_json(const ExperimentSpec& spec) {
  const auto& p = spec.pipeline;
  return {
      {"kind", to_string(spec.kind)},
      {"runs", spec.runs},
      {"seed", spec.seed},
      {"test_fraction", spec.test_fraction},
      {"classifier", to_string(p.classifier)},
      {"folds", p.folds},
      {"rank_trees", p.rank_trees},
      {"selection", selection_name(p.selection)},
      {"psi", p.psi},
      {"grid_candidates",
       p.classifier == ClassifierKind::rf ? p.rf_grid.candidates().size() : p.svm_grid.candidates().size()},
      {"lengths_s", spec.lengths_s},
      {"psi_values", spec.psi},
      {"designated_subclass", spec.designated_subclass},
      {"include_same_program", spec.include_same_program},
      {"control_shuffle", spec.control_shuffle},
  };
}

nlohmann::json to_json(const ConfigurationResult& result) {
  nlohmann::json runs = nlohmann::json::array();
  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    const auto& m = result.runs[r];
    runs.push_back({{"accuracy", m.accuracy},
                    {"precision", m.precision},
                    {"recall", m.recall},
                    {"f1", m.f1},
                    {"winner", result.winners[r]},
                    {"cv_f1", result.cv_f1[r]}});
  }
  nlohmann::json selections = nlohmann::json::object();
  for (const auto& [stage, counts] : result.selections) selections[stage] = to_json(counts);
  const auto& a = result.aggregate;
  return {
      {"label", result.label},
      {"x", result.x ? nlohmann::json(*result.x) : nlohmann::json(nullptr)},
      {"classes", result.classes},
      {"accuracy", to_json(a.accuracy)},
      {"precision", to_json(a.precision)},
      {"recall", to_json(a.recall)},
      {"f1", to_json(a.f1)},
      {"confusion", to_json(a.confusion)},
      {"runs", runs},
      {"selections", selections},
  };
}

nlohmann::json to_json(const ExperimentReport& report) {
  nlohmann::json configs = nlohmann::json::array();
  for (const auto& c : report.configurations) configs.push_back(to_json(c));
  return {{"spec", to_json(report.spec)}, {"configurations", configs}};
}

std::string to_text(const ExperimentReport& report) {
  std::ostringstream out;
  out << "experiment " << to_string(report.spec.kind) << ", " << report.spec.runs << " runs, seed "
      << report.spec.seed << ", classifier " << to_string(report.spec.pipeline.classifier) << "\n\n";
  out << fmt::format("{:<32} {:>17} {:>17} {:>17} {:>17}\n", "configuration", "accuracy", "precision", "recall",
                     "f1");
  auto cell = [](const MeanMargin& m) { return fmt::format("{:.4f} ± {:.4f}", m.mean, m.margin); };
  for (const auto& c : report.configurations) {
    const auto& a = c.aggregate;
    out << fmt::format("{:<32} {:>17} {:>17} {:>17} {:>17}\n", c.label, cell(a.accuracy), cell(a.precision),
                       cell(a.recall), cell(a.f1));
  }
  for (const auto& c : report.configurations) {
    out << "\nconfusion " << c.label << " (rows = truth, summed over runs)\n";
    std::size_t width = 10;
    for (const auto& name : c.classes) width = std::max(width, name.size() + 1);
    out << fmt::format("{:<{}}", "", width);
    for (const auto& name : c.classes) out << fmt::format("{:>{}}", name, width);
    out << "\n";
    for (Eigen::Index i = 0; i < c.aggregate.confusion.rows(); ++i) {
      out << fmt::format("{:<{}}", c.classes[static_cast<std::size_t>(i)], width);
      for (Eigen::Index j = 0; j < c.aggregate.confusion.cols(); ++j) {
        out << fmt::format("{:>{}}", c.aggregate.confusion(i, j), width);
      }
      out << "\n";
    }
    for (const auto& [stage, counts] : c.selections) {
      out << "\nselected hyper-parameters (" << stage << ")\n";
      for (const auto& [param, values] : counts) {
        out << "  " << param << ":";
        for (const auto& [value, n] : values) out << " " << value << "=" << n;
        out << "\n";
      }
    }
  }
  return out.str();
}

void write_report(const ExperimentReport& report, const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorKind::io, "cannot create " + out_dir.string() + ": " + ec.message());

  auto open = [&](const std::string& name) {
    std::ofstream f(out_dir / name);
    if (!f) throw Error(ErrorKind::io, "cannot write " + (out_dir / name).string());
    return f;
  };
  open("report.json") << to_json(report).dump(2) << "\n";
  open("report.txt") << to_text(report);
  open("timing.json") << nlohmann::json{{"wall_clock_s", report.wall_clock_s}}.dump(2) << "\n";

  bool curve = false;
  for (const auto& c : report.configurations) {
    curve = curve || c.x.has_value();
    auto f = open("confusion_" + file_label(c.label) + ".csv");
    f << "truth";
    for (const auto& name : c.classes) f << "," << name;
    f << "\n";
    for (Eigen::Index i = 0; i < c.aggregate.confusion.rows(); ++i) {
      f << c.classes[static_cast<std::size_t>(i)];
      for (Eigen::Index j = 0; j < c.aggregate.confusion.cols(); ++j) f << "," << c.aggregate.confusion(i, j);
      f << "\n";
    }
  }
  if (curve) {
    auto f = open("curve.csv");
    f << "x,value,margin\n";
    for (const auto& c : report.configurations) {
      if (c.x) f << format_x(*c.x) << "," << fmt::format("{}", c.aggregate.f1.mean) << ","
                 << fmt::format("{}", c.aggregate.f1.margin) << "\n";
    }
  }
}

}  // namespace minerwatch
