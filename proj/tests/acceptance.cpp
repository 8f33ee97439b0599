// End-to-end acceptance checks. Prints one PASS / FAIL / SKIP line per
// criterion and exits non-zero if any criterion failed.

#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "minerwatch/dataset_io.hpp"
#include "minerwatch/error.hpp"
#include "minerwatch/experiments.hpp"
#include "minerwatch/features.hpp"
#include "minerwatch/forest.hpp"
#include "minerwatch/metrics.hpp"
#include "minerwatch/parallel.hpp"
#include "minerwatch/sampler.hpp"
#include "minerwatch/statistics.hpp"
#include "minerwatch/synth.hpp"
#include "stat_oracle.hpp"

using namespace minerwatch;
namespace fs = std::filesystem;

namespace {

enum class Verdict { pass, fail, skip };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

Outcome pass_if(bool ok, std::string detail) { return {ok ? Verdict::pass : Verdict::fail, std::move(detail)}; }

struct Criterion {
  std::string name;
  double budget_s;  // 0 = no time limit
  std::function<Outcome()> check;
};

struct Context {
  fs::path work;
  std::string real_data;
  // one audit per experiment run, since run contexts repeat across experiments
  std::vector<std::unique_ptr<LeakageAudit>> audits;

  LeakageAudit* audit() { return audits.emplace_back(std::make_unique<LeakageAudit>()).get(); }

  Dataset& standard() {
    if (!standard_) {
      const fs::path root = work / "synthetic-standard";
      std::error_code ec;
      fs::remove_all(root, ec);
      save_dataset(generate_dataset(SynthConfig::standard()), root);
      auto loaded = load_dataset(root);
      if (!loaded.rejected.empty()) throw std::runtime_error("synthetic dataset has rejected samples");
      standard_ = std::move(loaded.dataset);
    }
    return *standard_;
  }

  Dataset& standard_with_programs() {
    if (!programs_) {
      auto config = SynthConfig::standard();
      config.add_programs("BTC", {"bfgminer", "cgminer"});
      programs_ = generate_dataset(config);
    }
    return *programs_;
  }

  ExperimentReport& binary_report() {
    if (!binary_) binary_ = run_experiment(standard(), spec(ExperimentKind::binary), audit());
    return *binary_;
  }

  static ExperimentSpec spec(ExperimentKind kind) {
    ExperimentSpec s;
    s.kind = kind;
    return s;
  }

private:
  std::optional<Dataset> standard_;
  std::optional<Dataset> programs_;
  std::optional<ExperimentReport> binary_;
};

double rel_err(double got, long double want) {
  const long double scale = std::max<long double>(1.0L, std::fabs(want));
  return static_cast<double>(std::fabs(static_cast<long double>(got) - want) / scale);
}

Outcome shape_fidelity() {
  const auto config = SynthConfig::standard();
  const auto profiles = make_profiles(config);
  const auto sample = generate_sample(profiles.front(), config, 1);
  const auto features = extract(sample);
  const auto blank = make_sample(SampleMeta{});
  const bool ok = sample.rows() == 300 && sample.readings.cols() == 28 && sample.readings.size() == 8400 &&
                  features.size() == 336 && blank.rows() == 300 && expected_rows(10, 30) == 300 &&
                  feature_names().size() == 336;
  return pass_if(ok, fmt::format("sample {}x{}, features {}", sample.rows(), sample.readings.cols(), features.size()));
}

Outcome statistics_oracle() {
  std::mt19937_64 rng(2024);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    std::uniform_int_distribution<int> len(2, 400);
    std::lognormal_distribution<double> value(5, 2);
    std::vector<double> xs(static_cast<std::size_t>(len(rng)));
    for (auto& x : xs) x = std::round(value(rng));
    if (t % 10 == 0) xs[0] = 0;  // exercises the zero geometric mean
    const auto got = series_statistics(Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())));
    const auto want = oracle::reference(xs);
    const long double expected[kStatisticCount] = {want.q[0],     want.q[1],     want.q[2], want.q[3],
                                                   want.sigma[0], want.sigma[1], want.sigma[2], want.skew,
                                                   want.kurt,     want.mean,     want.gmean,    want.var};
    for (std::size_t k = 0; k < kStatisticCount; ++k) worst = std::max(worst, rel_err(got[k], expected[k]));
  }
  const Eigen::VectorXd five = Eigen::VectorXd::LinSpaced(5, 1, 5);
  const auto s = series_statistics(five);
  const auto at = [&](StatisticKind k) { return s[static_cast<std::size_t>(k)]; };
  const bool fixture = std::abs(at(StatisticKind::variance) - 2.0) < 1e-12 &&
                       std::abs(at(StatisticKind::skewness)) < 1e-12 &&
                       std::abs(at(StatisticKind::kurtosis) + 1.3) < 1e-12 && std::abs(at(StatisticKind::q20) - 1.8) < 1e-12 &&
                       std::abs(at(StatisticKind::mean_geom) - 2.605171084697352) < 1e-9;
  return pass_if(worst <= 1e-9 && fixture, fmt::format("max relative error {:.3g}, [1..5] fixture {}", worst,
                                                       fixture ? "ok" : "mismatch"));
}

Outcome scaler_contract() {
  std::mt19937_64 rng(7);
  std::lognormal_distribution<double> value(3, 1.5);
  Eigen::MatrixXd train(200, 336);
  for (Eigen::Index i = 0; i < train.rows(); ++i)
    for (Eigen::Index j = 0; j < train.cols(); ++j) train(i, j) = value(rng) * static_cast<double>(j + 1);
  train.col(5).setConstant(3.0);
  const auto params = fit_scaler(train);
  const Eigen::MatrixXd z = apply_scaler(params, train);
  double worst_mean = 0, worst_sd = 0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    if (j == 5) continue;
    const double m = z.col(j).mean();
    const double sd = std::sqrt((z.col(j).array() - m).square().mean());
    worst_mean = std::max(worst_mean, std::abs(m));
    worst_sd = std::max(worst_sd, std::abs(sd - 1));
  }
  const bool constant_ok = z.col(5).array().isFinite().all();
  return pass_if(worst_mean <= 1e-9 && worst_sd <= 1e-9 && constant_ok,
                 fmt::format("max |mean| {:.3g}, max |sd-1| {:.3g}", worst_mean, worst_sd));
}

Outcome rf_sanity() {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> noise(0, 1);
  const int n = 300, d = 10;
  Eigen::MatrixXd x(n, d);
  std::vector<int> y(n);
  for (int i = 0; i < n; ++i) {
    y[i] = i % 3;
    for (int j = 0; j < d; ++j) x(i, j) = noise(rng) + (j == y[i] ? 1.0 : 0.0);
  }
  std::vector<std::string> problems;

  RFParams one{1, std::nullopt, MaxFeatures::all, SplitCriterion::gini, false, 10};
  const auto single = RandomForest::fit(one, x, y, 3);
  const Eigen::VectorXi fitted = single.predict(x);
  int correct = 0;
  for (int i = 0; i < n; ++i) correct += fitted[i] == y[i];
  if (correct != n) problems.push_back(fmt::format("single tree training accuracy {}/{}", correct, n));

  RFParams many{50, std::nullopt, MaxFeatures::sqrt, SplitCriterion::entropy, true, 10};
  set_thread_count(1);
  const auto f1 = RandomForest::fit(many, x, y, 3);
  set_thread_count(4);
  const auto f4 = RandomForest::fit(many, x, y, 3);
  set_thread_count(0);
  if (std::abs(f1.feature_importances().sum() - 1.0) > 1e-9) problems.push_back("importances do not sum to 1");
  if (!(f1.predict(x) == f4.predict(x)) || !(f1.vote_fractions(x) == f4.vote_fractions(x)))
    problems.push_back("predictions depend on thread count");

  double lo = 1, hi = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto idx = bootstrap_indices(1000, s);
    const double unique = static_cast<double>(std::set<Eigen::Index>(idx.begin(), idx.end()).size()) / 1000.0;
    lo = std::min(lo, unique);
    hi = std::max(hi, unique);
  }
  if (lo < 0.55 || hi > 0.72) problems.push_back(fmt::format("bootstrap unique fraction in [{}, {}]", lo, hi));

  std::size_t splits = 0;
  for (const auto& tree : f1.trees()) {
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      ++splits;
      const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
      const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
      const double child = (l.n_samples * l.impurity + r.n_samples * r.impurity) / node.n_samples;
      if (child > node.impurity + 1e-12) {
        problems.push_back("a split increased impurity");
        break;
      }
    }
  }
  return pass_if(problems.empty(), problems.empty() ? fmt::format("{} splits checked, bootstrap unique [{:.3f}, {:.3f}]",
                                                                  splits, lo, hi)
                                                    : fmt::format("{}", fmt::join(problems, "; ")));
}

Outcome metrics_oracle() {
  // truth rows / prediction cols: [2 1 0] [0 1 1] [1 0 0]
  const std::vector<int> truth{0, 0, 0, 1, 1, 2};
  const std::vector<int> pred{0, 0, 1, 1, 2, 0};
  const auto m = evaluate(truth, pred, 3);
  const double p[] = {2.0 / 3.0, 0.5, 0.0}, r[] = {2.0 / 3.0, 0.5, 0.0}, support[] = {3, 2, 1};
  double wp = 0, wr = 0, wf = 0;
  for (int k = 0; k < 3; ++k) {
    const double f = p[k] + r[k] > 0 ? 2 * p[k] * r[k] / (p[k] + r[k]) : 0.0;
    wp += support[k] * p[k] / 6;
    wr += support[k] * r[k] / 6;
    wf += support[k] * f / 6;
  }
  const bool exact = m.accuracy == 0.5 && m.precision == wp && m.recall == wr && m.f1 == wf;
  std::vector<double> runs(9, 1.0);
  runs.push_back(0.9);
  const auto mm = mean_margin(runs);
  const bool margin = std::abs(mm.margin - 0.0226) <= 0.0005 && std::abs(t_critical_95(10) - 2.262) < 5e-4;
  return pass_if(exact && margin, fmt::format("3-class fixture {}, margin {:.5f}", exact ? "exact" : "mismatch",
                                              mm.margin));
}

Outcome synthetic_binary(Context& ctx) {
  const auto& report = ctx.binary_report();
  const double f1 = report.configurations[0].aggregate.f1.mean;
  auto shuffled = Context::spec(ExperimentKind::binary);
  shuffled.control_shuffle = true;
  const auto control = run_experiment(ctx.standard(), shuffled, ctx.audit());
  const double chance = control.configurations[0].aggregate.f1.mean;
  return pass_if(f1 >= 0.95 && chance >= 0.4 && chance <= 0.6,
                 fmt::format("F1 {:.4f} ± {:.4f}, shuffled-label F1 {:.4f}", f1,
                             report.configurations[0].aggregate.f1.margin, chance));
}

Outcome synthetic_currency(Context& ctx) {
  const auto report = run_experiment(ctx.standard(), Context::spec(ExperimentKind::currency), ctx.audit());
  const auto& c = report.configurations[0];
  const auto support = ctx.standard().counts_per_subclass();
  bool rows_ok = c.classes.size() == 11;
  for (std::size_t k = 0; k < c.classes.size(); ++k) {
    // every class holds 50 samples, 5 of which are tested per run
    const auto n = support.at(c.classes[k]);
    const long expected = static_cast<long>(report.spec.runs) * std::lround(static_cast<double>(n) * 0.1);
    rows_ok = rows_ok && c.aggregate.confusion.row(static_cast<Eigen::Index>(k)).sum() == expected;
  }
  return pass_if(c.aggregate.accuracy.mean >= 0.90 && rows_ok,
                 fmt::format("accuracy {:.4f} ± {:.4f}, confusion row sums {}", c.aggregate.accuracy.mean,
                             c.aggregate.accuracy.margin, rows_ok ? "exact" : "wrong"));
}

Outcome sample_length(Context& ctx) {
  auto spec = Context::spec(ExperimentKind::sample_length);
  spec.lengths_s = {5, 30};
  const auto report = run_experiment(ctx.standard(), spec, ctx.audit());
  const double f5 = report.configurations[0].aggregate.f1.mean;
  const double f30 = report.configurations[1].aggregate.f1.mean;
  return pass_if(f5 >= f30 - 0.05, fmt::format("F1(5 s) {:.4f}, F1(30 s) {:.4f}", f5, f30));
}

Outcome feature_relevance(Context& ctx) {
  auto spec = Context::spec(ExperimentKind::feature_relevance);
  spec.psi = {40, 100};
  const auto report = run_experiment(ctx.standard(), spec, ctx.audit());
  const double f40 = report.configurations[0].aggregate.f1.mean;
  const double f100 = report.configurations[1].aggregate.f1.mean;

  // psi = 100 keeps every feature, i.e. a binary run without selection
  auto all = Context::spec(ExperimentKind::binary);
  all.pipeline.selection = SelectionRule::all;
  const auto reference = run_experiment(ctx.standard(), all, ctx.audit());
  auto strip = [](nlohmann::json j) {
    j.erase("label");
    j.erase("x");
    return j.dump();
  };
  const bool identical = strip(to_json(report.configurations[1])) == strip(to_json(reference.configurations[0]));
  return pass_if(f40 >= 0.9 * f100 && identical,
                 fmt::format("F1(40) {:.4f}, F1(100) {:.4f}, psi=100 vs all-feature binary run {}", f40, f100,
                             identical ? "identical" : "DIFFERENT"));
}

Outcome unseen_miner(Context& ctx) {
  const auto report = run_experiment(ctx.standard_with_programs(), Context::spec(ExperimentKind::unseen_miner), ctx.audit());
  double worst = 1.0;
  std::string worst_label;
  for (const auto& c : report.configurations) {
    if (c.aggregate.f1.mean < worst) {
      worst = c.aggregate.f1.mean;
      worst_label = c.label;
    }
  }
  return pass_if(report.configurations.size() == 6 && worst >= 0.95,
                 fmt::format("{} ordered pairs, lowest F1 {:.4f} ({})", report.configurations.size(), worst, worst_label));
}

Outcome leakage(Context& ctx) {
  // the big runs above were audited; add every experiment kind on a small set
  auto config = SynthConfig::small();
  config.add_programs("BTC", {"cgminer"});
  const auto small = generate_dataset(config);
  for (auto kind : {ExperimentKind::binary, ExperimentKind::currency, ExperimentKind::nested,
                    ExperimentKind::sample_length, ExperimentKind::feature_relevance, ExperimentKind::unseen_miner}) {
    auto spec = Context::spec(kind);
    spec.runs = 3;
    spec.pipeline.rf_grid = RFGrid::quick();
    spec.pipeline.folds = 3;
    spec.lengths_s = {2, 5};
    spec.psi = {50, 100};
    run_experiment(small, spec, ctx.audit());
  }
  std::size_t leaks = 0, checked = 0, contexts = 0;
  for (const auto& audit : ctx.audits) {
    std::map<std::string, std::map<std::string, std::set<std::string>>> seen;
    for (const auto& r : audit->records()) seen[r.context][r.stage].insert(r.ids.begin(), r.ids.end());
    for (const auto& [context, stages] : seen) {
      // fitting contexts of a nested stage hang below the split context
      const std::set<std::string>* test = nullptr;
      for (const auto& [split_context, split_stages] : seen) {
        const auto it = split_stages.find("split-test");
        if (it == split_stages.end()) continue;
        if (context == split_context || context.rfind(split_context + "/", 0) == 0) test = &it->second;
      }
      if (stages.count("split-test")) ++contexts;
      for (const auto& stage : {"scaler", "ranking"}) {
        const auto fitted = stages.find(stage);
        if (fitted == stages.end()) continue;
        ++checked;
        if (!test) {
          ++leaks;  // fitted without a recorded split: cannot be vouched for
          continue;
        }
        for (const auto& id : fitted->second) leaks += test->count(id);
      }
    }
  }
  return pass_if(leaks == 0 && checked > 0,
                 fmt::format("{} audited experiments, {} fitting stages across {} splits, {} test ids leaked",
                             ctx.audits.size(), checked, contexts, leaks));
}

Outcome real_data_track(Context& ctx) {
  if (ctx.real_data.empty() || !fs::exists(ctx.real_data)) {
    return {Verdict::skip, "no real dataset given (--real-data or MINERWATCH_REAL_DATA)"};
  }
  const auto loaded = load_dataset(ctx.real_data);
  const auto report = run_experiment(loaded.dataset, Context::spec(ExperimentKind::binary));
  const double acc = report.configurations[0].aggregate.accuracy.mean;
  return pass_if(acc >= 0.99 - 0.01, fmt::format("{} samples ({} rejected), accuracy {:.4f} ± {:.4f}",
                                                  loaded.dataset.size(), loaded.rejected.size(), acc,
                                                  report.configurations[0].aggregate.accuracy.margin));
}

double cpu_seconds() {
  rusage u{};
  getrusage(RUSAGE_SELF, &u);
  return static_cast<double>(u.ru_utime.tv_sec + u.ru_stime.tv_sec) +
         static_cast<double>(u.ru_utime.tv_usec + u.ru_stime.tv_usec) * 1e-6;
}

Outcome live_sampler() {
  const pid_t child = fork();
  if (child == 0) {
    volatile unsigned long x = 0;
    for (;;) x = x + 1;
  }
  struct Reaper {
    pid_t pid;
    ~Reaper() {
      kill(pid, SIGKILL);
      waitpid(pid, nullptr, 0);
    }
  } reaper{child};

  const auto available = probe_events(child);
  const auto task_clock = *event_index("task-clock");
  const auto instructions = *event_index("instructions");
  if (!available[task_clock] && !available[instructions]) {
    return {Verdict::skip, "no performance counters available to this process"};
  }
  SamplerConfig config;
  config.pid = child;
  config.duration_s = 5;
  const double cpu0 = cpu_seconds();
  const auto wall0 = std::chrono::steady_clock::now();
  const auto sample = record(config);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  const double overhead = (cpu_seconds() - cpu0) / wall;
  const std::string measured = fmt::format("{} rows, sampler overhead {:.2f}% of one core", sample.rows(), 100 * overhead);
  if (!available[instructions]) {
    return {Verdict::skip, "instructions counter unavailable on this host; " + measured};
  }
  const bool positive = (sample.readings.col(static_cast<Eigen::Index>(instructions)).array() > 0).all();
  return pass_if(sample.rows() == 50 && positive && overhead < 0.02,
                 measured + (positive ? ", instructions all positive" : ", instructions not all positive"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  std::string work_dir = (fs::temp_directory_path() / "minerwatch-acceptance").string();
  std::string only;
  std::string real_data;
  if (const char* env = std::getenv("MINERWATCH_REAL_DATA")) real_data = env;
  app.add_option("--work-dir", work_dir, "scratch directory for generated data");
  app.add_option("--only", only, "run criteria whose name contains this text");
  app.add_option("--real-data", real_data, "root of a recorded dataset for the real-data track");
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::warn);

  Context ctx;
  ctx.work = work_dir;
  ctx.real_data = real_data;
  fs::create_directories(ctx.work);

  const std::vector<Criterion> criteria{
      {"shape fidelity", 1, shape_fidelity},
      {"statistics oracle", 5, statistics_oracle},
      {"scaler contract", 5, scaler_contract},
      {"random forest sanity", 30, rf_sanity},
      {"metrics oracle", 1, metrics_oracle},
      {"synthetic binary", 600, [&] { return synthetic_binary(ctx); }},
      {"synthetic currency", 600, [&] { return synthetic_currency(ctx); }},
      {"sample length", 900, [&] { return sample_length(ctx); }},
      {"feature relevance", 600, [&] { return feature_relevance(ctx); }},
      {"unseen miner", 600, [&] { return unseen_miner(ctx); }},
      {"no leakage", 60, [&] { return leakage(ctx); }},
      {"real data", 0, [&] { return real_data_track(ctx); }},
      {"live sampler", 0, live_sampler},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && c.name.find(only) == std::string::npos) continue;
    // shared fixtures are built outside the timed region
    if (c.name == "synthetic binary" || c.name == "synthetic currency" || c.name == "sample length" ||
        c.name == "feature relevance") {
      ctx.standard();
    }
    if (c.name == "unseen miner") ctx.standard_with_programs();
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.check();
    } catch (const std::exception& e) {
      outcome = {Verdict::fail, std::string("exception: ") + e.what()};
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (outcome.verdict == Verdict::pass && c.budget_s > 0 && elapsed > c.budget_s) {
      outcome.verdict = Verdict::fail;
      outcome.detail += fmt::format("; over the {:.0f} s budget", c.budget_s);
    }
    const char* tag = outcome.verdict == Verdict::pass ? "PASS" : outcome.verdict == Verdict::fail ? "FAIL" : "SKIP";
    failed += outcome.verdict == Verdict::fail;
    std::cout << fmt::format("{} {}: {} [{:.1f} s]", tag, c.name, outcome.detail, elapsed) << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
