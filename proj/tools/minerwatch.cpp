// minerwatch: record counter traces, synthesize datasets, train models, run
// the evaluation experiments and watch live processes.
//
// Exit codes: 0 ok, 1 other failure, 2 invalid flags, 3 counter access
// denied, 4 target process gone, 5 training failure, 6 model/host mismatch
// under --strict.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "minerwatch/dataset_io.hpp"
#include "minerwatch/error.hpp"
#include "minerwatch/experiments.hpp"
#include "minerwatch/features.hpp"
#include "minerwatch/model_bundle.hpp"
#include "minerwatch/parallel.hpp"
#include "minerwatch/pipeline.hpp"
#include "minerwatch/sampler.hpp"
#include "minerwatch/synth.hpp"

namespace fs = std::filesystem;
using namespace minerwatch;

namespace {

struct Global {
  std::uint64_t seed = 10;
  std::string out_dir = ".";
  std::size_t threads = 0;
  std::string log_level = "info";
};

struct RecordArgs {
  std::int64_t pid = 0;
  double duration = 30.0;
  double rate = 10.0;
  double warmup = 0.0;
  std::string label;
  std::string id;
  std::string program;
  std::string out;
  std::string dataset;
  bool require_access = false;
};

struct SynthArgs {
  std::string preset = "paper";
  double divergence = 1.0;
  double jitter = 0.1;
  int samples = 0;
  double duration = 0.0;
  std::vector<std::string> add_programs;
  std::string out;
};

struct TrainArgs {
  std::string dataset;
  std::string target = "binary";
  std::string classifier = "rf";
  std::string grid = "full";
  int folds = 5;
  std::string out;
  bool cumulative = false;
};

struct ExperimentArgs {
  std::string kind = "binary";
  std::string dataset;
  int runs = 10;
  std::string classifier = "rf";
  std::string grid = "full";
  int folds = 5;
  double test_fraction = 0.1;
  std::vector<double> psi;
  std::vector<double> lengths;
  std::string designated = "BTC";
  bool include_same_program = false;
  bool shuffle = false;
  std::string out;
  bool cumulative = false;
};

struct WatchArgs {
  std::string model;
  std::size_t top_n = 5;
  double window = 5.0;
  double threshold = 0.5;
  double interval = 0.0;
  double rate = 10.0;
  double candidate_interval = 0.5;
  int iterations = 0;
  bool strict = false;
};

struct FeaturesArgs {
  std::string dataset;
  std::string out;
  bool cumulative = false;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return 2;
    case ErrorKind::counters_unavailable: return 3;
    case ErrorKind::process_gone: return 4;
    case ErrorKind::training: return 5;
    case ErrorKind::model_mismatch: return 6;
    default: return 1;
  }
}

fs::path under_out_dir(const Global& g, const std::string& explicit_path, const std::string& fallback) {
  if (!explicit_path.empty()) return explicit_path;
  return fs::path(g.out_dir) / fallback;
}

Dataset load(const std::string& root, bool cumulative) {
  auto report = load_dataset(root, LoadOptions{cumulative});
  if (!report.rejected.empty()) spdlog::warn("{} sample file(s) rejected", report.rejected.size());
  if (report.dataset.size() == 0) throw Error(ErrorKind::invalid_argument, "dataset '" + root + "' holds no samples");
  return std::move(report.dataset);
}

void configure_grid(PipelineConfig& config, const std::string& grid) {
  if (grid == "quick") {
    config.rf_grid = RFGrid::quick();
    config.svm_grid = SVMGrid::quick();
  } else {
    config.rf_grid = RFGrid::full();
    config.svm_grid = SVMGrid::full();
  }
}

int cmd_record(const Global& g, const RecordArgs& a) {
  SamplerConfig config;
  config.pid = a.pid;
  config.rate_hz = a.rate;
  config.duration_s = a.duration;
  config.warmup_s = a.warmup;
  config.require_access = a.require_access;
  config.program_id = a.program;
  config.validate();

  fs::path path;
  std::optional<FeatureLabel> label;
  if (!a.label.empty()) {
    const auto slash = a.label.find('/');
    if (slash == std::string::npos) throw Error(ErrorKind::invalid_argument, "--label must be task/subclass");
    label = FeatureLabel{parse_task(a.label.substr(0, slash)), a.label.substr(slash + 1)};
  }
  if (!a.dataset.empty()) {
    if (!label) throw Error(ErrorKind::invalid_argument, "--dataset needs --label task/subclass");
    const auto id = a.id.empty() ? fmt::format("{}-{}-{}", label->subclass, a.pid,
                                               std::chrono::duration_cast<std::chrono::seconds>(
                                                   std::chrono::system_clock::now().time_since_epoch())
                                                   .count())
                                 : a.id;
    path = sample_path(a.dataset, label->task, label->subclass, id);
  } else {
    path = under_out_dir(g, a.out, fmt::format("sample-{}.csv", a.pid));
  }

  const auto sample = record(config);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  save_sample(sample, path);
  if (!a.dataset.empty()) {
    const fs::path manifest = fs::path(a.dataset) / "manifest.json";
    auto entries = fs::exists(manifest) ? read_manifest(manifest) : std::map<std::string, Task>{};
    const auto it = entries.find(label->subclass);
    if (it != entries.end() && it->second != label->task) {
      throw Error(ErrorKind::invalid_argument, "subclass '" + label->subclass + "' is registered under the other task");
    }
    entries[label->subclass] = label->task;
    write_manifest(entries, manifest);
  }
  std::cout << path.string() << "\n";
  if (sample.meta.truncated) {
    spdlog::error("process {} exited before the window was complete; partial sample written", a.pid);
    return exit_code(ErrorKind::process_gone);
  }
  return 0;
}

int cmd_synth(const Global& g, const SynthArgs& a) {
  SynthConfig config = a.preset == "small" ? SynthConfig::small() : SynthConfig::standard();
  config.divergence = a.divergence;
  config.program_jitter = a.jitter;
  config.seed = g.seed;
  if (a.samples > 0) config.samples_per_class = a.samples;
  if (a.duration > 0.0) config.duration_s = a.duration;
  for (const auto& spec : a.add_programs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw Error(ErrorKind::invalid_argument, "--add-programs expects SUBCLASS=p1,p2");
    std::vector<std::string> programs;
    std::stringstream list(spec.substr(eq + 1));
    for (std::string p; std::getline(list, p, ',');) {
      if (!p.empty()) programs.push_back(p);
    }
    config.add_programs(spec.substr(0, eq), programs);
  }
  const auto root = under_out_dir(g, a.out, "synthetic");
  const auto dataset = generate_dataset(config);
  save_dataset(dataset, root);
  spdlog::info("wrote {} samples to {}", dataset.size(), root.string());
  std::cout << root.string() << "\n";
  return 0;
}

int cmd_train(const Global& g, const TrainArgs& a) {
  const auto dataset = load(a.dataset, a.cumulative);
  auto features = extract_all(dataset);

  std::vector<std::string> classes;
  std::vector<int> labels;
  if (a.target == "binary") {
    classes = {"non-mining", "mining"};
    for (auto t : features.tasks) labels.push_back(static_cast<int>(t));
  } else {
    std::set<std::string> names;
    std::vector<std::size_t> rows;
    for (Eigen::Index i = 0; i < features.size(); ++i) {
      if (features.tasks[i] == Task::mining) {
        names.insert(features.subclasses[i]);
        rows.push_back(static_cast<std::size_t>(i));
      }
    }
    if (names.size() < 2) {
      throw Error(ErrorKind::training, "currency target needs at least 2 mining subclasses, found " +
                                           std::to_string(names.size()));
    }
    classes.assign(names.begin(), names.end());
    features = features.rows(rows);
    for (const auto& s : features.subclasses) {
      labels.push_back(static_cast<int>(std::find(classes.begin(), classes.end(), s) - classes.begin()));
    }
  }

  PipelineConfig config;
  config.classifier = parse_classifier(a.classifier);
  config.folds = a.folds;
  configure_grid(config, a.grid);

  ModelBundle bundle;
  bundle.target = a.target;
  bundle.classes = classes;
  bundle.pipeline = train_pipeline(features, labels, static_cast<int>(classes.size()), config, g.seed);
  const auto& first = dataset.samples.front().sample;
  bundle.provenance = {g.seed,
                       describe(bundle.pipeline.winner),
                       bundle.pipeline.cv_f1,
                       first.meta.machine_id,
                       static_cast<std::size_t>(features.size()),
                       first.meta.duration_s,
                       first.meta.rate_hz};

  const auto path = under_out_dir(g, a.out, "model.json");
  save_model(bundle, path);
  spdlog::info("grid-search winner: {} (cv f1 {:.4f})", bundle.provenance.winner, bundle.pipeline.cv_f1);
  std::cout << nlohmann::json{{"model", path.string()},
                              {"winner", bundle.provenance.winner},
                              {"cv_f1", bundle.pipeline.cv_f1},
                              {"selected_features", bundle.pipeline.mask.count()}}
                   .dump()
            << "\n";
  return 0;
}

int cmd_experiment(const Global& g, const ExperimentArgs& a) {
  ExperimentSpec spec;
  spec.kind = parse_experiment_kind(a.kind);
  spec.runs = a.runs;
  spec.seed = g.seed;
  spec.test_fraction = a.test_fraction;
  spec.pipeline.classifier = parse_classifier(a.classifier);
  spec.pipeline.folds = a.folds;
  configure_grid(spec.pipeline, a.grid);
  if (!a.psi.empty()) spec.psi = a.psi;
  if (!a.lengths.empty()) spec.lengths_s = a.lengths;
  spec.designated_subclass = a.designated;
  spec.include_same_program = a.include_same_program;
  spec.control_shuffle = a.shuffle;
  spec.validate();

  const auto dataset = load(a.dataset, a.cumulative);
  const auto report = run_experiment(dataset, spec);
  const auto dir = under_out_dir(g, a.out, to_string(spec.kind));
  write_report(report, dir);
  spdlog::info("report written to {} ({:.1f} s)", dir.string(), report.wall_clock_s);
  std::cout << to_text(report);
  return 0;
}

std::string timestamp() {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::system_clock::now().time_since_epoch())
                      .count();
  return std::to_string(ms);
}

int cmd_watch(const Global&, const WatchArgs& a) {
  const auto bundle = load_model(a.model);
  const auto host = host_machine_id();
  if (bundle.provenance.machine_id != host) {
    const auto msg = fmt::format(
        "model was trained on '{}' but this host is '{}'; profiles do not transfer across processors",
        bundle.provenance.machine_id, host);
    if (a.strict) throw Error(ErrorKind::model_mismatch, msg);
    spdlog::warn("{}", msg);
  }
  if (a.window != bundle.provenance.window_s) {
    spdlog::info("watch window {}s differs from the {}s training window", a.window, bundle.provenance.window_s);
  }
  const auto positive = bundle.positive_class();

  for (int round = 0; a.iterations == 0 || round < a.iterations; ++round) {
    const auto round_start = std::chrono::steady_clock::now();
    const auto candidates = list_candidates(a.top_n, a.candidate_interval);

    std::vector<std::optional<RawSample>> samples(candidates.size());
    std::vector<std::optional<Error>> failures(candidates.size());
    {
      std::vector<std::jthread> sessions;
      for (std::size_t i = 0; i < candidates.size(); ++i) {
        sessions.emplace_back([&, i] {
          SamplerConfig config;
          config.pid = candidates[i].pid;
          config.rate_hz = a.rate;
          config.duration_s = a.window;
          config.program_id = candidates[i].command;
          try {
            samples[i] = record(config);
          } catch (const Error& e) {
            failures[i] = e;
          }
        });
      }
    }

    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto& c = candidates[i];
      if (failures[i]) {
        if (failures[i]->kind() == ErrorKind::counters_unavailable) throw *failures[i];
        spdlog::debug("skipping pid {}: {}", c.pid, failures[i]->what());
        continue;
      }
      if (samples[i]->rows() < 2) continue;
      const Eigen::VectorXd raw = extract(impute(*samples[i]));
      const Eigen::MatrixXd votes = bundle.pipeline.vote_fractions(raw.transpose());
      const Eigen::VectorXi label = bundle.pipeline.predict(raw.transpose());
      const int predicted = label[0];
      // The score is the share of votes for the positive class (or for the
      // predicted class when the model has none); thresholding it is an
      // operational addition on top of the hard label.
      const double score = votes(0, positive ? *positive : predicted);
      const bool alert = positive && score >= a.threshold;
      std::cout << fmt::format("{} pid={} command={} verdict={} score={:.3f}{}\n", timestamp(), c.pid, c.command,
                               bundle.classes[static_cast<std::size_t>(predicted)], score, alert ? " ALERT" : "")
                << std::flush;
    }

    if (a.interval > 0.0) {
      std::this_thread::sleep_until(round_start + std::chrono::duration<double>(a.interval));
    }
  }
  return 0;
}

int cmd_features(const Global& g, const FeaturesArgs& a) {
  const auto features = extract_all(load(a.dataset, a.cumulative));
  const auto path = under_out_dir(g, a.out, "features.csv");
  write_features_csv(features, path);
  std::cout << path.string() << "\n";
  return 0;
}

void setup_logging(const std::string& level) {
  auto logger = spdlog::stderr_color_mt("minerwatch");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(level));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detect cryptomining processes from performance-counter traces"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value file mirroring the flags; flags win");

  Global g;
  if (const char* env = std::getenv("MINERWATCH_OUT_DIR")) g.out_dir = env;
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--out-dir", g.out_dir, "default output directory (env MINERWATCH_OUT_DIR)")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)");
  app.add_option("--log-level", g.log_level)
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}))
      ->capture_default_str();

  RecordArgs rec;
  auto* record_cmd = app.add_subcommand("record", "record one sample of a running process");
  record_cmd->add_option("--pid", rec.pid, "target process")->required()->check(CLI::PositiveNumber);
  record_cmd->add_option("--duration", rec.duration, "seconds")->check(CLI::PositiveNumber)->capture_default_str();
  record_cmd->add_option("--rate", rec.rate, "readings per second")->check(CLI::PositiveNumber)->capture_default_str();
  record_cmd->add_option("--warmup", rec.warmup, "seconds skipped before recording")->check(CLI::NonNegativeNumber);
  record_cmd->add_option("--label", rec.label, "task/subclass, e.g. mining/BTC");
  record_cmd->add_option("--id", rec.id, "sample id inside --dataset");
  record_cmd->add_option("--program", rec.program, "program name stored with the sample");
  record_cmd->add_option("--out", rec.out, "output CSV");
  record_cmd->add_option("--dataset", rec.dataset, "dataset root to add the sample to");
  record_cmd->add_flag("--require-access", rec.require_access,
                       "fail on permission-refused counters instead of leaving NaN columns");

  SynthArgs syn;
  auto* synth_cmd = app.add_subcommand("synth", "write a synthetic dataset");
  synth_cmd->add_option("--preset", syn.preset)->check(CLI::IsMember({"paper", "small"}))->capture_default_str();
  synth_cmd->add_option("--divergence", syn.divergence)->check(CLI::NonNegativeNumber)->capture_default_str();
  synth_cmd->add_option("--jitter", syn.jitter, "per-program perturbation")->check(CLI::NonNegativeNumber);
  synth_cmd->add_option("--samples", syn.samples, "samples per class (overrides the preset)")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--duration", syn.duration, "seconds per sample (overrides the preset)")
      ->check(CLI::PositiveNumber);
  synth_cmd->add_option("--add-programs", syn.add_programs, "SUBCLASS=prog1,prog2 (repeatable)");
  synth_cmd->add_option("--out", syn.out, "dataset root");

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "train a model bundle on a dataset");
  train_cmd->add_option("--dataset", tr.dataset)->required();
  train_cmd->add_option("--target", tr.target)->check(CLI::IsMember({"binary", "currency"}))->capture_default_str();
  train_cmd->add_option("--classifier", tr.classifier)->check(CLI::IsMember({"rf", "svm"}))->capture_default_str();
  train_cmd->add_option("--grid", tr.grid)->check(CLI::IsMember({"full", "quick"}))->capture_default_str();
  train_cmd->add_option("--folds", tr.folds)->check(CLI::Range(2, 100))->capture_default_str();
  train_cmd->add_option("--out", tr.out, "model file");
  train_cmd->add_flag("--cumulative-to-delta", tr.cumulative, "stored values are cumulative counts");

  ExperimentArgs ex;
  auto* exp_cmd = app.add_subcommand("experiment", "run one evaluation experiment");
  exp_cmd->add_option("--kind", ex.kind)
      ->check(CLI::IsMember(
          {"binary", "currency", "nested", "sample-length", "feature-relevance", "unseen-miner"}))
      ->capture_default_str();
  exp_cmd->add_option("--dataset", ex.dataset)->required();
  exp_cmd->add_option("--runs", ex.runs)->check(CLI::Range(2, 10000))->capture_default_str();
  exp_cmd->add_option("--classifier", ex.classifier)->check(CLI::IsMember({"rf", "svm"}))->capture_default_str();
  exp_cmd->add_option("--grid", ex.grid)->check(CLI::IsMember({"full", "quick"}))->capture_default_str();
  exp_cmd->add_option("--folds", ex.folds)->check(CLI::Range(2, 100))->capture_default_str();
  exp_cmd->add_option("--test-fraction", ex.test_fraction)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  exp_cmd->add_option("--psi", ex.psi, "comma-separated psi values")->delimiter(',')->check(CLI::Range(0.0, 100.0));
  exp_cmd->add_option("--lengths", ex.lengths, "comma-separated sample lengths in seconds")
      ->delimiter(',')
      ->check(CLI::PositiveNumber);
  exp_cmd->add_option("--designated", ex.designated, "subclass with several programs")->capture_default_str();
  exp_cmd->add_flag("--include-same-program", ex.include_same_program, "also score X_X pairs");
  exp_cmd->add_flag("--shuffle-labels", ex.shuffle, "negative control: permute labels first");
  exp_cmd->add_option("--out", ex.out, "report directory");
  exp_cmd->add_flag("--cumulative-to-delta", ex.cumulative, "stored values are cumulative counts");

  WatchArgs w;
  auto* watch_cmd = app.add_subcommand("watch", "classify the busiest processes continuously");
  watch_cmd->add_option("--model", w.model)->required();
  watch_cmd->add_option("--top-n", w.top_n)->check(CLI::PositiveNumber)->capture_default_str();
  watch_cmd->add_option("--window", w.window, "seconds recorded per verdict")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  watch_cmd->add_option("--threshold", w.threshold, "alert when the mining vote share reaches this")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  watch_cmd->add_option("--interval", w.interval, "seconds between round starts (0 = back to back)")
      ->check(CLI::NonNegativeNumber);
  watch_cmd->add_option("--rate", w.rate)->check(CLI::PositiveNumber)->capture_default_str();
  watch_cmd->add_option("--candidate-interval", w.candidate_interval, "seconds of CPU usage used to rank processes")
      ->check(CLI::PositiveNumber);
  watch_cmd->add_option("--iterations", w.iterations, "rounds to run (0 = forever)")->check(CLI::NonNegativeNumber);
  watch_cmd->add_flag("--strict", w.strict, "refuse a model trained on another processor");

  FeaturesArgs fa;
  auto* features_cmd = app.add_subcommand("features", "dump the 336-slot feature table of a dataset");
  features_cmd->add_option("--dataset", fa.dataset)->required();
  features_cmd->add_option("--out", fa.out, "CSV path");
  features_cmd->add_flag("--cumulative-to-delta", fa.cumulative, "stored values are cumulative counts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  setup_logging(g.log_level);
  if (g.threads > 0) set_thread_count(g.threads);

  try {
    if (*record_cmd) return cmd_record(g, rec);
    if (*synth_cmd) return cmd_synth(g, syn);
    if (*train_cmd) return cmd_train(g, tr);
    if (*exp_cmd) return cmd_experiment(g, ex);
    if (*watch_cmd) return cmd_watch(g, w);
    if (*features_cmd) return cmd_features(g, fa);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 1;
}
