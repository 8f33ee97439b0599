#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "minerwatch/events.hpp"
#include "minerwatch/metrics.hpp"
#include "minerwatch/pipeline.hpp"

namespace minerwatch {

enum class ExperimentKind { binary, currency, nested, sample_length, feature_relevance, unseen_miner };

std::string to_string(ExperimentKind k);
ExperimentKind parse_experiment_kind(const std::string& s);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::binary;
  int runs = 10;
  std::uint64_t seed = 10;  // run r uses seed + r
  double test_fraction = 0.1;
  PipelineConfig pipeline;

  std::vector<double> lengths_s{5, 10, 15, 20, 25, 30};
  std::vector<double> psi{10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
  std::string designated_subclass = "BTC";
  bool include_same_program = false;
  /// Negative control: permute labels across samples before running.
  bool control_shuffle = false;

  /// Throws Error(invalid_argument) when a field is out of range.
  void validate() const;
};

struct ConfigurationResult {
  std::string label;
  std::optional<double> x;  // curve abscissa (seconds or psi)
  std::vector<std::string> classes;
  std::vector<Metrics> runs;
  std::vector<std::string> winners;  // per run
  std::vector<double> cv_f1;         // per run
  AggregateMetrics aggregate;
  /// Stage name -> grid-search winner counts.
  std::vector<std::pair<std::string, SelectionCounts>> selections;
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<ConfigurationResult> configurations;
  double wall_clock_s = 0.0;
};

ExperimentReport run_binary(const Dataset& dataset, const ExperimentSpec& spec, LeakageAudit* audit = nullptr);
ExperimentReport run_currency(const Dataset& dataset, const ExperimentSpec& spec, LeakageAudit* audit = nullptr);
ExperimentReport run_nested(const Dataset& dataset, const ExperimentSpec& spec, LeakageAudit* audit = nullptr);
ExperimentReport run_sample_length(const Dataset& dataset, const ExperimentSpec& spec,
                                   LeakageAudit* audit = nullptr);
ExperimentReport run_feature_relevance(const Dataset& dataset, const ExperimentSpec& spec,
                                       LeakageAudit* audit = nullptr);
ExperimentReport run_unseen_miner(const Dataset& dataset, const ExperimentSpec& spec,
                                  LeakageAudit* audit = nullptr);

/// Dispatches on spec.kind.
ExperimentReport run_experiment(const Dataset& dataset, const ExperimentSpec& spec, LeakageAudit* audit = nullptr);

/// Final 12-way labels of the two-stage classifier: a sample rejected by
/// stage 1 gets `n_currencies` (non-mining), otherwise its stage-2 label.
std::vector<int> compose_nested(std::span<const int> stage1_mining, std::span<const int> stage2_currency,
                                int n_currencies);

/// Copy of `dataset` with (task, subclass) labels permuted across samples.
Dataset shuffle_labels(const Dataset& dataset, std::uint64_t seed);

/// Copy of `dataset` keeping the first `length_s` seconds of every sample.
Dataset truncate_samples(const Dataset& dataset, double length_s);

nlohmann::json to_json(const ExperimentSpec& spec);
nlohmann::json to_json(const ConfigurationResult& result);
/// Deterministic for a given dataset and spec (wall-clock excluded).
nlohmann::json to_json(const ExperimentReport& report);
std::string to_text(const ExperimentReport& report);

/// Writes report.json, report.txt, timing.json, confusion_<label>.csv and,
/// for curve experiments, curve.csv (x,value,margin of F1).
void write_report(const ExperimentReport& report, const std::filesystem::path& out_dir);

}  // namespace minerwatch
