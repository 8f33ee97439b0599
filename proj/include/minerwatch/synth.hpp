#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "minerwatch/events.hpp"

namespace minerwatch {

/// Per-event generative parameters of one (task, subclass, program) class.
/// Readings follow a positive AR(1) process around exp(log_level) with
/// log-normal multiplicative noise.
struct ClassProfile {
  Task task = Task::non_mining;
  std::string subclass;
  std::string program;
  Eigen::VectorXd log_level;  // 28
  Eigen::VectorXd spread;     // 28, sigma of the log-normal noise, > 0
  double persistence = 0.0;   // AR(1) coefficient in [0, 1)
};

struct SubclassSpec {
  Task task = Task::non_mining;
  std::string subclass;
  std::vector<std::string> programs;  // first one is the reference program
};

struct SynthConfig {
  std::vector<SubclassSpec> subclasses;
  int samples_per_class = 50;  // per (subclass, program)
  double duration_s = 30.0;
  double rate_hz = 10.0;
  /// 0 makes every class draw from the same distribution; larger values
  /// separate the class profiles.
  double divergence = 1.0;
  /// Per-event log-level perturbation of non-reference programs.
  double program_jitter = 0.1;
  std::uint64_t seed = 10;

  /// 11 currencies and 11 non-mining workloads, 50 samples of 30 s each.
  static SynthConfig standard();
  /// 3 + 3 subclasses, 10 samples of 5 s each.
  static SynthConfig small();

  /// Adds alternative miner programs to `subclass`.
  void add_programs(const std::string& subclass, const std::vector<std::string>& programs);
};

/// Class profiles in configuration order (subclass-major, then program).
/// A class profile depends only on the seed, divergence and its own names,
/// so a subset of subclasses yields the same profiles.
std::vector<ClassProfile> make_profiles(const SynthConfig& config);

/// Generic names `mining-<i>` / `non-mining-<i>`, one program each.
SynthConfig generic_config(int n_mining, int n_non_mining, double divergence, std::uint64_t seed);

/// One sample of `profile`; identical inputs give identical output.
RawSample generate_sample(const ClassProfile& profile, const SynthConfig& config, std::uint64_t sample_seed);

/// Full labeled dataset with manifest. Sample ids are
/// `<subclass>-<program>-<NNN>`.
Dataset generate_dataset(const SynthConfig& config);

}  // namespace minerwatch
