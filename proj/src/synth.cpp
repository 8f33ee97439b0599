#include "minerwatch/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "minerwatch/error.hpp"
#include "minerwatch/parallel.hpp"
#include "minerwatch/random.hpp"

namespace minerwatch {

namespace {

struct MinerName {
  const char* currency;
  const char* program;
};

// One currency per mining algorithm, with the CPU miner that mines it.
constexpr MinerName kMiners[] = {
    {"BCD", "cpuminer-opt"},   {"BTC", "cpuminer-multi"}, {"BTM", "bytom-wallet-desktop"},
    {"DASH", "cpuminer-multi"}, {"DCR", "cpuminer-multi"}, {"ETH", "geth"},
    {"LTC", "cpuminer-multi"}, {"QRK", "cpuminer-multi"}, {"XMR", "cpuminer-multi"},
    {"XZC", "cpuminer-opt"},   {"ZEC", "nheqminer"},
};

constexpr const char* kWorkloads[] = {
    "3d-rendering", "7z-extraction", "h264-encoding", "mqueens", "namd", "netflix",
    "random-forest", "skype", "stress-ng", "team-fortress-2", "vmd",
};

Eigen::VectorXd normal_vector(Rng& rng, double sd) {
  std::normal_distribution<double> n(0.0, sd);
  Eigen::VectorXd v(static_cast<Eigen::Index>(kEventCount));
  for (auto& x : v) x = n(rng);
  return v;
}

Eigen::VectorXd uniform_vector(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Eigen::VectorXd v(static_cast<Eigen::Index>(kEventCount));
  for (auto& x : v) x = u(rng);
  return v;
}

void validate(const SynthConfig& c) {
  if (c.subclasses.empty()) throw Error(ErrorKind::invalid_argument, "no subclasses to synthesize");
  if (c.samples_per_class < 1) throw Error(ErrorKind::invalid_argument, "samples per class must be positive");
  if (!(c.rate_hz > 0.0) || !(c.duration_s > 0.0) || expected_rows(c.rate_hz, c.duration_s) < 2) {
    throw Error(ErrorKind::invalid_argument, "rate and duration must give at least 2 readings");
  }
  if (!(c.divergence >= 0.0)) throw Error(ErrorKind::invalid_argument, "divergence must be >= 0");
  if (!(c.program_jitter >= 0.0)) throw Error(ErrorKind::invalid_argument, "program jitter must be >= 0");
  std::set<std::string> names;
  for (const auto& s : c.subclasses) {
    if (!names.insert(s.subclass).second) {
      throw Error(ErrorKind::invalid_argument, "duplicate subclass '" + s.subclass + "'");
    }
    if (s.programs.empty()) throw Error(ErrorKind::invalid_argument, "subclass '" + s.subclass + "' has no program");
  }
}

}  // namespace

SynthConfig SynthConfig::standard() {
  SynthConfig c;
  for (const auto& m : kMiners) c.subclasses.push_back({Task::mining, m.currency, {m.program}});
  for (const auto* w : kWorkloads) c.subclasses.push_back({Task::non_mining, w, {w}});
  return c;
}

SynthConfig SynthConfig::small() {
  SynthConfig c;
  for (int i = 0; i < 3; ++i) c.subclasses.push_back({Task::mining, kMiners[i].currency, {kMiners[i].program}});
  for (int i = 0; i < 3; ++i) c.subclasses.push_back({Task::non_mining, kWorkloads[i], {kWorkloads[i]}});
  c.samples_per_class = 10;
  c.duration_s = 5.0;
  return c;
}

void SynthConfig::add_programs(const std::string& subclass, const std::vector<std::string>& programs) {
  for (auto& s : subclasses) {
    if (s.subclass != subclass) continue;
    for (const auto& p : programs) {
      if (std::find(s.programs.begin(), s.programs.end(), p) == s.programs.end()) s.programs.push_back(p);
    }
    return;
  }
  throw Error(ErrorKind::invalid_argument, "unknown subclass '" + subclass + "'");
}

SynthConfig generic_config(int n_mining, int n_non_mining, double divergence, std::uint64_t seed) {
  if (n_mining < 1 || n_non_mining < 1) throw Error(ErrorKind::invalid_argument, "class counts must be >= 1");
  SynthConfig c;
  for (int i = 0; i < n_mining; ++i) {
    c.subclasses.push_back({Task::mining, fmt::format("mining-{}", i), {"miner"}});
  }
  for (int i = 0; i < n_non_mining; ++i) {
    const auto name = fmt::format("non-mining-{}", i);
    c.subclasses.push_back({Task::non_mining, name, {name}});
  }
  c.divergence = divergence;
  c.seed = seed;
  return c;
}

std::vector<ClassProfile> make_profiles(const SynthConfig& config) {
  validate(config);
  const double d = config.divergence;

  Rng base_rng(derive_seed(config.seed, "base"));
  const Eigen::VectorXd base_level = uniform_vector(base_rng, 5.0, 14.0);
  const Eigen::VectorXd base_spread = uniform_vector(base_rng, 0.2, 0.5);
  const double base_rho = std::uniform_real_distribution<double>(0.2, 0.6)(base_rng);

  std::vector<ClassProfile> out;
  for (const auto& s : config.subclasses) {
    Rng task_rng(derive_seed(config.seed, std::string("task:") + std::string(to_string(s.task))));
    const Eigen::VectorXd task_shift = normal_vector(task_rng, 0.3);

    Rng sub_rng(derive_seed(config.seed, "subclass:" + s.subclass));
    const Eigen::VectorXd sub_shift = normal_vector(sub_rng, 0.3);
    const Eigen::VectorXd spread_shift = normal_vector(sub_rng, 0.2);
    const double rho_shift = std::normal_distribution<double>(0.0, 0.1)(sub_rng);

    ClassProfile reference;
    reference.task = s.task;
    reference.subclass = s.subclass;
    reference.log_level = base_level + d * (task_shift + sub_shift);
    reference.spread = base_spread.array() * (d * spread_shift).array().exp();
    reference.persistence = std::clamp(base_rho + d * rho_shift, 0.0, 0.95);

    for (std::size_t p = 0; p < s.programs.size(); ++p) {
      ClassProfile profile = reference;
      profile.program = s.programs[p];
      if (p > 0) {
        Rng prog_rng(derive_seed(config.seed, "program:" + s.subclass + "/" + s.programs[p]));
        profile.log_level += normal_vector(prog_rng, config.program_jitter);
      }
      out.push_back(std::move(profile));
    }
  }
  return out;
}

RawSample generate_sample(const ClassProfile& profile, const SynthConfig& config, std::uint64_t sample_seed) {
  SampleMeta meta;
  meta.rate_hz = config.rate_hz;
  meta.duration_s = config.duration_s;
  meta.machine_id = "synthetic";
  meta.program_id = profile.program;
  RawSample sample = make_sample(meta);

  Rng rng(sample_seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double rho = profile.persistence;
  const Eigen::Index rows = sample.rows();
  for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(kEventCount); ++e) {
    const double mu = std::exp(profile.log_level[e]);
    const double s = profile.spread[e];
    const double mean_l = std::exp(0.5 * s * s);
    auto noise = [&] { return mu * (std::exp(s * normal(rng)) - mean_l); };
    double x = mu + noise() / std::sqrt(1.0 - rho * rho);
    for (Eigen::Index t = 0; t < rows; ++t) {
      if (t > 0) x = rho * x + (1.0 - rho) * mu + noise();
      x = std::max(x, 0.0);
      sample.readings(t, e) = std::round(x);
    }
  }
  return sample;
}

Dataset generate_dataset(const SynthConfig& config) {
  const auto profiles = make_profiles(config);
  const auto per_class = static_cast<std::size_t>(config.samples_per_class);

  Dataset out;
  out.samples.resize(profiles.size() * per_class);
  for (const auto& p : profiles) out.manifest[p.subclass] = p.task;

  const std::uint64_t root = derive_seed(config.seed, "samples");
  parallel_for(out.samples.size(), [&](std::size_t k) {
    const std::size_t c = k / per_class;
    const std::size_t i = k % per_class;
    const auto& profile = profiles[c];
    const std::uint64_t seed =
        derive_seed(derive_seed(root, profile.subclass + "/" + profile.program), static_cast<std::uint64_t>(i));
    auto& s = out.samples[k];
    s.id = fmt::format("{}-{}-{:03}", profile.subclass, profile.program, i);
    s.task = profile.task;
    s.subclass = profile.subclass;
    s.sample = generate_sample(profile, config, seed);
  });
  return out;
}

}  // namespace minerwatch
