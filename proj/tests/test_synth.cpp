#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "minerwatch/synth.hpp"

using namespace minerwatch;

TEST(Synth, StandardPresetShape) {
  const auto config = SynthConfig::standard();
  ASSERT_EQ(config.subclasses.size(), 22u);
  int mining = 0;
  for (const auto& s : config.subclasses) mining += s.task == Task::mining;
  EXPECT_EQ(mining, 11);
  const auto profiles = make_profiles(config);
  EXPECT_EQ(profiles.size(), 22u);
  // one sample per class is enough to check the shape of the full preset
  const auto sample = generate_sample(profiles.front(), config, 1);
  EXPECT_EQ(sample.rows(), 300);
  EXPECT_EQ(sample.readings.cols(), 28);
  EXPECT_NO_THROW(sample.validate());
}

TEST(Synth, SmallPreset) {
  const auto d = generate_dataset(SynthConfig::small());
  EXPECT_EQ(d.size(), 60u);
  EXPECT_NO_THROW(d.validate());
  std::set<std::string> ids;
  for (const auto& s : d.samples) {
    EXPECT_EQ(s.sample.rows(), 50);
    EXPECT_EQ(s.sample.meta.machine_id, "synthetic");
    ids.insert(s.id);
    EXPECT_EQ(s.id.rfind(s.subclass + "-", 0), 0u) << s.id;
  }
  EXPECT_EQ(ids.size(), 60u);
  EXPECT_EQ(d.counts_per_subclass().at("BTC"), 10u);
}

TEST(Synth, NonNegativeIntegerCounts) {
  const auto d = generate_dataset(SynthConfig::small());
  for (const auto& s : d.samples) {
    EXPECT_GE(s.sample.readings.minCoeff(), 0.0);
    EXPECT_TRUE((s.sample.readings.array() == s.sample.readings.array().round()).all());
  }
}

TEST(Synth, SameSeedSameData) {
  const auto a = generate_dataset(SynthConfig::small());
  const auto b = generate_dataset(SynthConfig::small());
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.samples[i].id, b.samples[i].id);
    EXPECT_TRUE(a.samples[i].sample.readings == b.samples[i].sample.readings);
  }
  auto other = SynthConfig::small();
  other.seed = 11;
  EXPECT_FALSE(generate_dataset(other).samples[0].sample.readings == a.samples[0].sample.readings);
}

TEST(Synth, ZeroDivergenceGivesIdenticalProfiles) {
  auto config = generic_config(3, 3, 0.0, 10);
  const auto profiles = make_profiles(config);
  for (const auto& p : profiles) {
    EXPECT_TRUE(p.log_level == profiles[0].log_level);
    EXPECT_TRUE(p.spread == profiles[0].spread);
    EXPECT_EQ(p.persistence, profiles[0].persistence);
  }
}

TEST(Synth, DivergenceScalesProfileDistance) {
  double previous = -1;
  for (double d : {0.0, 0.5, 1.0, 2.0}) {
    const auto profiles = make_profiles(generic_config(2, 2, d, 10));
    const double dist = (profiles[0].log_level - profiles[2].log_level).norm();
    EXPECT_GT(dist, previous);
    previous = dist;
  }
}

TEST(Synth, ProfilesDependOnlyOnNames) {
  const auto full = make_profiles(SynthConfig::standard());
  const auto small = make_profiles(SynthConfig::small());
  for (const auto& s : small) {
    bool found = false;
    for (const auto& f : full) {
      if (f.subclass == s.subclass && f.program == s.program) {
        EXPECT_TRUE(f.log_level == s.log_level);
        found = true;
      }
    }
    EXPECT_TRUE(found) << s.subclass;
  }
}

TEST(Synth, ZeroPersistenceHasNoAutocorrelation) {
  auto config = generic_config(1, 1, 1.0, 3);
  config.duration_s = 200.0;
  auto profile = make_profiles(config)[0];
  profile.persistence = 0.0;
  const auto sample = generate_sample(profile, config, 42);
  const Eigen::Index n = sample.rows();
  for (Eigen::Index e = 0; e < 28; e += 5) {
    const Eigen::VectorXd x = sample.readings.col(e);
    const double mean = x.mean();
    double num = 0, den = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      den += (x[i] - mean) * (x[i] - mean);
      if (i > 0) num += (x[i] - mean) * (x[i - 1] - mean);
    }
    EXPECT_LT(std::abs(num / den), 0.1) << "event " << e;
  }
  profile.persistence = 0.9;
  const auto sticky = generate_sample(profile, config, 42);
  const Eigen::VectorXd x = sticky.readings.col(0);
  const double mean = x.mean();
  double num = 0, den = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    den += (x[i] - mean) * (x[i] - mean);
    if (i > 0) num += (x[i] - mean) * (x[i - 1] - mean);
  }
  EXPECT_GT(num / den, 0.5);
}

TEST(Synth, ExtraProgramsGetOwnSamples) {
  auto config = SynthConfig::small();
  config.add_programs("BTC", {"cgminer"});
  const auto d = generate_dataset(config);
  EXPECT_EQ(d.size(), 70u);
  EXPECT_EQ(d.counts_per_subclass().at("BTC"), 20u);
  int cg = 0;
  for (const auto& s : d.samples) cg += s.sample.meta.program_id == "cgminer";
  EXPECT_EQ(cg, 10);
}
