#include <algorithm>
#include <fstream>
#include <map>
#include <set>

#include <gtest/gtest.h>

#include "minerwatch/error.hpp"
#include "minerwatch/experiments.hpp"
#include "minerwatch/synth.hpp"
#include "test_util.hpp"

using namespace minerwatch;

namespace {

const Dataset& small_dataset() {
  static const Dataset d = [] {
    auto config = SynthConfig::small();
    config.add_programs("BTC", {"cgminer"});
    return generate_dataset(config);
  }();
  return d;
}

ExperimentSpec quick_spec(ExperimentKind kind) {
  ExperimentSpec spec;
  spec.kind = kind;
  spec.runs = 2;
  spec.pipeline.rf_grid = RFGrid::quick();
  spec.pipeline.folds = 3;
  spec.pipeline.rank_trees = 20;
  return spec;
}

}  // namespace

TEST(Nested, ComposeLabels) {
  const std::vector<int> stage1{1, 0, 1, 0};
  const std::vector<int> stage2{3, 2, 0, 7};
  EXPECT_EQ(compose_nested(stage1, stage2, 11), (std::vector<int>{3, 11, 0, 11}));
  EXPECT_THROW(compose_nested(stage1, std::vector<int>{1}, 11), Error);
}

TEST(Shuffle, PreservesLabelMultiset) {
  const auto& d = small_dataset();
  const auto s = shuffle_labels(d, 10);
  ASSERT_EQ(s.size(), d.size());
  std::map<std::string, int> before, after;
  int moved = 0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    ++before[d.samples[i].subclass];
    ++after[s.samples[i].subclass];
    EXPECT_EQ(s.samples[i].task, s.manifest.at(s.samples[i].subclass));
    EXPECT_TRUE(s.samples[i].sample.readings == d.samples[i].sample.readings);
    moved += s.samples[i].subclass != d.samples[i].subclass;
  }
  EXPECT_EQ(before, after);
  EXPECT_GT(moved, static_cast<int>(d.size()) / 2);
}

TEST(Truncate, KeepsHead) {
  const auto& d = small_dataset();
  const auto t = truncate_samples(d, 2.0);
  for (std::size_t i = 0; i < d.size(); ++i) {
    ASSERT_EQ(t.samples[i].sample.rows(), 20);
    EXPECT_TRUE(t.samples[i].sample.readings == d.samples[i].sample.readings.topRows(20));
    EXPECT_EQ(t.samples[i].sample.meta.duration_s, 2.0);
  }
  EXPECT_THROW(truncate_samples(d, 6.0), Error);
  EXPECT_THROW(truncate_samples(d, 0.0), Error);
}

TEST(Spec, Validation) {
  ExperimentSpec spec;
  EXPECT_NO_THROW(spec.validate());
  spec.runs = 1;
  EXPECT_THROW(spec.validate(), Error);
  spec = {};
  spec.psi = {0};
  EXPECT_THROW(spec.validate(), Error);
  spec = {};
  spec.test_fraction = 1.5;
  EXPECT_THROW(spec.validate(), Error);
  EXPECT_EQ(parse_experiment_kind("feature-relevance"), ExperimentKind::feature_relevance);
  EXPECT_EQ(to_string(ExperimentKind::unseen_miner), "unseen-miner");
  EXPECT_THROW(parse_experiment_kind("bogus"), Error);
}

TEST(Experiments, BinaryReportIsDeterministicAndLeakFree) {
  LeakageAudit audit;
  const auto spec = quick_spec(ExperimentKind::binary);
  const auto a = run_experiment(small_dataset(), spec, &audit);
  const auto b = run_experiment(small_dataset(), spec);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
  ASSERT_EQ(a.configurations.size(), 1u);
  const auto& c = a.configurations[0];
  EXPECT_EQ(c.classes, (std::vector<std::string>{"non-mining", "mining"}));
  EXPECT_EQ(c.runs.size(), 2u);
  EXPECT_EQ(c.aggregate.confusion.sum(), 2 * 7);  // 7 strata, one test sample each
  EXPECT_GE(c.aggregate.f1.mean, 0.9);

  std::map<std::string, std::map<std::string, std::set<std::string>>> by_context;
  for (const auto& r : audit.records()) {
    by_context[r.context][r.stage].insert(r.ids.begin(), r.ids.end());
  }
  EXPECT_EQ(by_context.size(), 2u);
  for (const auto& [context, stages] : by_context) {
    const auto& test = stages.at("split-test");
    ASSERT_FALSE(test.empty());
    for (const auto& [stage, ids] : stages) {
      if (stage == "split-test") continue;
      for (const auto& id : ids) EXPECT_EQ(test.count(id), 0u) << context << " " << stage << " " << id;
    }
    EXPECT_TRUE(stages.count("scaler"));
    EXPECT_TRUE(stages.count("ranking"));
  }
}

TEST(Experiments, CurrencyAndNestedLabels) {
  const auto cur = run_experiment(small_dataset(), quick_spec(ExperimentKind::currency));
  EXPECT_EQ(cur.configurations[0].classes, (std::vector<std::string>{"BCD", "BTC", "BTM"}));
  // BTC has two programs -> two test samples per run
  EXPECT_EQ(cur.configurations[0].aggregate.confusion.row(1).sum(), 4);

  const auto nested = run_experiment(small_dataset(), quick_spec(ExperimentKind::nested));
  const auto& c = nested.configurations[0];
  EXPECT_EQ(c.classes.back(), "non-mining");
  EXPECT_EQ(c.classes.size(), 4u);
  EXPECT_EQ(c.aggregate.confusion.row(3).sum(), 2 * 3);
  std::set<std::string> stages;
  for (const auto& [stage, counts] : c.selections) stages.insert(stage);
  EXPECT_EQ(stages, (std::set<std::string>{"stage1", "stage2"}));
}

TEST(Experiments, CurvesHaveOneRowPerValue) {
  testutil::TempDir dir;
  auto spec = quick_spec(ExperimentKind::feature_relevance);
  spec.psi = {40, 100};
  const auto report = run_experiment(small_dataset(), spec);
  ASSERT_EQ(report.configurations.size(), 2u);
  EXPECT_EQ(report.configurations[0].x, 40.0);
  EXPECT_EQ(report.configurations[0].label, "psi=40");
  write_report(report, dir.path());
  std::ifstream curve(dir / "curve.csv");
  std::string line;
  int lines = 0;
  while (std::getline(curve, line)) ++lines;
  EXPECT_EQ(lines, 3);  // header + 2
  EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
  EXPECT_TRUE(std::filesystem::exists(dir / "report.txt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "timing.json"));

  spec = quick_spec(ExperimentKind::sample_length);
  spec.lengths_s = {1, 5};
  const auto lengths = run_experiment(small_dataset(), spec);
  ASSERT_EQ(lengths.configurations.size(), 2u);
  EXPECT_EQ(lengths.configurations[1].label, "length=5s");
}

TEST(Experiments, FullPsiMatchesAllFeatures) {
  auto spec = quick_spec(ExperimentKind::feature_relevance);
  spec.psi = {100};
  const auto curve = run_experiment(small_dataset(), spec);
  auto all = quick_spec(ExperimentKind::binary);
  all.pipeline.selection = SelectionRule::all;
  const auto reference = run_experiment(small_dataset(), all);
  EXPECT_EQ(curve.configurations[0].aggregate.f1.mean, reference.configurations[0].aggregate.f1.mean);
  EXPECT_TRUE(curve.configurations[0].aggregate.confusion == reference.configurations[0].aggregate.confusion);
}

TEST(Experiments, UnseenMinerPairs) {
  const auto report = run_experiment(small_dataset(), quick_spec(ExperimentKind::unseen_miner));
  std::set<std::string> labels;
  for (const auto& c : report.configurations) labels.insert(c.label);
  EXPECT_EQ(labels.size(), 2u);
  EXPECT_TRUE(labels.count("train=cpuminer-multi,test=cgminer"));

  auto spec = quick_spec(ExperimentKind::unseen_miner);
  spec.include_same_program = true;
  EXPECT_EQ(run_experiment(small_dataset(), spec).configurations.size(), 4u);

  spec.include_same_program = false;
  spec.designated_subclass = "BCD";  // one program only
  EXPECT_THROW(run_experiment(small_dataset(), spec), Error);
}

TEST(Experiments, BinaryF1GrowsWithDivergence) {
  std::vector<double> f1;
  for (double d : {0.0, 0.25, 0.5, 1.0}) {
    auto config = generic_config(3, 3, d, 10);
    config.samples_per_class = 20;
    config.duration_s = 10;
    auto spec = quick_spec(ExperimentKind::binary);
    spec.runs = 5;
    spec.test_fraction = 0.2;
    f1.push_back(run_experiment(generate_dataset(config), spec).configurations[0].aggregate.f1.mean);
  }
  EXPECT_LE(f1[0], 0.65);
  for (std::size_t i = 1; i < f1.size(); ++i) EXPECT_GE(f1[i], f1[i - 1] - 0.02) << "step " << i;
}
