#include <set>

#include <gtest/gtest.h>

#include "minerwatch/error.hpp"
#include "minerwatch/events.hpp"

using namespace minerwatch;

TEST(Events, TwentyEightDistinctInCanonicalOrder) {
  const auto& events = all_events();
  ASSERT_EQ(events.size(), 28u);
  std::set<std::string_view> names;
  for (std::size_t i = 0; i < events.size(); ++i) {
    EXPECT_EQ(events[i].index, i);
    names.insert(events[i].name);
    EXPECT_EQ(event_index(events[i].name), i);
  }
  EXPECT_EQ(names.size(), 28u);
  EXPECT_EQ(events.front().name, "branch-instructions");
  EXPECT_EQ(events[13].name, "instructions");
  EXPECT_EQ(events.back().name, "task-clock");
  EXPECT_FALSE(event_index("cycles").has_value());
}

TEST(Events, Categories) {
  auto category = [](std::string_view name) { return all_events()[*event_index(name)].category; };
  EXPECT_EQ(category("context-switches"), EventCategory::software);
  EXPECT_EQ(category("cpu-migrations"), EventCategory::software);
  EXPECT_EQ(category("page-faults"), EventCategory::software);
  EXPECT_EQ(category("task-clock"), EventCategory::software);
  EXPECT_EQ(category("instructions"), EventCategory::hardware);
  EXPECT_EQ(category("ref-cycles"), EventCategory::hardware);
  EXPECT_EQ(category("cache-misses"), EventCategory::hardware_cache);
  EXPECT_EQ(category("LLC-loads"), EventCategory::hardware_cache);
  int software = 0;
  for (const auto& e : all_events()) software += e.category == EventCategory::software;
  EXPECT_EQ(software, 4);
}

TEST(Events, TaskNames) {
  EXPECT_EQ(parse_task("mining"), Task::mining);
  EXPECT_EQ(parse_task("non-mining"), Task::non_mining);
  EXPECT_EQ(to_string(Task::non_mining), "non-mining");
  EXPECT_THROW(parse_task("idle"), Error);
}

TEST(Events, ExpectedRows) {
  EXPECT_EQ(expected_rows(10, 30), 300);
  EXPECT_EQ(expected_rows(10, 5), 50);
  EXPECT_EQ(expected_rows(10, 1), 10);
  EXPECT_EQ(expected_rows(3, 0.5), 2);  // 1.5 rounds away from zero
}

TEST(Events, DefaultSampleShape) {
  const auto s = make_sample(SampleMeta{});
  EXPECT_EQ(s.readings.rows(), 300);
  EXPECT_EQ(s.readings.cols(), 28);
  EXPECT_EQ(s.readings.size(), 8400);
  EXPECT_EQ(s.timestamps_ms.size(), 300);
  EXPECT_DOUBLE_EQ(s.timestamps_ms[0], 100.0);
  EXPECT_DOUBLE_EQ(s.timestamps_ms[299], 30000.0);
  EXPECT_NO_THROW(s.validate());
}

TEST(Events, ValidateRejectsBrokenSamples) {
  SampleMeta meta;
  meta.duration_s = 1;
  auto s = make_sample(meta);
  s.readings.setZero();
  EXPECT_NO_THROW(s.validate());

  auto negative = s;
  negative.readings(3, 4) = -1;
  EXPECT_THROW(negative.validate(), Error);

  auto unordered = s;
  unordered.timestamps_ms[5] = unordered.timestamps_ms[4];
  EXPECT_THROW(unordered.validate(), Error);

  auto short_sample = s;
  short_sample.readings.conservativeResize(9, Eigen::NoChange);
  short_sample.timestamps_ms.conservativeResize(9);
  try {
    short_sample.validate();
    FAIL() << "expected a row-count error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("row count mismatch"), std::string::npos);
  }
  short_sample.meta.truncated = true;
  EXPECT_NO_THROW(short_sample.validate());
}

TEST(Events, NaNIsAllowedAsMissing) {
  auto s = make_sample(SampleMeta{});
  s.readings.setOnes();
  s.readings.col(23).setConstant(kMissing);
  EXPECT_NO_THROW(s.validate());
  EXPECT_TRUE(is_missing(s.readings(0, 23)));
}

TEST(Events, Head) {
  auto s = make_sample(SampleMeta{});
  s.readings.setZero();
  const auto h = s.head(50);
  EXPECT_EQ(h.rows(), 50);
  EXPECT_DOUBLE_EQ(h.meta.duration_s, 5.0);
  EXPECT_NO_THROW(h.validate());
  EXPECT_THROW(s.head(301), Error);
}

TEST(Events, DatasetManifestConsistency) {
  Dataset ds;
  ds.manifest = {{"BTC", Task::mining}};
  LabeledSample ls{"a", make_sample(SampleMeta{}), Task::mining, "BTC"};
  ls.sample.readings.setZero();
  ds.samples.push_back(ls);
  EXPECT_NO_THROW(ds.validate());
  ds.samples[0].task = Task::non_mining;
  EXPECT_THROW(ds.validate(), Error);
  ds.samples[0].task = Task::mining;
  ds.samples[0].subclass = "XMR";
  EXPECT_THROW(ds.validate(), Error);
}
