#include "minerwatch/events.hpp"

#include <algorithm>

#include "minerwatch/error.hpp"

namespace minerwatch {

namespace {

using enum EventCategory;

constexpr std::array<EventKind, kEventCount> kEvents{{
    {"branch-instructions", hardware, 0},
    {"branch-load-misses", hardware, 1},
    {"branch-loads", hardware, 2},
    {"branch-misses", hardware, 3},
    {"bus-cycles", hardware, 4},
    {"cache-misses", hardware_cache, 5},
    {"cache-references", hardware_cache, 6},
    {"context-switches", software, 7},
    {"cpu-migrations", software, 8},
    {"dTLB-load-misses", hardware_cache, 9},
    {"dTLB-loads", hardware_cache, 10},
    {"dTLB-store-misses", hardware_cache, 11},
    {"dTLB-stores", hardware_cache, 12},
    {"instructions", hardware, 13},
    {"iTLB-load-misses", hardware_cache, 14},
    {"iTLB-loads", hardware_cache, 15},
    {"L1-dcache-load-misses", hardware_cache, 16},
    {"L1-dcache-loads", hardware_cache, 17},
    {"L1-dcache-stores", hardware_cache, 18},
    {"LLC-load-misses", hardware_cache, 19},
    {"LLC-loads", hardware_cache, 20},
    {"LLC-store-misses", hardware_cache, 21},
    {"LLC-stores", hardware_cache, 22},
    {"mem-loads", hardware_cache, 23},
    {"mem-stores", hardware_cache, 24},
    {"page-faults", software, 25},
    {"ref-cycles", hardware, 26},
    {"task-clock", software, 27},
}};

}  // namespace

const std::array<EventKind, kEventCount>& all_events() { return kEvents; }

std::optional<std::size_t> event_index(std::string_view name) {
  for (const auto& e : kEvents) {
    if (e.name == name) return e.index;
  }
  return std::nullopt;
}

std::string_view to_string(EventCategory category) {
  switch (category) {
    case hardware: return "hardware";
    case software: return "software";
    case hardware_cache: return "hardware-cache";
  }
  return "?";
}

std::string_view to_string(Task task) {
  return task == Task::mining ? "mining" : "non-mining";
}

Task parse_task(std::string_view text) {
  if (text == "mining") return Task::mining;
  if (text == "non-mining") return Task::non_mining;
  throw Error(ErrorKind::format, "unknown task '" + std::string(text) + "'");
}

std::int64_t expected_rows(double rate_hz, double duration_s) {
  return static_cast<std::int64_t>(std::llround(rate_hz * duration_s));
}

void RawSample::validate() const {
  if (readings.cols() != static_cast<Eigen::Index>(kEventCount)) {
    throw Error(ErrorKind::format, "expected 28 event columns, got " +
                                       std::to_string(readings.cols()));
  }
  if (timestamps_ms.size() != readings.rows()) {
    throw Error(ErrorKind::format, "timestamp count does not match reading count");
  }
  if (!meta.truncated && readings.rows() != expected_rows(meta.rate_hz, meta.duration_s)) {
    throw Error(ErrorKind::format, "row count mismatch: got " + std::to_string(readings.rows()) +
                                       ", expected " +
                                       std::to_string(expected_rows(meta.rate_hz, meta.duration_s)));
  }
  for (Eigen::Index i = 1; i < timestamps_ms.size(); ++i) {
    if (!(timestamps_ms[i] > timestamps_ms[i - 1])) {
      throw Error(ErrorKind::format, "timestamps not strictly increasing at row " + std::to_string(i));
    }
  }
  // NaN compares false, so missing cells pass.
  if ((readings.array() < 0.0).any()) {
    throw Error(ErrorKind::format, "negative counter delta");
  }
}

RawSample RawSample::head(Eigen::Index n) const {
  if (n > rows()) {
    throw Error(ErrorKind::invalid_argument, "cannot take " + std::to_string(n) +
                                                 " readings from a sample of " +
                                                 std::to_string(rows()));
  }
  RawSample out;
  out.readings = readings.topRows(n);
  out.timestamps_ms = timestamps_ms.head(n);
  out.meta = meta;
  out.meta.duration_s = static_cast<double>(n) / meta.rate_hz;
  return out;
}

RawSample make_sample(const SampleMeta& meta) {
  const auto rows = expected_rows(meta.rate_hz, meta.duration_s);
  RawSample s;
  s.meta = meta;
  s.readings = Eigen::MatrixXd::Constant(rows, kEventCount, kMissing);
  const double period_ms = 1000.0 / meta.rate_hz;
  s.timestamps_ms = Eigen::VectorXd::LinSpaced(rows, period_ms, period_ms * rows);
  if (rows == 1) s.timestamps_ms[0] = period_ms;
  return s;
}

void Dataset::validate() const {
  std::optional<double> rate;
  for (const auto& s : samples) {
    auto it = manifest.find(s.subclass);
    if (it == manifest.end()) {
      throw Error(ErrorKind::format, "subclass '" + s.subclass + "' missing from manifest");
    }
    if (it->second != s.task) {
      throw Error(ErrorKind::format, "sample " + s.id + " task disagrees with manifest");
    }
    if (rate && *rate != s.sample.meta.rate_hz) {
      throw Error(ErrorKind::format, "samples do not share one sampling rate");
    }
    rate = s.sample.meta.rate_hz;
  }
}

std::map<std::string, std::size_t> Dataset::counts_per_subclass() const {
  std::map<std::string, std::size_t> counts;
  for (const auto& s : samples) ++counts[s.subclass];
  return counts;
}

}  // namespace minerwatch
