#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace minerwatch {

inline constexpr std::size_t kEventCount = 28;

enum class EventCategory { hardware, software, hardware_cache };

struct EventKind {
  std::string_view name;
  EventCategory category;
  std::size_t index;
};

/// The 28 monitored events in canonical column order: the left column of the
/// event table top-to-bottom, then the right column top-to-bottom.
const std::array<EventKind, kEventCount>& all_events();

std::optional<std::size_t> event_index(std::string_view name);

std::string_view to_string(EventCategory category);

enum class Task { non_mining = 0, mining = 1 };

std::string_view to_string(Task task);
Task parse_task(std::string_view text);

/// Missing counter value marker.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) { return std::isnan(v); }

/// Number of readings a window of `duration_s` at `rate_hz` holds.
std::int64_t expected_rows(double rate_hz, double duration_s);

struct SampleMeta {
  std::int64_t pid = 0;
  double rate_hz = 10.0;
  double duration_s = 30.0;
  std::string machine_id;
  std::string program_id;
  /// Set when the target vanished before the window was complete.
  bool truncated = false;
  /// Per-column fraction of time the counter was actually scheduled
  /// (1 = never multiplexed). Empty when unknown.
  std::vector<double> scaling;
};

/// One profiled window: R readings of the 28 events as per-interval deltas.
struct RawSample {
  Eigen::MatrixXd readings;       // R x 28, NaN marks a missing cell
  Eigen::VectorXd timestamps_ms;  // R strictly increasing instants
  SampleMeta meta;

  Eigen::Index rows() const { return readings.rows(); }

  /// Throws Error(format) when an invariant is violated. Truncated samples
  /// are exempt from the row-count rule.
  void validate() const;

  /// First `n` readings, with duration adjusted accordingly.
  RawSample head(Eigen::Index n) const;
};

/// Builds an empty (all-NaN) sample of the expected shape with timestamps at
/// the nominal polling instants.
RawSample make_sample(const SampleMeta& meta);

struct LabeledSample {
  std::string id;
  RawSample sample;
  Task task = Task::non_mining;
  std::string subclass;
};

struct Dataset {
  std::vector<LabeledSample> samples;
  std::map<std::string, Task> manifest;

  std::size_t size() const { return samples.size(); }

  /// Throws Error(format) on manifest inconsistency or mixed sampling rates.
  void validate() const;

  std::map<std::string, std::size_t> counts_per_subclass() const;
};

}  // namespace minerwatch
