#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "minerwatch/events.hpp"

namespace minerwatch {

struct SamplerConfig {
  std::int64_t pid = 0;
  double rate_hz = 10.0;
  double duration_s = 30.0;
  /// Seconds discarded before the first recorded reading.
  double warmup_s = 0.0;
  /// Subset of event indices to open; the others stay NaN. Empty = all 28.
  std::vector<std::size_t> events;
  /// Fail with a perf_event_paranoid hint instead of recording NaN columns
  /// when the kernel refuses counters for permission reasons.
  bool require_access = false;
  std::string program_id;

  /// Throws Error(invalid_argument).
  void validate() const;
};

/// Polls per-thread cumulative counters of `config.pid` every 1 / rate_hz and
/// stores the deltas. Events the host cannot count are NaN columns. If the
/// process exits early the partial sample comes back with meta.truncated set.
///
/// Errors: process_gone if the PID does not exist at start,
/// counters_unavailable if no event could be opened.
RawSample record(const SamplerConfig& config);

/// Which of the 28 events can be opened for `pid` on this host.
std::vector<bool> probe_events(std::int64_t pid);

struct ProcessCandidate {
  std::int64_t pid = 0;
  std::string command;
  double cpu_share = 0.0;  // fraction of machine CPU time over the observation window, in [0, 1]
};

/// Busy ticks (user + system) of every process, read from /proc.
struct ProcessTicks {
  std::int64_t pid = 0;
  std::string command;
  std::uint64_t ticks = 0;
};

std::vector<ProcessTicks> read_process_table();

/// Orders processes by CPU share over a window worth `capacity_ticks` clock
/// ticks of busy time (wall ticks x CPUs): share descending, then pid
/// ascending. Processes absent from `before` started inside the window and
/// count from zero; `exclude_pid` is dropped; at most `top_n` entries.
std::vector<ProcessCandidate> rank_candidates(const std::vector<ProcessTicks>& before,
                                              const std::vector<ProcessTicks>& after, double capacity_ticks,
                                              std::size_t top_n, std::int64_t exclude_pid);

/// Samples the process table twice `interval_s` apart and ranks by CPU share,
/// excluding the calling process. Throws Error(io) if /proc is unreadable.
std::vector<ProcessCandidate> list_candidates(std::size_t top_n, double interval_s = 0.5);

bool process_alive(std::int64_t pid);

/// Short host identifier derived from the CPU model name.
std::string host_machine_id();

}  // namespace minerwatch
