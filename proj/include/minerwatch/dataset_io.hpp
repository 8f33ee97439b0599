#pragma once

// On-disk layout:
//   <root>/manifest.json                     {"BTC": "mining", "vmd": "non-mining", ...}
//   <root>/<task>/<subclass>/<sample_id>.csv
//
// Sample CSV:
//   # pid=<int> rate_hz=<real> duration_s=<real> machine=<str> program=<str> [truncated=1] [scaling=a;b;...]
//   t_ms,branch-instructions,...,task-clock
//   <R data rows, missing cells spelled NaN>

#include <filesystem>
#include <string>
#include <vector>

#include "minerwatch/events.hpp"

namespace minerwatch {

namespace fs = std::filesystem;

struct LoadOptions {
  /// Treat stored values as cumulative counts and difference them.
  bool cumulative_to_delta = false;
};

struct RejectedSample {
  fs::path path;
  std::string reason;
};

struct LoadReport {
  Dataset dataset;
  std::vector<RejectedSample> rejected;
};

/// Loads every `<task>/<subclass>/*.csv` under `root`. Samples are ordered by
/// path. Throws on a missing manifest or a duplicate sample id; malformed
/// files are skipped and listed in `rejected`.
LoadReport load_dataset(const fs::path& root, const LoadOptions& options = {});

void save_sample(const RawSample& sample, const fs::path& path);
RawSample load_sample(const fs::path& path, const LoadOptions& options = {});

std::map<std::string, Task> read_manifest(const fs::path& path);
void write_manifest(const std::map<std::string, Task>& manifest, const fs::path& path);

/// Writes `dataset` in the standard layout. Existing manifest entries under
/// `root` are merged.
void save_dataset(const Dataset& dataset, const fs::path& root);

/// Path of a sample inside a dataset root.
fs::path sample_path(const fs::path& root, Task task, const std::string& subclass,
                     const std::string& sample_id);

/// Shortest text form that parses back to the identical double.
std::string format_number(double v);

}  // namespace minerwatch
