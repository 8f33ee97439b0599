#include "minerwatch/dataset_io.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "minerwatch/error.hpp"
#include "minerwatch/parallel.hpp"

namespace minerwatch {

namespace {

std::string sanitize_token(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (std::isspace(static_cast<unsigned char>(c))) c = '_';
  }
  return out;
}

double parse_number(std::string_view text, const fs::path& path, std::size_t line) {
  if (text == "NaN" || text == "nan") return kMissing;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::format, path.string() + ":" + std::to_string(line) +
                                       ": bad number '" + std::string(text) + "'");
  }
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

SampleMeta parse_meta(const std::string& line, const fs::path& path) {
  if (line.rfind("#", 0) != 0) {
    throw Error(ErrorKind::format, path.string() + ": missing metadata comment");
  }
  SampleMeta meta;
  std::istringstream in(line.substr(1));
  std::string token;
  while (in >> token) {
    auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    auto key = token.substr(0, eq);
    auto value = token.substr(eq + 1);
    if (key == "pid") {
      meta.pid = std::stoll(value);
    } else if (key == "rate_hz") {
      meta.rate_hz = parse_number(value, path, 1);
    } else if (key == "duration_s") {
      meta.duration_s = parse_number(value, path, 1);
    } else if (key == "machine") {
      meta.machine_id = value;
    } else if (key == "program") {
      meta.program_id = value;
    } else if (key == "truncated") {
      meta.truncated = value == "1";
    } else if (key == "scaling") {
      for (auto part : split(value, ';')) meta.scaling.push_back(parse_number(part, path, 1));
    }
  }
  if (!(meta.rate_hz > 0) || !(meta.duration_s > 0)) {
    throw Error(ErrorKind::format, path.string() + ": rate_hz and duration_s must be positive");
  }
  return meta;
}

std::string expected_header() {
  std::string h = "t_ms";
  for (const auto& e : all_events()) {
    h += ',';
    h += e.name;
  }
  return h;
}

void to_delta(Eigen::MatrixXd& m) {
  for (Eigen::Index r = m.rows() - 1; r >= 1; --r) {
    m.row(r) -= m.row(r - 1);
  }
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw Error(ErrorKind::internal, "number formatting failed");
  return std::string(buf, ptr);
}

fs::path sample_path(const fs::path& root, Task task, const std::string& subclass,
                     const std::string& sample_id) {
  return root / std::string(to_string(task)) / subclass / (sample_id + ".csv");
}

void save_sample(const RawSample& sample, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot open " + path.string() + " for writing");

  const auto& m = sample.meta;
  out << "# pid=" << m.pid << " rate_hz=" << format_number(m.rate_hz)
      << " duration_s=" << format_number(m.duration_s)
      << " machine=" << sanitize_token(m.machine_id)
      << " program=" << sanitize_token(m.program_id);
  if (m.truncated) out << " truncated=1";
  if (!m.scaling.empty()) {
    out << " scaling=";
    for (std::size_t i = 0; i < m.scaling.size(); ++i) {
      if (i) out << ';';
      out << format_number(m.scaling[i]);
    }
  }
  out << '\n' << expected_header() << '\n';

  std::string line;
  for (Eigen::Index r = 0; r < sample.readings.rows(); ++r) {
    line = format_number(sample.timestamps_ms[r]);
    for (Eigen::Index c = 0; c < sample.readings.cols(); ++c) {
      line += ',';
      line += format_number(sample.readings(r, c));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw Error(ErrorKind::io, "write failed for " + path.string());
}

RawSample load_sample(const fs::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::format, path.string() + ": empty file");
  RawSample sample;
  sample.meta = parse_meta(line, path);

  if (!std::getline(in, line) || line != expected_header()) {
    throw Error(ErrorKind::format, path.string() + ": header does not list the 28 events in canonical order");
  }

  std::vector<double> cells;
  std::vector<double> stamps;
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != kEventCount + 1) {
      throw Error(ErrorKind::format, path.string() + ":" + std::to_string(line_no) +
                                         ": expected 29 fields, got " + std::to_string(fields.size()));
    }
    stamps.push_back(parse_number(fields[0], path, line_no));
    for (std::size_t c = 1; c < fields.size(); ++c) cells.push_back(parse_number(fields[c], path, line_no));
  }

  const auto rows = static_cast<Eigen::Index>(stamps.size());
  sample.readings = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      cells.data(), rows, static_cast<Eigen::Index>(kEventCount));
  sample.timestamps_ms = Eigen::Map<Eigen::VectorXd>(stamps.data(), rows);
  if (options.cumulative_to_delta) to_delta(sample.readings);
  sample.validate();
  return sample;
}

std::map<std::string, Task> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "missing manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::format, path.string() + ": manifest must be an object");
  std::map<std::string, Task> manifest;
  for (auto& [subclass, task] : j.items()) {
    if (!task.is_string()) throw Error(ErrorKind::format, "manifest entry '" + subclass + "' must be a string");
    manifest[subclass] = parse_task(task.get<std::string>());
  }
  return manifest;
}

void write_manifest(const std::map<std::string, Task>& manifest, const fs::path& path) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [subclass, task] : manifest) j[subclass] = std::string(to_string(task));
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

LoadReport load_dataset(const fs::path& root, const LoadOptions& options) {
  LoadReport report;
  auto& ds = report.dataset;
  ds.manifest = read_manifest(root / "manifest.json");

  struct Entry {
    fs::path path;
    Task task;
    std::string subclass;
  };
  std::vector<Entry> entries;
  for (Task task : {Task::mining, Task::non_mining}) {
    const auto task_dir = root / std::string(to_string(task));
    if (!fs::is_directory(task_dir)) continue;
    for (const auto& sub : fs::directory_iterator(task_dir)) {
      if (!sub.is_directory()) continue;
      const auto subclass = sub.path().filename().string();
      for (const auto& file : fs::directory_iterator(sub.path())) {
        if (file.is_regular_file() && file.path().extension() == ".csv") {
          entries.push_back({file.path(), task, subclass});
        }
      }
    }
  }
  std::sort(entries.begin(), entries.end(),
            [](const Entry& a, const Entry& b) { return a.path < b.path; });

  std::set<std::string> ids;
  for (const auto& e : entries) {
    if (!ids.insert(e.path.stem().string()).second) {
      throw Error(ErrorKind::format, "duplicate sample id '" + e.path.stem().string() + "'");
    }
  }

  std::vector<std::optional<LabeledSample>> parsed(entries.size());
  std::vector<std::string> failures(entries.size());
  parallel_for(entries.size(), [&](std::size_t i) {
    const auto& e = entries[i];
    auto it = ds.manifest.find(e.subclass);
    if (it == ds.manifest.end()) {
      failures[i] = "subclass not in manifest";
      return;
    }
    if (it->second != e.task) {
      failures[i] = "subclass filed under the wrong task";
      return;
    }
    try {
      parsed[i] = LabeledSample{e.path.stem().string(), load_sample(e.path, options), e.task, e.subclass};
    } catch (const Error& err) {
      failures[i] = err.what();
    }
  });

  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (parsed[i]) {
      ds.samples.push_back(std::move(*parsed[i]));
    } else {
      spdlog::warn("rejected {}: {}", entries[i].path.string(), failures[i]);
      report.rejected.push_back({entries[i].path, failures[i]});
    }
  }

  std::optional<double> rate;
  for (const auto& s : ds.samples) {
    if (rate && *rate != s.sample.meta.rate_hz) {
      throw Error(ErrorKind::format, "samples do not share one sampling rate");
    }
    rate = s.sample.meta.rate_hz;
  }
  spdlog::info("loaded {} samples from {} ({} rejected)", ds.samples.size(), root.string(),
               report.rejected.size());
  for (const auto& [subclass, n] : ds.counts_per_subclass()) spdlog::debug("  {}: {}", subclass, n);
  return report;
}

void save_dataset(const Dataset& dataset, const fs::path& root) {
  fs::create_directories(root);
  auto manifest = dataset.manifest;
  if (fs::exists(root / "manifest.json")) {
    for (const auto& [k, v] : read_manifest(root / "manifest.json")) manifest.try_emplace(k, v);
  }
  write_manifest(manifest, root / "manifest.json");
  parallel_for(dataset.samples.size(), [&](std::size_t i) {
    const auto& s = dataset.samples[i];
    save_sample(s.sample, sample_path(root, s.task, s.subclass, s.id));
  });
}

}  // namespace minerwatch
