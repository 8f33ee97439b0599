#include "minerwatch/sampler.hpp"

#include <linux/perf_event.h>
#include <sys/ioctl.h>
#include <sys/syscall.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <spdlog/spdlog.h>

#include "minerwatch/error.hpp"

namespace minerwatch {

namespace fs = std::filesystem;

namespace {

constexpr const char* kParanoidHint =
    "counter access denied; allow unprivileged per-process counting with "
    "`sysctl kernel.perf_event_paranoid=2` (or lower) or run with CAP_PERFMON";

long perf_event_open(perf_event_attr* attr, pid_t pid, int cpu, int group_fd, unsigned long flags) {
  return syscall(__NR_perf_event_open, attr, pid, cpu, group_fd, flags);
}

constexpr std::uint64_t cache_config(std::uint64_t cache, std::uint64_t op, std::uint64_t result) {
  return cache | (op << 8) | (result << 16);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string s = ss.str();
  while (!s.empty() && (s.back() == '\n' || s.back() == ' ')) s.pop_back();
  return s;
}

// Named events of the core PMU, e.g. "event=0xcd,umask=0x1,ldlat=3", encoded
// through the PMU's format descriptions ("config:0-7").
bool sysfs_event(const std::string& name, perf_event_attr& attr) {
  const fs::path pmu = "/sys/bus/event_source/devices/cpu";
  const auto spec = read_text(pmu / "events" / name);
  const auto type = read_text(pmu / "type");
  if (spec.empty() || type.empty()) return false;
  attr.type = static_cast<std::uint32_t>(std::stoul(type));

  std::stringstream terms(spec);
  std::string term;
  while (std::getline(terms, term, ',')) {
    const auto eq = term.find('=');
    const std::string key = term.substr(0, eq);
    const std::uint64_t value = eq == std::string::npos ? 1 : std::stoull(term.substr(eq + 1), nullptr, 0);
    const auto format = read_text(pmu / "format" / key);  // e.g. "config:0-7"
    const auto colon = format.find(':');
    if (colon == std::string::npos) return false;
    const std::string field = format.substr(0, colon);
    const std::string bits = format.substr(colon + 1);
    const auto dash = bits.find('-');
    const int lo = std::stoi(bits.substr(0, dash));
    __u64* target = field == "config"    ? &attr.config
                    : field == "config1" ? &attr.config1
                    : field == "config2" ? &attr.config2
                                         : nullptr;
    if (!target) return false;
    *target |= value << lo;
  }
  return true;
}

// perf_event_attr for canonical event `index`; false if the host cannot
// describe it.
bool event_attr(std::size_t index, perf_event_attr& attr) {
  std::memset(&attr, 0, sizeof(attr));
  attr.size = sizeof(attr);
  attr.read_format = PERF_FORMAT_TOTAL_TIME_ENABLED | PERF_FORMAT_TOTAL_TIME_RUNNING;
  attr.inherit = 1;
  attr.exclude_kernel = 1;
  attr.exclude_hv = 1;
  attr.disabled = 1;

  auto hw = [&](std::uint64_t c) {
    attr.type = PERF_TYPE_HARDWARE;
    attr.config = c;
    return true;
  };
  auto sw = [&](std::uint64_t c) {
    attr.type = PERF_TYPE_SOFTWARE;
    attr.config = c;
    return true;
  };
  auto hc = [&](std::uint64_t cache, std::uint64_t op, std::uint64_t result) {
    attr.type = PERF_TYPE_HW_CACHE;
    attr.config = cache_config(cache, op, result);
    return true;
  };
  constexpr auto R = PERF_COUNT_HW_CACHE_OP_READ;
  constexpr auto W = PERF_COUNT_HW_CACHE_OP_WRITE;
  constexpr auto A = PERF_COUNT_HW_CACHE_RESULT_ACCESS;
  constexpr auto M = PERF_COUNT_HW_CACHE_RESULT_MISS;

  const std::string_view name = all_events()[index].name;
  if (name == "branch-instructions") return hw(PERF_COUNT_HW_BRANCH_INSTRUCTIONS);
  if (name == "branch-load-misses") return hc(PERF_COUNT_HW_CACHE_BPU, R, M);
  if (name == "branch-loads") return hc(PERF_COUNT_HW_CACHE_BPU, R, A);
  if (name == "branch-misses") return hw(PERF_COUNT_HW_BRANCH_MISSES);
  if (name == "bus-cycles") return hw(PERF_COUNT_HW_BUS_CYCLES);
  if (name == "cache-misses") return hw(PERF_COUNT_HW_CACHE_MISSES);
  if (name == "cache-references") return hw(PERF_COUNT_HW_CACHE_REFERENCES);
  if (name == "context-switches") return sw(PERF_COUNT_SW_CONTEXT_SWITCHES);
  if (name == "cpu-migrations") return sw(PERF_COUNT_SW_CPU_MIGRATIONS);
  if (name == "dTLB-load-misses") return hc(PERF_COUNT_HW_CACHE_DTLB, R, M);
  if (name == "dTLB-loads") return hc(PERF_COUNT_HW_CACHE_DTLB, R, A);
  if (name == "dTLB-store-misses") return hc(PERF_COUNT_HW_CACHE_DTLB, W, M);
  if (name == "dTLB-stores") return hc(PERF_COUNT_HW_CACHE_DTLB, W, A);
  if (name == "instructions") return hw(PERF_COUNT_HW_INSTRUCTIONS);
  if (name == "iTLB-load-misses") return hc(PERF_COUNT_HW_CACHE_ITLB, R, M);
  if (name == "iTLB-loads") return hc(PERF_COUNT_HW_CACHE_ITLB, R, A);
  if (name == "L1-dcache-load-misses") return hc(PERF_COUNT_HW_CACHE_L1D, R, M);
  if (name == "L1-dcache-loads") return hc(PERF_COUNT_HW_CACHE_L1D, R, A);
  if (name == "L1-dcache-stores") return hc(PERF_COUNT_HW_CACHE_L1D, W, A);
  if (name == "LLC-load-misses") return hc(PERF_COUNT_HW_CACHE_LL, R, M);
  if (name == "LLC-loads") return hc(PERF_COUNT_HW_CACHE_LL, R, A);
  if (name == "LLC-store-misses") return hc(PERF_COUNT_HW_CACHE_LL, W, M);
  if (name == "LLC-stores") return hc(PERF_COUNT_HW_CACHE_LL, W, A);
  if (name == "mem-loads") return sysfs_event("mem-loads", attr);
  if (name == "mem-stores") return sysfs_event("mem-stores", attr);
  if (name == "page-faults") return sw(PERF_COUNT_SW_PAGE_FAULTS);
  if (name == "ref-cycles") return hw(PERF_COUNT_HW_REF_CPU_CYCLES);
  if (name == "task-clock") return sw(PERF_COUNT_SW_TASK_CLOCK);
  return false;
}

std::vector<pid_t> threads_of(std::int64_t pid) {
  std::vector<pid_t> tids;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(fs::path("/proc") / std::to_string(pid) / "task", ec)) {
    const auto name = entry.path().filename().string();
    pid_t tid = 0;
    if (std::from_chars(name.data(), name.data() + name.size(), tid).ec == std::errc{}) tids.push_back(tid);
  }
  std::sort(tids.begin(), tids.end());
  return tids;
}

struct ReadValue {
  std::uint64_t value;
  std::uint64_t enabled;
  std::uint64_t running;
};

enum class OpenFailure { none, unsupported, denied, gone };

/// Counters of one event across all threads of the target.
struct EventCounters {
  std::vector<int> fds;
  OpenFailure failure = OpenFailure::none;
};

class Session {
public:
  Session(std::int64_t pid, const std::vector<std::size_t>& events) {
    const auto tids = threads_of(pid);
    if (tids.empty()) throw Error(ErrorKind::process_gone, "process " + std::to_string(pid) + " does not exist");
    counters_.resize(kEventCount);
    for (auto e : events) {
      auto& c = counters_[e];
      perf_event_attr attr;
      if (!event_attr(e, attr)) {
        c.failure = OpenFailure::unsupported;
        continue;
      }
      for (pid_t tid : tids) {
        const long fd = perf_event_open(&attr, tid, -1, -1, PERF_FLAG_FD_CLOEXEC);
        if (fd >= 0) {
          c.fds.push_back(static_cast<int>(fd));
          continue;
        }
        const int err = errno;
        if (err == ESRCH) continue;  // thread exited meanwhile
        c.failure = err == EACCES || err == EPERM ? OpenFailure::denied : OpenFailure::unsupported;
        spdlog::debug("cannot open {} for tid {}: {}", all_events()[e].name, tid, std::strerror(err));
        break;
      }
      if (c.failure != OpenFailure::none || c.fds.empty()) {
        if (c.failure == OpenFailure::none) c.failure = OpenFailure::gone;
        close_all(c);
      }
    }
  }

  ~Session() {
    for (auto& c : counters_) close_all(c);
  }
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  bool open(std::size_t e) const { return !counters_[e].fds.empty(); }
  bool any_open() const {
    return std::any_of(counters_.begin(), counters_.end(), [](const auto& c) { return !c.fds.empty(); });
  }
  bool any(OpenFailure f) const {
    return std::any_of(counters_.begin(), counters_.end(), [f](const auto& c) { return c.failure == f; });
  }

  void enable() {
    for (auto& c : counters_) {
      for (int fd : c.fds) ioctl(fd, PERF_EVENT_IOC_ENABLE, 0);
    }
  }

  /// Multiplex-scaled cumulative count of event `e`, summed over threads;
  /// accumulates enabled / running time into the totals.
  double read(std::size_t e, std::uint64_t& enabled, std::uint64_t& running) const {
    double total = 0.0;
    for (int fd : counters_[e].fds) {
      ReadValue v{};
      if (::read(fd, &v, sizeof(v)) != static_cast<ssize_t>(sizeof(v))) continue;
      enabled += v.enabled;
      running += v.running;
      if (v.running > 0) {
        total += static_cast<double>(v.value) * static_cast<double>(v.enabled) / static_cast<double>(v.running);
      }
    }
    return total;
  }

private:
  static void close_all(EventCounters& c) {
    for (int fd : c.fds) ::close(fd);
    c.fds.clear();
  }

  std::vector<EventCounters> counters_;
};

timespec add_ns(timespec t, std::int64_t ns) {
  const std::int64_t total = t.tv_nsec + ns;
  t.tv_sec += static_cast<time_t>(total / 1'000'000'000);
  t.tv_nsec = static_cast<long>(total % 1'000'000'000);
  return t;
}

double ms_between(const timespec& a, const timespec& b) {
  return static_cast<double>(b.tv_sec - a.tv_sec) * 1e3 + static_cast<double>(b.tv_nsec - a.tv_nsec) * 1e-6;
}

std::vector<std::size_t> resolve_events(const SamplerConfig& config) {
  if (!config.events.empty()) return config.events;
  std::vector<std::size_t> all(kEventCount);
  for (std::size_t i = 0; i < kEventCount; ++i) all[i] = i;
  return all;
}

}  // namespace

void SamplerConfig::validate() const {
  if (pid <= 0) throw Error(ErrorKind::invalid_argument, "pid must be positive");
  if (!(rate_hz > 0.0)) throw Error(ErrorKind::invalid_argument, "rate must be positive");
  if (!(duration_s > 0.0)) throw Error(ErrorKind::invalid_argument, "duration must be positive");
  if (expected_rows(rate_hz, duration_s) < 1) throw Error(ErrorKind::invalid_argument, "window holds no reading");
  if (!(warmup_s >= 0.0)) throw Error(ErrorKind::invalid_argument, "warm-up must be >= 0");
  std::set<std::size_t> seen;
  for (auto e : events) {
    if (e >= kEventCount) throw Error(ErrorKind::invalid_argument, "event index out of range");
    if (!seen.insert(e).second) throw Error(ErrorKind::invalid_argument, "duplicate event in selection");
  }
}

bool process_alive(std::int64_t pid) {
  const auto stat = read_text(fs::path("/proc") / std::to_string(pid) / "stat");
  const auto close = stat.rfind(')');
  if (close == std::string::npos || close + 2 >= stat.size()) return false;
  const char state = stat[close + 2];
  return state != 'Z' && state != 'X' && state != 'x';
}

std::vector<bool> probe_events(std::int64_t pid) {
  Session session(pid, resolve_events(SamplerConfig{}));
  std::vector<bool> out(kEventCount);
  for (std::size_t e = 0; e < kEventCount; ++e) out[e] = session.open(e);
  return out;
}

RawSample record(const SamplerConfig& config) {
  config.validate();
  if (!process_alive(config.pid)) {
    throw Error(ErrorKind::process_gone, "process " + std::to_string(config.pid) + " does not exist");
  }
  const auto events = resolve_events(config);
  Session session(config.pid, events);
  if (config.require_access && session.any(OpenFailure::denied)) {
    throw Error(ErrorKind::counters_unavailable, kParanoidHint);
  }
  if (!session.any_open()) {
    if (!process_alive(config.pid)) {
      throw Error(ErrorKind::process_gone, "process " + std::to_string(config.pid) + " exited");
    }
    throw Error(ErrorKind::counters_unavailable,
                session.any(OpenFailure::denied) ? std::string("no counters available: ") + kParanoidHint
                                                 : std::string("no counters available"));
  }

  SampleMeta meta;
  meta.pid = config.pid;
  meta.rate_hz = config.rate_hz;
  meta.duration_s = config.duration_s;
  meta.machine_id = host_machine_id();
  meta.program_id = config.program_id;
  RawSample sample = make_sample(meta);
  const Eigen::Index rows = sample.rows();

  // Everything the poll loop touches is allocated here.
  std::vector<double> previous(kEventCount, 0.0);
  std::vector<std::uint64_t> enabled(kEventCount, 0), running(kEventCount, 0);
  std::vector<std::uint64_t> base_enabled(kEventCount, 0), base_running(kEventCount, 0);
  std::vector<std::size_t> active;
  for (auto e : events) {
    if (session.open(e)) active.push_back(e);
  }

  const auto period_ns = static_cast<std::int64_t>(std::llround(1e9 / config.rate_hz));
  session.enable();
  timespec start{};
  clock_gettime(CLOCK_MONOTONIC, &start);
  if (config.warmup_s > 0.0) {
    start = add_ns(start, static_cast<std::int64_t>(std::llround(config.warmup_s * 1e9)));
    clock_nanosleep(CLOCK_MONOTONIC, TIMER_ABSTIME, &start, nullptr);
  }
  for (auto e : active) previous[e] = session.read(e, base_enabled[e], base_running[e]);

  Eigen::Index done = 0;
  bool truncated = false;
  for (Eigen::Index t = 0; t < rows; ++t) {
    const timespec deadline = add_ns(start, period_ns * (t + 1));
    while (clock_nanosleep(CLOCK_MONOTONIC, TIMER_ABSTIME, &deadline, nullptr) == EINTR) {
    }
    timespec now{};
    clock_gettime(CLOCK_MONOTONIC, &now);
    for (auto e : active) {
      std::uint64_t en = 0, run = 0;
      const double value = session.read(e, en, run);
      sample.readings(t, static_cast<Eigen::Index>(e)) = std::max(0.0, value - previous[e]);
      previous[e] = value;
      enabled[e] = en;
      running[e] = run;
    }
    sample.timestamps_ms[t] = ms_between(start, now);
    done = t + 1;
    if (!process_alive(config.pid)) {
      truncated = done < rows;
      break;
    }
  }

  if (truncated) {
    sample.readings.conservativeResize(done, Eigen::NoChange);
    sample.timestamps_ms.conservativeResize(done);
    sample.meta.truncated = true;
    spdlog::warn("process {} exited after {} of {} readings", config.pid, done, rows);
  }
  sample.meta.scaling.assign(kEventCount, 1.0);
  for (std::size_t e = 0; e < kEventCount; ++e) {
    const auto en = enabled[e] - base_enabled[e];
    const auto run = running[e] - base_running[e];
    sample.meta.scaling[e] = session.open(e) && en > 0 ? static_cast<double>(run) / static_cast<double>(en) : 0.0;
  }
  return sample;
}

std::vector<ProcessTicks> read_process_table() {
  std::vector<ProcessTicks> out;
  std::error_code ec;
  fs::directory_iterator it("/proc", ec);
  if (ec) throw Error(ErrorKind::io, "cannot read the process table: " + ec.message());
  for (const auto& entry : it) {
    const auto name = entry.path().filename().string();
    std::int64_t pid = 0;
    const auto [end, err] = std::from_chars(name.data(), name.data() + name.size(), pid);
    if (err != std::errc{} || end != name.data() + name.size()) continue;
    const auto stat = read_text(entry.path() / "stat");
    const auto open = stat.find('(');
    const auto close = stat.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open) continue;
    std::istringstream fields(stat.substr(close + 2));
    std::string field;
    std::uint64_t utime = 0, stime = 0;
    for (int i = 0; fields >> field; ++i) {
      if (i == 11) utime = std::stoull(field);
      if (i == 12) {
        stime = std::stoull(field);
        break;
      }
    }
    out.push_back({pid, stat.substr(open + 1, close - open - 1), utime + stime});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.pid < b.pid; });
  return out;
}

std::vector<ProcessCandidate> rank_candidates(const std::vector<ProcessTicks>& before,
                                              const std::vector<ProcessTicks>& after, double capacity_ticks,
                                              std::size_t top_n, std::int64_t exclude_pid) {
  std::map<std::int64_t, std::uint64_t> start;
  for (const auto& p : before) start[p.pid] = p.ticks;
  std::vector<ProcessCandidate> out;
  for (const auto& p : after) {
    if (p.pid == exclude_pid) continue;
    const auto it = start.find(p.pid);
    const std::uint64_t first = it == start.end() ? 0 : it->second;
    const double busy = p.ticks >= first ? static_cast<double>(p.ticks - first) : 0.0;
    const double share = capacity_ticks > 0.0 ? std::clamp(busy / capacity_ticks, 0.0, 1.0) : 0.0;
    out.push_back({p.pid, p.command, share});
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    if (a.cpu_share != b.cpu_share) return a.cpu_share > b.cpu_share;
    return a.pid < b.pid;
  });
  if (out.size() > top_n) out.resize(top_n);
  return out;
}

std::vector<ProcessCandidate> list_candidates(std::size_t top_n, double interval_s) {
  if (top_n < 1) throw Error(ErrorKind::invalid_argument, "top_n must be at least 1");
  const auto before = read_process_table();
  timespec t0{}, t1{};
  clock_gettime(CLOCK_MONOTONIC, &t0);
  std::this_thread::sleep_for(std::chrono::duration<double>(interval_s));
  const auto after = read_process_table();
  clock_gettime(CLOCK_MONOTONIC, &t1);
  const double ticks_per_s = static_cast<double>(sysconf(_SC_CLK_TCK));
  const double cpus = static_cast<double>(std::max(1L, sysconf(_SC_NPROCESSORS_ONLN)));
  const double capacity = ms_between(t0, t1) * 1e-3 * ticks_per_s * cpus;
  return rank_candidates(before, after, capacity, top_n, static_cast<std::int64_t>(getpid()));
}

std::string host_machine_id() {
  std::ifstream in("/proc/cpuinfo");
  std::string line;
  std::string model;
  while (std::getline(in, line)) {
    if (line.rfind("model name", 0) == 0) {
      model = line.substr(line.find(':') + 1);
      break;
    }
  }
  std::string id;
  for (char c : model) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      id += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!id.empty() && id.back() != '-') {
      id += '-';
    }
  }
  while (!id.empty() && id.back() == '-') id.pop_back();
  return id.empty() ? "unknown" : id;
}

}  // namespace minerwatch
