#pragma once

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>
#include <thread>

namespace testutil {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("minerwatch-test-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
  std::filesystem::path path_;
};

enum class ChildMode { spin, sleep };

/// Forked child that spins or sleeps until killed (or for `lifetime_s`).
class Child {
public:
  explicit Child(ChildMode mode, double lifetime_s = 120.0) {
    pid_ = fork();
    if (pid_ == 0) {
      const auto end = std::chrono::steady_clock::now() + std::chrono::duration<double>(lifetime_s);
      if (mode == ChildMode::sleep) {
        while (std::chrono::steady_clock::now() < end) ::sleep(1);
      } else {
        volatile unsigned long x = 0;
        while (std::chrono::steady_clock::now() < end) {
          for (int i = 0; i < 1000000; ++i) x = x + static_cast<unsigned long>(i);
        }
      }
      _exit(0);
    }
  }
  ~Child() { stop(); }
  Child(const Child&) = delete;
  Child& operator=(const Child&) = delete;

  pid_t pid() const { return pid_; }

  void stop() {
    if (pid_ > 0) {
      kill(pid_, SIGKILL);
      waitpid(pid_, nullptr, 0);
      pid_ = -1;
    }
  }

private:
  pid_t pid_ = -1;
};

}  // namespace testutil
