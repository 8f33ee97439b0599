#include "minerwatch/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace minerwatch {

namespace {

std::atomic<std::size_t> g_threads{std::max(1u, std::thread::hardware_concurrency())};

// Nested loops run serially on the worker that reached them.
thread_local bool t_inside_parallel = false;

}  // namespace

std::size_t thread_count() { return g_threads.load(); }

void set_thread_count(std::size_t n) { g_threads.store(std::max<std::size_t>(1, n)); }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  const std::size_t workers = std::min(thread_count(), n);
  if (workers <= 1 || t_inside_parallel) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&] {
    const bool outer = t_inside_parallel;
    t_inside_parallel = true;
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n;
      }
    }
    t_inside_parallel = outer;
  };

  std::vector<std::jthread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
  work();
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace minerwatch
