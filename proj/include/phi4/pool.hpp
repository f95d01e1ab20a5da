#pragma once

#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

namespace phi4 {

// Runs fn(i) for i in [0, n) on up to `threads` workers, strided by worker.
// The first exception (by worker index) is rethrown after all workers join.
template <class Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  const int T = std::max(1, std::min(threads, n));
  if (T == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> err(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t)
    pool.emplace_back([&, t] {
      try {
        for (int i = t; i < n; i += T) fn(i);
      } catch (...) {
        err[std::size_t(t)] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : err)
    if (e) std::rethrow_exception(e);
}

// PHI4_THREADS when set and positive, else 1
inline int default_threads() {
  const char* s = std::getenv("PHI4_THREADS");
  if (!s) return 1;
  try {
    int t = std::stoi(s);
    return t > 0 ? t : 1;
  } catch (const std::exception&) {
    return 1;
  }
}

}  // namespace phi4
