#pragma once

#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>

namespace s2v {

/// Argument/contract violations (bad shapes, invalid configs, out-of-range labels).
inline void check_arg(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

/// Runtime failures (I/O, parse errors).
inline void check_runtime(bool ok, const std::string& msg) {
  if (!ok) throw std::runtime_error(msg);
}

/// Worker cap for data-parallel sections. SERIES2VEC_THREADS overrides
/// hardware concurrency; values < 1 are treated as 1.
inline unsigned worker_threads() {
  if (const char* env = std::getenv("SERIES2VEC_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v < 1) return 1;
    return static_cast<unsigned>(v);
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace s2v
