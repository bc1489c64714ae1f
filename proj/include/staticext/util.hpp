#pragma once

#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace staticext {

// Library errors fall in two bins: bad inputs (caller mistake) and numerical
// failures detected at runtime (divergence, degenerate metric, ...).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string strformat(const char* fmt, ...) {
  va_list args;
  va_start(args, fmt);
  va_list copy;
  va_copy(copy, args);
  int n = std::vsnprintf(nullptr, 0, fmt, copy);
  va_end(copy);
  std::string out(static_cast<size_t>(n), '\0');
  std::vsnprintf(out.data(), out.size() + 1, fmt, args);
  va_end(args);
  return out;
}

// Full-precision float formatting; %.17g round-trips doubles exactly.
inline std::string fmt_full(double x) { return strformat("%.17g", x); }

// Deterministic xoshiro-style generator.  std::uniform_real_distribution is
// implementation-defined, so outputs would not be byte-stable across
// standard libraries; this keeps seeded runs reproducible everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    // splitmix64 expansion of the seed
    for (auto& s : state_) {
      seed += 0x9e3779b97f4a7c15ull;
      uint64_t z = seed;
      z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
      z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
      s = z ^ (z >> 31);
    }
  }

  uint64_t next_u64() {
    auto rotl = [](uint64_t x, int k) { return (x << k) | (x >> (64 - k)); };
    uint64_t result = rotl(state_[1] * 5, 7) * 9;
    uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform in [0, 1)
  double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  // uniform in [-1, 1)
  double sym() { return 2.0 * u01() - 1.0; }

 private:
  uint64_t state_[4];
};

// Worker count: STATICEXT_THREADS caps it, 0/unset means hardware default.
inline int thread_count() {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("STATICEXT_THREADS")) {
    long v = std::strtol(env, nullptr, 10);
    if (v > 0 && v < static_cast<long>(hw)) return static_cast<int>(v);
    if (v > 0) return static_cast<int>(v);
  }
  return static_cast<int>(hw);
}

// Parallel loop over [0, n).  Work items must write to disjoint outputs;
// partitioning is static so results do not depend on the thread count.
inline void parallel_for(int n, const std::function<void(int)>& body) {
  int nt = thread_count();
  if (nt <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  nt = std::min(nt, n);
  std::vector<std::thread> workers;
  workers.reserve(static_cast<size_t>(nt));
  for (int t = 0; t < nt; ++t) {
    workers.emplace_back([&, t]() {
      for (int i = t; i < n; i += nt) body(i);
    });
  }
  for (auto& w : workers) w.join();
}

}  // namespace staticext
