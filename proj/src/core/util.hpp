#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace rotgas {

// Error carrying a status code; the C wrapper maps it 1:1 onto rg_status.
struct Error : std::runtime_error {
  int code;
  Error(int c, const std::string& m) : std::runtime_error(m), code(c) {}
};

[[noreturn]] inline void fail(int code, const std::string& msg) {
  throw Error(code, msg);
}

inline void require(bool ok, int code, const std::string& msg) {
  if (!ok) fail(code, msg);
}

constexpr double kPi = 3.14159265358979323846264338327950288;

// Deterministic RNG. mt19937_64 is fully specified by the standard; the
// 53-bit ladder below avoids std::*_distribution (whose streams differ
// between standard libraries). Contract: "mt19937_64/53bit v1".
class Rng {
 public:
  explicit Rng(uint64_t seed) : s_(seed), base_(seed) {}

  static const char* contract() { return "mt19937_64/53bit v1"; }

  uint64_t raw() { return s_(); }

  // uniform in [0,1)
  double uniform() { return static_cast<double>(raw() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double normal() {  // Box-Muller on the 53-bit uniforms
    if (have_) {
      have_ = false;
      return cache_;
    }
    double u1 = uniform();
    while (u1 <= 0x1.0p-60) u1 = uniform();
    double u2 = uniform();
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = 2.0 * kPi * u2;
    cache_ = rad * std::sin(ang);
    have_ = true;
    return rad * std::cos(ang);
  }

  // Independent substream for a labeled work item (scan points, inits, ...).
  Rng fork(uint64_t label) const {
    // splitmix64 of (base seed, label) so forks are order-independent
    uint64_t x = base_ ^ (0x9e3779b97f4a7c15ull + label * 0xbf58476d1ce4e5b9ull);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return Rng(x);
  }

 private:
  std::mt19937_64 s_;
  uint64_t base_ = 0;
  bool have_ = false;
  double cache_ = 0.0;
};

// Runs fn(i) for i in [0,n). Results must go into preallocated per-i slots
// so the outcome cannot depend on scheduling. threads <= 1 runs serially.
void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& fn);

int hardware_threads();

}  // namespace rotgas
