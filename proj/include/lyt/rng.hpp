#pragma once
// ============================================================================
// Counter-based deterministic RNG. Streams are derived from (seed, path)
// keys, so every consumer (clip sampling, distractor draws, weight init,
// batch selection, estimator splits) owns an independent stream whose output
// is a pure function of the key and a draw counter. That makes the whole
// pipeline reproducible regardless of evaluation order or threading.
// ============================================================================

#include <cstdint>
#include <initializer_list>

#include "lyt/common.hpp"

namespace lyt {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t key = 0) : key_(key) {}

  // Derive a stream key from a root seed and a path of tags, e.g.
  // Rng::keyed(seed, {TAG_TRAIN, step, i}).
  static Rng keyed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t k = splitmix64(seed ^ 0x6C7967656E6572ull);
    for (std::uint64_t p : path) k = splitmix64(k ^ splitmix64(p));
    return Rng(k);
  }

  std::uint64_t next_u64() { return splitmix64(key_ ^ counter_++ * 0xA24BAED4963EE407ull); }

  // Uniform in [0, 1).
  real uniform() { return static_cast<real>(next_u64() >> 11) * 0x1.0p-53; }

  real uniform(real lo, real hi) { return lo + (hi - lo) * uniform(); }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  // Standard normal via Box-Muller (spare cached).
  real normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    real u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    real r = std::sqrt(-2.0 * std::log(u1));
    real a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  bool has_spare_ = false;
  real spare_ = 0.0;
};

// Stream tags (arbitrary distinct constants) for Rng::keyed paths.
enum : std::uint64_t {
  TAG_DATASET = 101,    // initial-condition sampling for clips
  TAG_DISTRACT = 202,   // distractor parameter draws
  TAG_INIT = 303,       // model weight initialization
  TAG_TRAIN = 404,      // batch/window selection during training
  TAG_SPLIT = 505,      // estimator data splits
  TAG_GRADCHECK = 606,  // parameter subset selection in gradcheck
};

}  // namespace lyt
