#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace rlsim {

// splitmix64: cheap, well-mixed 64-bit hash used for deriving substream seeds.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Derive an independent stream seed from a parent seed and a stream tag.
// Deterministic and platform-independent.
inline uint64_t mix_seed(uint64_t parent, uint64_t tag) {
  return splitmix64(parent ^ splitmix64(tag + 0x9e3779b97f4a7c15ull));
}

// Deterministic random stream. All randomness in the simulator flows through
// this class so that results are reproducible bit-for-bit across platforms
// and worker counts: mt19937_64 has a portable, standard-specified sequence,
// and the floating-point mapping below is explicit rather than
// distribution-object based (libstdc++/libc++ disagree on those).
class random_stream {
 public:
  explicit random_stream(uint64_t seed) : seed_(seed), eng_(splitmix64(seed)) {}

  // iid uniform double in [0, 1), 53 random bits.
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // unbiased integer in [0, n).
  uint64_t uniform_below(uint64_t n) {
    if (n == 0) throw std::invalid_argument("uniform_below: n must be positive");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  // standard normal via Box-Muller (explicit, portable).
  double normal() {
    double u1 = uniform01();
    while (u1 == 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      const size_t j = static_cast<size_t>(uniform_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // Child stream for a tagged purpose (train sampling, eval, task gen, ...).
  // Derived from the construction seed, not the evolving engine state, so the
  // family of child streams is fixed by the seed alone.
  random_stream fork(uint64_t tag) const { return random_stream(mix_seed(seed_, tag)); }

  uint64_t seed() const { return seed_; }

 private:
  uint64_t seed_;
  std::mt19937_64 eng_;
};

// Stream tags used across the simulator. Centralized so two modules never
// accidentally share a stream.
enum class stream_tag : uint64_t {
  task_gen = 1,
  policy_init = 2,
  train_sampling = 3,
  eval_train = 4,
  eval_test = 5,
  difficulty_probe = 6,
};

inline random_stream fork(const random_stream& parent, stream_tag tag) {
  return parent.fork(static_cast<uint64_t>(tag));
}

}  // namespace rlsim
