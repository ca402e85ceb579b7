#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace sgdd {

// Deterministic PRNG (xoshiro256++) with named substreams.
//
// Every random decision in the toolkit flows from one 64-bit root seed.
// Child streams are derived by hashing the stream name into the root seed,
// so adding a new consumer never perturbs the draws of an existing one.
// Conversions to double and the normal sampler are implemented here rather
// than via <random> distributions, which keeps the bit stream identical
// across standard-library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  // Independent stream keyed on (root seed, name). Does not consume state.
  Rng child(std::string_view name) const;
  Rng child(std::string_view name, uint64_t index) const;

  uint64_t root_seed() const { return root_seed_; }

  uint64_t next_u64();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // standard normal (Box-Muller)
  int uniform_int(int n);                // [0, n), n >= 1

  // k distinct indices from [0, n), ascending order.
  std::vector<int> sample_without_replacement(int n, int k);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(uniform_int(static_cast<int>(i)));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t root_seed_ = 0;
  uint64_t state_[4] = {0, 0, 0, 0};
};

}  // namespace sgdd
