#pragma once

#include <cstdint>

#include "sgdd/graph.hpp"

namespace sgdd {

// Stochastic block model parameters: n nodes split into c equal communities
// (the last block absorbs any remainder), intra-community edge probability p,
// inter-community probability q.
struct SbmSpec {
  int n = 0;
  int c = 1;
  double p = 0.0;
  double q = 0.0;
  uint64_t seed = 0;

  void validate() const;  // 0 <= q < p <= 1, n >= c >= 1
};

// Deterministic per seed. Community ids become node labels; features are the
// one-hot community indicator concatenated with 8 seeded standard-normal
// dimensions, so classification is learnable but not trivial. Masks are a
// stratified 60/20/20 split.
Graph sbm_generate(const SbmSpec& spec);

inline constexpr int kSbmNoiseDims = 8;

}  // namespace sgdd
