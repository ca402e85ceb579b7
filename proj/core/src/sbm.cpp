#include "sgdd/sbm.hpp"

#include <algorithm>

#include "sgdd/errors.hpp"
#include "sgdd/rng.hpp"

namespace sgdd {

void SbmSpec::validate() const {
  if (n < 1) throw InputError("sbm: n must be >= 1");
  if (c < 1 || c > n) throw InputError("sbm: community count outside [1, n]");
  if (!(0.0 <= q && q < p && p <= 1.0))
    throw InputError("sbm: probabilities must satisfy 0 <= q < p <= 1");
}

Graph sbm_generate(const SbmSpec& spec) {
  spec.validate();
  Rng root(spec.seed);

  const int block = spec.n / spec.c;
  std::vector<int> labels(spec.n);
  for (int i = 0; i < spec.n; ++i) labels[i] = std::min(i / block, spec.c - 1);

  Rng edge_rng = root.child("graph-gen:edges");
  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < spec.n; ++i) {
    for (int j = i + 1; j < spec.n; ++j) {
      const double prob = labels[i] == labels[j] ? spec.p : spec.q;
      if (edge_rng.uniform() < prob) edges.emplace_back(i, j);
    }
  }

  Rng noise_rng = root.child("graph-gen:noise");
  const int d = spec.c + kSbmNoiseDims;
  Tensor feats(spec.n, d, 0.0);
  for (int i = 0; i < spec.n; ++i) {
    feats.at(i, labels[i]) = 1.0;
    for (int k = 0; k < kSbmNoiseDims; ++k) feats.at(i, spec.c + k) = noise_rng.normal();
  }

  // Stratified 60/20/20 masks.
  Rng mask_rng = root.child("graph-gen:masks");
  std::vector<bool> train(spec.n, false), val(spec.n, false), test(spec.n, false);
  for (int cls = 0; cls < spec.c; ++cls) {
    std::vector<int> members;
    for (int i = 0; i < spec.n; ++i)
      if (labels[i] == cls) members.push_back(i);
    mask_rng.shuffle(members);
    const int m = static_cast<int>(members.size());
    const int n_train = std::max(1, static_cast<int>(m * 0.6));
    const int n_val = static_cast<int>(m * 0.2);
    for (int i = 0; i < m; ++i) {
      if (i < n_train)
        train[members[i]] = true;
      else if (i < n_train + n_val)
        val[members[i]] = true;
      else
        test[members[i]] = true;
    }
  }

  return build_graph(spec.n, edges, std::move(feats), std::move(labels), std::move(train),
                     std::move(val), std::move(test), spec.c);
}

}  // namespace sgdd
