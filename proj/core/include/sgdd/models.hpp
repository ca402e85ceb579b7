#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sgdd/autodiff.hpp"
#include "sgdd/graph.hpp"
#include "sgdd/rng.hpp"
#include "sgdd/tensor.hpp"

namespace sgdd {

enum class Arch { Gcn, Sgc, Mlp, Cheby };

Arch arch_from_string(const std::string& s);  // InputError on unknown tag
std::string arch_name(Arch a);
const std::vector<Arch>& all_archs();

// Per-layer weights and biases for one of the forward models. Layer shapes
// chain in_dim -> hidden -> out_dim (SGC is a single linear map).
struct GnnParams {
  Arch arch = Arch::Gcn;
  int in_dim = 0;
  int hidden = 0;
  int out_dim = 0;
  int hops = 2;  // propagation steps (SGC) / Chebyshev order
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  static GnnParams init(Arch arch, int in_dim, int hidden, int out_dim, Rng& rng);
  std::vector<Tensor*> trainable();
  std::vector<const Tensor*> trainable() const;
};

struct BoundGnn {
  std::vector<ad::Val> weights;
  std::vector<ad::Val> biases;
};
BoundGnn bind(ad::Tape& t, const GnnParams& p, bool requires_grad = true);

// Self-loop renormalized adjacency D^{-1/2} (A + I) D^{-1/2}.
Tensor renormalized_adjacency(const Tensor& dense_adj);
Tensor renormalized_adjacency(const Graph& g);
// Differentiable variant for a learned adjacency (entries >= 0, zero diag).
ad::Val renormalized_adjacency(ad::Tape& t, ad::Val adj);

// Rescaled Laplacian L~ - I driving the Chebyshev recurrence.
Tensor cheby_operator(const Tensor& dense_adj);

// The propagation operator each architecture expects (identity for MLP).
Tensor propagation_matrix(Arch arch, const Tensor& dense_adj);

ad::Val gnn_forward(ad::Tape& t, Arch arch, const BoundGnn& p, ad::Val prop, ad::Val x);

// Value-level forward for inference.
Tensor gnn_logits(const GnnParams& p, const Tensor& prop, const Tensor& x);

// Mean cross-entropy over masked nodes, stabilized by row-max subtraction.
// Throws InputError when the mask selects no node.
ad::Val cross_entropy(ad::Tape& t, ad::Val logits, const std::vector<int>& labels,
                      const std::vector<bool>& mask);

// ---------------------------------------------------------------------------
// Structure generator

inline constexpr int kGenFreqDims = 16;
inline constexpr double kSirenOmega0 = 30.0;

// Latent per-node coordinates in [0,1]; fixed for a whole condensation run.
struct CoordinateNoise {
  std::vector<double> coords;
  static CoordinateNoise init(int n_prime, Rng& rng);
};

// Pairwise coordinate network mapping (v_i, v_j) plus endpoint conditions to
// an edge probability: random-Fourier positional encoding, hidden layers that
// concatenate a conditional MLP of [X'_i, onehot(Y'_i), X'_j, onehot(Y'_j)]
// with a sine branch, sigmoid head. The frequency matrix is drawn once at
// init and never trained.
struct GenParams {
  int feat_dim = 0;
  int num_classes = 0;
  int hidden = 64;
  int layers = 2;
  Tensor freq;  // 2 x kGenFreqDims, immutable
  std::vector<Tensor> siren_w, siren_b;
  std::vector<Tensor> cond_w, cond_b;

  static GenParams init(int feat_dim, int num_classes, int hidden, int layers, Rng& rng);
  std::vector<Tensor*> trainable();
  std::vector<const Tensor*> trainable() const;
};

struct BoundGen {
  std::vector<ad::Val> siren_w, siren_b, cond_w, cond_b;
};
BoundGen bind(ad::Tape& t, const GenParams& p, bool requires_grad = true);

// A' as an n' x n' node: symmetrized pair outputs with zero diagonal, every
// entry in [0, 1]. Differentiable in the generator parameters and X'.
ad::Val gen_forward(ad::Tape& t, const GenParams& p, const BoundGen& b,
                    const CoordinateNoise& noise, ad::Val xp, const std::vector<int>& yp);

// ---------------------------------------------------------------------------
// Parameter checkpoints: JSON with named tensors (shape + row-major values).

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors);
std::map<std::string, Tensor> load_tensors(const std::string& path);

void save_gnn(const GnnParams& p, const std::string& path);
GnnParams load_gnn(const std::string& path);
void save_gen(const GenParams& p, const std::string& path);
GenParams load_gen(const std::string& path);

}  // namespace sgdd
