#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sgdd/autodiff.hpp"
#include "sgdd/graph.hpp"
#include "sgdd/models.hpp"
#include "sgdd/ot.hpp"

namespace sgdd {

struct CondenseConfig {
  double ratio = 0.1;
  double alpha = 0.1;         // structure loss weight
  double beta = 0.1;          // sparsity regularizer weight
  double lr_feature = 1e-4;   // X' learning rate
  double lr_structure = 1e-3; // generator learning rate
  double lr_theta = 0.01;     // inner GNN learning rate
  int tau1 = 10;              // feature epochs per cycle
  int tau2 = 5;               // structure epochs per cycle
  int tau_theta = 3;          // inner GNN steps per epoch
  int restarts = 3;           // outer restarts (fresh GNN init each)
  int epochs = 200;           // epochs per restart
  Arch arch = Arch::Gcn;
  int hidden = 128;
  int gen_hidden = 64;
  int gen_layers = 2;
  OtConfig ot;
  uint64_t seed = 0;
  bool debug_checks = false;  // re-validate A' invariants every epoch

  void validate() const;
};

struct CondenseReport {
  std::vector<double> feature_trace;
  std::vector<double> structure_trace;
  std::vector<double> regularizer_trace;
  std::vector<double> total_trace;
  double final_sc = 0.0;
  double wall_clock_s = 0.0;  // measured; kept out of the serialized report
  bool diverged = false;
  int epochs_run = 0;
  uint64_t seed = 0;
  std::vector<std::string> warnings;
};

// Label allocation proportional to the training-set class shares (remainder
// to the largest classes, every represented class gets at least one node);
// feature rows copied from uniformly sampled training nodes of the matching
// class. Throws InputError when ratio*n < num_classes.
std::pair<Tensor, std::vector<int>> init_condensed(const Graph& g, double ratio, uint64_t seed);

// Per-class target counts used by init_condensed and the coreset baselines.
std::vector<int> class_allocation(const Graph& g, int n_prime);

// Gradient-matching loss for one class: the squared L2 distance between the
// theta-gradients of the classification loss on the original class batch
// (entering as constants) and on the condensed class subset (tape nodes, so
// the result is differentiable through the inner gradient in X' and A').
// Returns a zero scalar and appends a warning when the class is empty on
// either side.
ad::Val feature_loss(ad::Tape& t, const GnnParams& theta, const Graph& g, int cls,
                     ad::Val a_prime, ad::Val xp, const std::vector<int>& yp,
                     std::vector<std::string>* warnings = nullptr);

// L = feature + alpha * structure + beta * ||A'||_F. Pass an invalid
// structure Val when alpha is zero; zero-weight terms are not built.
ad::Val total_loss(ad::Tape& t, ad::Val feature, ad::Val structure, ad::Val a_prime,
                   double alpha, double beta);

// Entries <= tau are zeroed; survivors keep their continuous weights.
Tensor threshold_structure(const Tensor& a_prime, double tau = 0.5);

// The full bi-level loop: alternating X'/generator updates under gradient
// matching + OT structure loss, inner GNN refreshes, transport plan advanced
// once per (tau1+tau2) cycle, final 0.5 thresholding. Deterministic per seed.
std::pair<CondensedGraph, CondenseReport> condense(const Graph& g, const CondenseConfig& cfg);

// Propagation operator on the tape for a learned adjacency.
ad::Val propagation_val(ad::Tape& t, Arch arch, ad::Val adj);

}  // namespace sgdd
