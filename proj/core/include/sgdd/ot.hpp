#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sgdd/autodiff.hpp"
#include "sgdd/tensor.hpp"

namespace sgdd {

struct OtConfig {
  double gamma = 1.0;          // Laplacian pseudo-inverse regularizer
  int sinkhorn_iters = 30;
  double sinkhorn_tol = 1e-6;
  double plan_lr = 0.05;
  int plan_steps = 5;
  int sample_size = 2000;      // nodes sampled from the original graph

  void validate() const;  // everything strictly positive
};

// Soft alignment of condensed nodes to original nodes: nonnegative n' x n
// matrix with column sums 1 (each original node exports unit mass) and row
// sums n/n' (balanced condensed nodes).
struct TransportPlan {
  Tensor p;
  double row_target = 1.0;
  double col_target = 1.0;
  bool converged = true;
  double row_residual = 0.0;
  double col_residual = 0.0;

  static TransportPlan uniform(int n_prime, int n);
};

// Alternating row/column scaling until both marginal residuals drop below
// tol or the iteration budget runs out (non-convergence is a warning state on
// the result, not an error). Entries are floored at 1e-30 first.
TransportPlan sinkhorn_project(const Tensor& m, double row_target, double col_target, int iters,
                               double tol);

// Training objective over Laplacian pseudo-inverses:
//   n' tr(Ls) - 2 tr(sqrt(sqrtm(Ls) (P Lg P^T) sqrtm(Ls)))
// The original-graph trace is a constant and is omitted. Differentiable in
// ls_pinv and plan.
ad::Val got_objective(ad::Tape& t, ad::Val lg_pinv, ad::Val ls_pinv, ad::Val plan);

// Unscaled Gaussian-W2 diagnostic tr(Lg) + tr(Ls) - 2 tr(sqrt(...)). Zero for
// identical graphs with the identity plan; used by tests and reporting, not
// for training gradients.
double got_diagnostic(const Tensor& lg_pinv, const Tensor& ls_pinv, const Tensor& plan);

// (D - A + (gamma/n) J)^{-1} of a dense adjacency, value level.
Tensor laplacian_pinv(const Tensor& adj, double gamma);

struct PlanOptResult {
  TransportPlan plan;
  std::vector<double> objective_trace;  // objective after each accepted step
  std::vector<std::string> warnings;
};

// Projected gradient descent on the plan: gradient step against
// got_objective, then Sinkhorn projection. Steps that would increase the
// objective by more than 1e-6 are retried with a halved step up to 10 times,
// then accepted as-is with a warning.
PlanOptResult optimize_plan(const Tensor& lg_pinv, const Tensor& ls_pinv, const OtConfig& cfg,
                            uint64_t seed);
PlanOptResult optimize_plan_from(TransportPlan init, const Tensor& lg_pinv,
                                 const Tensor& ls_pinv, const OtConfig& cfg);

// Structure loss for a condensed adjacency on the tape: builds the
// regularized pseudo-inverse of D - A' and evaluates got_objective under the
// given (fixed) plan, so gradients flow to A'. The original side enters as a
// precomputed constant pseudo-inverse.
ad::Val structure_loss(ad::Tape& t, const Tensor& lg_pinv, ad::Val a_prime,
                       const TransportPlan& plan, const OtConfig& cfg);

}  // namespace sgdd
