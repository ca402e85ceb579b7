#include "sgdd/ot.hpp"

#include <algorithm>
#include <cmath>

#include "sgdd/errors.hpp"
#include "sgdd/graph.hpp"
#include "sgdd/linalg.hpp"
#include "sgdd/rng.hpp"

namespace sgdd {

using ad::Tape;
using ad::Val;

void OtConfig::validate() const {
  if (!(gamma > 0.0) || sinkhorn_iters < 1 || !(sinkhorn_tol > 0.0) || !(plan_lr > 0.0) ||
      plan_steps < 1 || sample_size < 1)
    throw InputError("ot config: all parameters must be positive");
}

TransportPlan TransportPlan::uniform(int n_prime, int n) {
  if (n_prime < 1 || n < 1) throw InputError("transport plan: empty dimensions");
  TransportPlan plan;
  plan.p = Tensor(n_prime, n, 1.0 / static_cast<double>(n_prime));
  plan.row_target = static_cast<double>(n) / static_cast<double>(n_prime);
  plan.col_target = 1.0;
  return plan;
}

TransportPlan sinkhorn_project(const Tensor& m, double row_target, double col_target, int iters,
                               double tol) {
  if (m.rows < 1 || m.cols < 1) throw InputError("sinkhorn_project: empty matrix");
  if (!(row_target > 0.0) || !(col_target > 0.0))
    throw InputError("sinkhorn_project: targets must be positive");

  TransportPlan plan;
  plan.row_target = row_target;
  plan.col_target = col_target;
  plan.p = m;
  for (double& x : plan.p.data) x = std::max(x, 1e-30);

  Tensor& p = plan.p;
  plan.converged = false;
  for (int it = 0; it < iters; ++it) {
    for (int i = 0; i < p.rows; ++i) {
      double s = 0.0;
      for (int j = 0; j < p.cols; ++j) s += p.at(i, j);
      const double f = row_target / s;
      for (int j = 0; j < p.cols; ++j) p.at(i, j) *= f;
    }
    for (int j = 0; j < p.cols; ++j) {
      double s = 0.0;
      for (int i = 0; i < p.rows; ++i) s += p.at(i, j);
      const double f = col_target / s;
      for (int i = 0; i < p.rows; ++i) p.at(i, j) *= f;
    }
    double row_res = 0.0, col_res = 0.0;
    for (int i = 0; i < p.rows; ++i) {
      double s = 0.0;
      for (int j = 0; j < p.cols; ++j) s += p.at(i, j);
      row_res = std::max(row_res, std::abs(s - row_target));
    }
    for (int j = 0; j < p.cols; ++j) {
      double s = 0.0;
      for (int i = 0; i < p.rows; ++i) s += p.at(i, j);
      col_res = std::max(col_res, std::abs(s - col_target));
    }
    plan.row_residual = row_res;
    plan.col_residual = col_res;
    if (row_res < tol && col_res < tol) {
      plan.converged = true;
      break;
    }
  }
  return plan;
}

Val got_objective(Tape& t, Val lg_pinv, Val ls_pinv, Val plan) {
  const int n = lg_pinv.rows();
  const int np = ls_pinv.rows();
  if (lg_pinv.cols() != n || ls_pinv.cols() != np)
    throw InputError("got_objective: pseudo-inverses must be square");
  if (plan.rows() != np || plan.cols() != n)
    throw InputError("got_objective: plan shape " + std::to_string(plan.rows()) + "x" +
                     std::to_string(plan.cols()) + " does not match " + std::to_string(np) + "x" +
                     std::to_string(n));

  Val inner = ad::symmetrize(matmul(matmul(plan, lg_pinv), transpose(plan)));
  Val root = sqrtm_psd(ls_pinv);
  Val nested = ad::symmetrize(matmul(matmul(root, inner), root));
  Val matched = scale(trace_sqrtm(nested), -2.0);
  return add(scale(ad::trace(ls_pinv), static_cast<double>(np)), matched);
}

double got_diagnostic(const Tensor& lg_pinv, const Tensor& ls_pinv, const Tensor& plan) {
  Tape t;
  Val lg = t.constant(lg_pinv);
  Val ls = t.constant(ls_pinv);
  Val p = t.constant(plan);
  Val inner = ad::symmetrize(matmul(matmul(p, lg), transpose(p)));
  Val root = sqrtm_psd(ls);
  Val nested = ad::symmetrize(matmul(matmul(root, inner), root));
  const double cross = t.scalar(trace_sqrtm(nested));
  const double tr_g = t.scalar(ad::trace(lg));
  const double tr_s = t.scalar(ad::trace(ls));
  return tr_g + tr_s - 2.0 * cross;
}

Tensor laplacian_pinv(const Tensor& adj, double gamma) {
  const Tensor lap = combinatorial_laplacian_dense(adj);
  const int n = lap.rows;
  std::vector<double> k(lap.data);
  const double shift = gamma / static_cast<double>(n);
  for (double& x : k) x += shift;
  Tensor out(n, n);
  out.data = linalg::spd_inverse(n, k);
  return out;
}

namespace {

double objective_value(const Tensor& lg_pinv, const Tensor& ls_pinv, const Tensor& plan) {
  Tape t;
  return t.scalar(
      got_objective(t, t.constant(lg_pinv), t.constant(ls_pinv), t.constant(plan)));
}

}  // namespace

PlanOptResult optimize_plan_from(TransportPlan init, const Tensor& lg_pinv, const Tensor& ls_pinv,
                                 const OtConfig& cfg) {
  cfg.validate();
  PlanOptResult res;
  res.plan = std::move(init);

  double current = objective_value(lg_pinv, ls_pinv, res.plan.p);
  res.objective_trace.push_back(current);

  for (int step = 0; step < cfg.plan_steps; ++step) {
    Tensor grad;
    {
      Tape t;
      Val pv = t.leaf(res.plan.p, true);
      Val obj = got_objective(t, t.constant(lg_pinv), t.constant(ls_pinv), pv);
      ad::GradMap gm = t.backward(obj);
      grad = t.grad_tensor(gm, pv);
    }

    double lr = cfg.plan_lr;
    TransportPlan candidate;
    double cand_obj = 0.0;
    bool accepted = false;
    for (int attempt = 0; attempt <= 10; ++attempt) {
      Tensor stepped = res.plan.p;
      for (size_t i = 0; i < stepped.data.size(); ++i) stepped.data[i] -= lr * grad.data[i];
      candidate = sinkhorn_project(stepped, res.plan.row_target, res.plan.col_target,
                                   cfg.sinkhorn_iters, cfg.sinkhorn_tol);
      cand_obj = objective_value(lg_pinv, ls_pinv, candidate.p);
      if (cand_obj <= current + 1e-6) {
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted)
      res.warnings.push_back("plan step " + std::to_string(step) +
                             " increased the objective after 10 halvings; accepted as-is");
    res.plan = std::move(candidate);
    current = cand_obj;
    res.objective_trace.push_back(current);
  }
  return res;
}

PlanOptResult optimize_plan(const Tensor& lg_pinv, const Tensor& ls_pinv, const OtConfig& cfg,
                            uint64_t seed) {
  // Maximal-entropy start with a small seeded jitter: an exactly uniform plan
  // has identical rows, which puts the matched term on a stationary ridge
  // where the floored matrix-root backward yields a zero gradient.
  TransportPlan init = TransportPlan::uniform(ls_pinv.rows, lg_pinv.rows);
  Rng rng = Rng(seed).child("plan:init");
  for (double& x : init.p.data) x *= 1.0 + 1e-3 * (rng.uniform() - 0.5);
  init = sinkhorn_project(init.p, init.row_target, init.col_target, cfg.sinkhorn_iters,
                          cfg.sinkhorn_tol);
  return optimize_plan_from(std::move(init), lg_pinv, ls_pinv, cfg);
}

Val structure_loss(Tape& t, const Tensor& lg_pinv, Val a_prime, const TransportPlan& plan,
                   const OtConfig& cfg) {
  const int np = a_prime.rows();
  if (a_prime.cols() != np) throw InputError("structure_loss: condensed adjacency not square");
  if (plan.p.rows != np || plan.p.cols != lg_pinv.rows)
    throw InputError("structure_loss: plan shape does not match the graphs");

  Val deg = matmul(a_prime, t.constant(Tensor::ones(np, 1)));
  Val dmat = mul(matmul(deg, t.constant(Tensor::ones(1, np))), t.constant(Tensor::identity(np)));
  Val lap = sub(dmat, a_prime);
  Val ls_pinv = reg_inverse(lap, cfg.gamma);
  return got_objective(t, t.constant(lg_pinv), ls_pinv, t.constant(plan.p));
}

}  // namespace sgdd
