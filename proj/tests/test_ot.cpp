#include <doctest.h>

#include <chrono>
#include <cmath>

#include "helpers.hpp"
#include "sgdd/errors.hpp"
#include "sgdd/graph.hpp"
#include "sgdd/linalg.hpp"
#include "sgdd/ot.hpp"
#include "sgdd/sbm.hpp"

using namespace sgdd;
using namespace sgdd::ad;
using test::db_sqrtm;
using test::random_tensor;
using test::trace_of;

namespace {

// Moore-Penrose pseudo-inverse of a symmetric PSD matrix (test-side helper
// for singular Laplacians that reg_inverse rightly refuses).
Tensor mp_pinv(const Tensor& m, double floor = 1e-9) {
  std::vector<double> vals, vecs;
  linalg::jacobi_eigen(m.rows, m.data, vals, vecs);
  const int n = m.rows;
  Tensor out(n, n, 0.0);
  for (int k = 0; k < n; ++k) {
    if (vals[k] <= floor) continue;
    const double inv = 1.0 / vals[k];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        out.at(i, j) += inv * vecs[static_cast<size_t>(i) * n + k] * vecs[static_cast<size_t>(j) * n + k];
  }
  return out;
}

// Independent re-evaluation of the training objective through Denman-Beavers
// roots and Gauss-Jordan inverses (no eigensolver, no tape).
double eq9_oracle(const Tensor& lg_pinv, const Tensor& ls_pinv, const Tensor& plan) {
  const int np = ls_pinv.rows;
  const Tensor min_inner = symmetrized(matmul(matmul(plan, lg_pinv), transposed(plan)));
  const Tensor root = db_sqrtm(ls_pinv);
  const Tensor nested = symmetrized(matmul(matmul(root, min_inner), root));
  return np * trace_of(ls_pinv) - 2.0 * trace_of(db_sqrtm(nested));
}

Tensor graph_adj(const std::vector<std::pair<int, int>>& edges, int n) {
  Tensor a(n, n, 0.0);
  for (auto [i, j] : edges) {
    a.at(i, j) = 1.0;
    a.at(j, i) = 1.0;
  }
  return a;
}

// Closed-form principal square root pieces for symmetric PSD 2x2 matrices:
// sqrt(M) = (M + sqrt(det) I) / sqrt(tr + 2 sqrt(det)), and hence
// tr(sqrt(M)) = sqrt(tr + 2 sqrt(det)). Exact even for singular inputs.
double tr_sqrt_2x2(const Tensor& m) {
  const double tr = m.at(0, 0) + m.at(1, 1);
  const double det = std::max(0.0, m.at(0, 0) * m.at(1, 1) - m.at(0, 1) * m.at(1, 0));
  return std::sqrt(std::max(0.0, tr + 2.0 * std::sqrt(det)));
}

Tensor sqrtm_2x2(const Tensor& m) {
  const double det = std::max(0.0, m.at(0, 0) * m.at(1, 1) - m.at(0, 1) * m.at(1, 0));
  const double s = std::sqrt(det);
  const double t = std::sqrt(std::max(0.0, m.at(0, 0) + m.at(1, 1) + 2.0 * s));
  Tensor out(2, 2, 0.0);
  if (t == 0.0) return out;
  out.at(0, 0) = (m.at(0, 0) + s) / t;
  out.at(0, 1) = m.at(0, 1) / t;
  out.at(1, 0) = m.at(1, 0) / t;
  out.at(1, 1) = (m.at(1, 1) + s) / t;
  return out;
}

// Eq-value re-evaluation for a 2-node condensed side through the closed
// forms above (handles the singular Moore-Penrose inputs exactly).
double eq9_2x2_oracle(const Tensor& lg_pinv, const Tensor& ls_pinv, const Tensor& plan) {
  const Tensor min_inner = symmetrized(matmul(matmul(plan, lg_pinv), transposed(plan)));
  const Tensor root = sqrtm_2x2(ls_pinv);
  const Tensor nested = symmetrized(matmul(matmul(root, min_inner), root));
  return 2.0 * trace_of(ls_pinv) - 2.0 * tr_sqrt_2x2(nested);
}

// Random connected adjacency: a spanning path plus random extra edges.
Tensor random_connected_adj(int n, Rng& rng, double extra_prob = 0.4) {
  Tensor a(n, n, 0.0);
  for (int i = 0; i + 1 < n; ++i) {
    a.at(i, i + 1) = 1.0;
    a.at(i + 1, i) = 1.0;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 2; j < n; ++j)
      if (rng.uniform() < extra_prob) {
        a.at(i, j) = 1.0;
        a.at(j, i) = 1.0;
      }
  return a;
}

}  // namespace

TEST_CASE("sinkhorn projection") {
  SUBCASE("all-ones matrix with unit targets becomes uniform") {
    TransportPlan p = sinkhorn_project(Tensor::ones(2, 2), 1.0, 1.0, 50, 1e-9);
    CHECK(p.converged);
    CHECK(max_abs_diff(p.p, Tensor(2, 2, 0.5)) < 1e-12);
  }
  SUBCASE("a balanced matrix is a fixed point") {
    Tensor m = Tensor::from(2, 4, {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
    TransportPlan p = sinkhorn_project(m, 2.0, 1.0, 50, 1e-9);
    CHECK(max_abs_diff(p.p, m) < 1e-12);
  }
  SUBCASE("random positive 3x6 satisfies both marginals within 1e-6") {
    Rng rng(5);
    const Tensor m = random_tensor(3, 6, rng, 0.05, 1.0);
    TransportPlan p = sinkhorn_project(m, 2.0, 1.0, 500, 1e-7);
    CHECK(p.converged);
    // Direct residual measurement.
    for (int i = 0; i < 3; ++i) {
      double s = 0.0;
      for (int j = 0; j < 6; ++j) s += p.p.at(i, j);
      CHECK(std::abs(s - 2.0) < 1e-6);
    }
    for (int j = 0; j < 6; ++j) {
      double s = 0.0;
      for (int i = 0; i < 3; ++i) s += p.p.at(i, j);
      CHECK(std::abs(s - 1.0) < 1e-6);
    }
  }
  SUBCASE("marginal invariants hold across random instances") {
    Rng rng(6);
    for (int trial = 0; trial < 20; ++trial) {
      const int np = 2 + rng.uniform_int(4);
      const int n = np + 1 + rng.uniform_int(8);
      const Tensor m = random_tensor(np, n, rng, 0.01, 1.0);
      TransportPlan p =
          sinkhorn_project(m, static_cast<double>(n) / np, 1.0, 500, 1e-7);
      CHECK(p.converged);
      CHECK(p.row_residual < 1e-6);
      CHECK(p.col_residual < 1e-6);
      for (double x : p.p.data) CHECK(x >= 0.0);
    }
  }
  SUBCASE("iteration exhaustion is a warning state, not an error") {
    Rng rng(7);
    const Tensor m = random_tensor(3, 6, rng, 0.01, 1.0);
    TransportPlan p = sinkhorn_project(m, 2.0, 1.0, 1, 1e-15);
    CHECK_FALSE(p.converged);
  }
}

TEST_CASE("got objective") {
  SUBCASE("diagnostic form vanishes for identical graphs with identity plan") {
    const Tensor adj = graph_adj({{0, 1}, {1, 2}, {2, 3}, {0, 3}}, 4);
    const Tensor pinv = laplacian_pinv(adj, 1.0);
    CHECK(std::abs(got_diagnostic(pinv, pinv, Tensor::identity(4))) < 1e-9);
  }
  SUBCASE("diagnostic form is positive for non-isomorphic pairs") {
    const Tensor complete = graph_adj({{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}, 4);
    const Tensor path = graph_adj({{0, 1}, {1, 2}, {2, 3}}, 4);
    const double d = got_diagnostic(laplacian_pinv(complete, 1.0), laplacian_pinv(path, 1.0),
                                    Tensor::identity(4));
    CHECK(d > 1e-6);
  }
  SUBCASE("two-node pair with identity plan matches the independent oracle") {
    const Tensor edge = graph_adj({{0, 1}}, 2);
    const Tensor pinv = laplacian_pinv(edge, 1.0);
    Tape t;
    const double got =
        t.scalar(got_objective(t, t.constant(pinv), t.constant(pinv), t.constant(Tensor::identity(2))));
    CHECK(got == doctest::Approx(eq9_oracle(pinv, pinv, Tensor::identity(2))).epsilon(1e-9));
  }
  SUBCASE("matches the independent eigensolver-free oracle on random pairs") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
      const int n = 4 + rng.uniform_int(5);   // 4..8
      const int np = 2 + rng.uniform_int(3);  // 2..4
      const Tensor lg = laplacian_pinv(random_connected_adj(n, rng), 1.0);
      const Tensor ls = laplacian_pinv(random_connected_adj(np, rng), 1.0);
      TransportPlan plan = sinkhorn_project(random_tensor(np, n, rng, 0.05, 1.0),
                                            static_cast<double>(n) / np, 1.0, 300, 1e-9);
      Tape t;
      const double got =
          t.scalar(got_objective(t, t.constant(lg), t.constant(ls), t.constant(plan.p)));
      const double expect = eq9_oracle(lg, ls, plan.p);
      CHECK(got == doctest::Approx(expect).epsilon(1e-9));
    }
  }
  SUBCASE("matrix-function intermediates stay symmetric") {
    Rng rng(13);
    const Tensor adj = random_connected_adj(8, rng);
    const Tensor lg = laplacian_pinv(adj, 1.0);
    Tape t;
    Val ls = reg_inverse(t.constant(combinatorial_laplacian_dense(adj)), 1.0);
    const Tensor ls_v = t.value(ls);
    CHECK(max_abs_diff(ls_v, symmetrized(ls_v)) < 1e-9);
    const Tensor root = t.value(sqrtm_psd(ls));
    CHECK(max_abs_diff(root, symmetrized(root)) < 1e-9);
  }
}

TEST_CASE("optimize_plan") {
  SUBCASE("identical graphs: optimization never does worse than the start") {
    const Tensor adj = graph_adj({{0, 1}, {1, 2}, {2, 3}, {0, 3}}, 4);
    const Tensor pinv = laplacian_pinv(adj, 1.0);
    OtConfig cfg;
    cfg.plan_steps = 10;
    PlanOptResult res = optimize_plan(pinv, pinv, cfg, 3);
    const Tensor uniform = TransportPlan::uniform(4, 4).p;
    CHECK(got_diagnostic(pinv, pinv, res.plan.p) <=
          got_diagnostic(pinv, pinv, uniform) + 1e-9);
  }
  SUBCASE("objective trace is deterministic per seed and non-increasing") {
    Rng rng(77);
    const Tensor lg = laplacian_pinv(random_connected_adj(10, rng), 1.0);
    const Tensor ls = laplacian_pinv(random_connected_adj(4, rng), 1.0);
    OtConfig cfg;
    cfg.plan_steps = 6;
    PlanOptResult a = optimize_plan(lg, ls, cfg, 9);
    PlanOptResult b = optimize_plan(lg, ls, cfg, 9);
    CHECK(a.objective_trace == b.objective_trace);
    for (size_t i = 1; i < a.objective_trace.size(); ++i)
      CHECK(a.objective_trace[i] <= a.objective_trace[i - 1] + 1e-6);
  }
  SUBCASE("two disjoint edges: recovers the brute-force optimum") {
    // Original: 4 nodes forming two disjoint edges; condensed: one edge.
    // Both Laplacians are rank-deficient, so the test supplies Moore-Penrose
    // pseudo-inverses (reg_inverse correctly refuses the singular shift).
    const Tensor lg_pinv =
        mp_pinv(combinatorial_laplacian_dense(graph_adj({{0, 1}, {2, 3}}, 4)));
    const Tensor ls_pinv = mp_pinv(combinatorial_laplacian_dense(graph_adj({{0, 1}}, 2)));

    // Brute force over the 17x17 grid of marginal-feasible block plans
    // P(s, t) = [[s, t, 1-s, 1-t], [1-s, 1-t, s, t]].
    double best = 1e300;
    Tensor best_plan;
    for (int si = 0; si <= 16; ++si) {
      for (int ti = 0; ti <= 16; ++ti) {
        const double s = si / 16.0, u = ti / 16.0;
        const Tensor plan =
            Tensor::from(2, 4, {s, u, 1 - s, 1 - u, 1 - s, 1 - u, s, u});
        const double obj = eq9_2x2_oracle(lg_pinv, ls_pinv, plan);
        if (obj < best) {
          best = obj;
          best_plan = plan;
        }
      }
    }
    // The grid optimum pairs one endpoint of each component per condensed
    // node (the edge-difference modes anti-align).
    CHECK(best < 0.0);

    OtConfig cfg;
    cfg.plan_lr = 0.3;
    cfg.plan_steps = 400;
    cfg.sinkhorn_iters = 200;
    cfg.sinkhorn_tol = 1e-9;
    PlanOptResult res = optimize_plan(lg_pinv, ls_pinv, cfg, 5);
    const double reached = res.objective_trace.back();
    CHECK(reached <= best + 1e-4);
  }
}

TEST_CASE("structure loss") {
  SUBCASE("identical adjacency with identity plan has zero diagnostic distance") {
    Rng rng(50);
    const Tensor pinv = laplacian_pinv(random_connected_adj(6, rng), 1.0);
    CHECK(std::abs(got_diagnostic(pinv, pinv, Tensor::identity(6))) < 1e-9);
  }
  SUBCASE("gradient wrt the condensed adjacency passes finite differences") {
    Rng rng(52);
    const Tensor lg = laplacian_pinv(random_connected_adj(6, rng), 1.0);
    OtConfig cfg;
    // A generic full-rank plan: at the exactly-uniform plan the nested matrix
    // is rank one and the floored root gradient is one-sided.
    TransportPlan plan =
        sinkhorn_project(random_tensor(3, 6, rng, 0.2, 1.0), 2.0, 1.0, 300, 1e-10);
    // Positive symmetric start with zero diagonal.
    Tensor a0(3, 3, 0.0);
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) {
        const double w = rng.uniform(0.3, 0.9);
        a0.at(i, j) = w;
        a0.at(j, i) = w;
      }
    const double err = finite_diff_check(
        [&](Tape& t, Val a) { return structure_loss(t, lg, a, plan, cfg); }, a0, 1e-5);
    CHECK(err < 1e-4);
  }
  SUBCASE("2000-node sample evaluates in under a minute") {
    Graph g = sbm_generate({2000, 5, 0.8, 0.1, 60});
    const auto start = std::chrono::steady_clock::now();
    Graph sample = sample_subgraph(g, 2000, 61);
    const Tensor lg = laplacian_pinv(sample.adjacency_dense(), 1.0);
    OtConfig cfg;
    TransportPlan plan = TransportPlan::uniform(10, 2000);
    Rng rng(62);
    Tensor a0(10, 10, 0.0);
    for (int i = 0; i < 10; ++i)
      for (int j = i + 1; j < 10; ++j) {
        const double w = rng.uniform(0.3, 0.9);
        a0.at(i, j) = w;
        a0.at(j, i) = w;
      }
    Tape t;
    Val a = t.leaf(a0, true);
    Val loss = structure_loss(t, lg, a, plan, cfg);
    GradMap gm = t.backward(loss);
    const Tensor grad = t.grad_tensor(gm, a);
    for (double v : grad.data) CHECK(std::isfinite(v));
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(secs < 60.0);
  }
}

TEST_CASE("ot config validation") {
  OtConfig cfg;
  cfg.gamma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
}
