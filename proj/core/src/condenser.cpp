#include "sgdd/condenser.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <set>

#include "sgdd/adam.hpp"
#include "sgdd/errors.hpp"
#include "sgdd/rng.hpp"
#include "sgdd/spectral.hpp"

namespace sgdd {

using ad::GradMap;
using ad::Tape;
using ad::Val;

void CondenseConfig::validate() const {
  if (!(ratio > 0.0 && ratio < 1.0)) throw InputError("condense: ratio must be in (0, 1)");
  if (alpha < 0.0 || beta < 0.0) throw InputError("condense: alpha/beta must be nonnegative");
  if (!(lr_feature > 0.0 && lr_structure > 0.0 && lr_theta > 0.0))
    throw InputError("condense: learning rates must be positive");
  if (tau1 < 1 || tau2 < 1 || tau_theta < 1 || restarts < 1 || epochs < 1)
    throw InputError("condense: step counts must be >= 1");
  if (hidden < 1 || gen_hidden < 1 || gen_layers < 2)
    throw InputError("condense: bad model dimensions");
  ot.validate();
}

std::vector<int> class_allocation(const Graph& g, int n_prime) {
  const int c = g.num_classes;
  std::vector<int> train_count(c, 0);
  int train_total = 0;
  for (int i = 0; i < g.n; ++i)
    if (g.train_mask[i]) {
      ++train_count[g.labels[i]];
      ++train_total;
    }
  if (train_total == 0) throw InputError("class_allocation: graph has no training nodes");

  std::vector<int> alloc(c, 0);
  int assigned = 0;
  for (int k = 0; k < c; ++k) {
    alloc[k] = static_cast<int>(n_prime * (static_cast<double>(train_count[k]) / train_total));
    assigned += alloc[k];
  }
  // Remainder to the largest classes.
  std::vector<int> order(c);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return train_count[a] > train_count[b]; });
  for (int r = assigned; r < n_prime; ++r) alloc[order[(r - assigned) % c]] += 1;
  // Every represented class keeps at least one node.
  for (int k = 0; k < c; ++k) {
    if (train_count[k] > 0 && alloc[k] == 0) {
      for (int big : order) {
        if (alloc[big] > 1) {
          --alloc[big];
          ++alloc[k];
          break;
        }
      }
    }
    if (train_count[k] == 0 && alloc[k] > 0) {
      // No features to copy for an unrepresented class; hand the budget on.
      alloc[order[0]] += alloc[k];
      alloc[k] = 0;
    }
  }
  return alloc;
}

std::pair<Tensor, std::vector<int>> init_condensed(const Graph& g, double ratio, uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InputError("init_condensed: ratio must be in (0, 1]");
  const int np = static_cast<int>(std::llround(ratio * g.n));
  if (np < g.num_classes)
    throw InputError("init_condensed: ratio " + std::to_string(ratio) + " yields " +
                     std::to_string(np) + " nodes for " + std::to_string(g.num_classes) +
                     " classes");

  const std::vector<int> alloc = class_allocation(g, np);
  Rng rng = Rng(seed).child("init:xprime");

  Tensor xp(np, g.feature_dim());
  std::vector<int> yp(np);
  int row = 0;
  for (int cls = 0; cls < g.num_classes; ++cls) {
    if (alloc[cls] == 0) continue;
    const std::vector<int> pool = g.nodes_of_class(cls, /*train_only=*/true);
    std::vector<int> picks;
    if (static_cast<int>(pool.size()) >= alloc[cls]) {
      for (int s : rng.sample_without_replacement(static_cast<int>(pool.size()), alloc[cls]))
        picks.push_back(pool[s]);
    } else {
      for (int i = 0; i < alloc[cls]; ++i)
        picks.push_back(pool[rng.uniform_int(static_cast<int>(pool.size()))]);
    }
    for (int src : picks) {
      for (int j = 0; j < g.feature_dim(); ++j) xp.at(row, j) = g.features.at(src, j);
      yp[row] = cls;
      ++row;
    }
  }
  if (row != np) throw NumericalError("init_condensed: allocation mismatch");
  return {std::move(xp), std::move(yp)};
}

Val propagation_val(Tape& t, Arch arch, Val adj) {
  const int n = adj.rows();
  switch (arch) {
    case Arch::Gcn:
    case Arch::Sgc:
      return renormalized_adjacency(t, adj);
    case Arch::Mlp:
      return t.constant(Tensor::identity(n));
    case Arch::Cheby: {
      // L~ - I = -D^{-1/2} A D^{-1/2}; learned adjacencies have strictly
      // positive degrees, so no isolated-node branch is needed on the tape.
      Val deg = matmul(adj, t.constant(Tensor::ones(n, 1)));
      Val dinv = div(t.constant(Tensor::ones(n, 1)), sqrt(deg));
      Val rows = mul(matmul(dinv, t.constant(Tensor::ones(1, n))), adj);
      return neg(mul(rows, matmul(t.constant(Tensor::ones(n, 1)), transpose(dinv))));
    }
  }
  throw InputError("propagation_val: bad architecture");
}

namespace {

std::vector<bool> class_mask(const std::vector<int>& labels, int cls) {
  std::vector<bool> m(labels.size(), false);
  for (size_t i = 0; i < labels.size(); ++i) m[i] = labels[i] == cls;
  return m;
}

std::vector<bool> train_class_mask(const Graph& g, int cls) {
  std::vector<bool> m(g.n, false);
  for (int i = 0; i < g.n; ++i) m[i] = g.train_mask[i] && g.labels[i] == cls;
  return m;
}

bool any(const std::vector<bool>& m) {
  for (bool b : m)
    if (b) return true;
  return false;
}

// theta-gradients of the class-restricted loss on the original graph; values
// only, since they are constants with respect to the condensed variables.
std::vector<Tensor> real_class_gradients(const GnnParams& theta, const Graph& g,
                                         const Tensor& g_prop, int cls) {
  Tape t;
  BoundGnn b = bind(t, theta, true);
  Val logits = gnn_forward(t, theta.arch, b, t.constant(g_prop), t.constant(g.features));
  Val ce = cross_entropy(t, logits, g.labels, train_class_mask(g, cls));
  GradMap gm = t.backward(ce);
  std::vector<Tensor> grads;
  for (Val w : b.weights) grads.push_back(t.grad_tensor(gm, w));
  for (Val bi : b.biases) grads.push_back(t.grad_tensor(gm, bi));
  return grads;
}

struct SynForward {
  BoundGnn theta;
  Val logits;
};

SynForward syn_forward(Tape& t, const GnnParams& theta, Arch arch, Val a_prime, Val xp) {
  SynForward f;
  f.theta = bind(t, theta, true);
  f.logits = gnn_forward(t, arch, f.theta, propagation_val(t, arch, a_prime), xp);
  return f;
}

Val match_class(Tape& t, const SynForward& f, const std::vector<Tensor>& real_grads,
                const std::vector<int>& yp, int cls) {
  Val ce = cross_entropy(t, f.logits, yp, class_mask(yp, cls));
  GradMap gm = t.backward(ce);
  std::vector<Val> leaves;
  for (Val w : f.theta.weights) leaves.push_back(w);
  for (Val b : f.theta.biases) leaves.push_back(b);

  Val loss = t.constant_scalar(0.0);
  for (size_t k = 0; k < leaves.size(); ++k) {
    Val diff = sub(t.grad_val(gm, leaves[k]), t.constant(real_grads[k]));
    loss = add(loss, ad::sum_sq(diff));
  }
  return loss;
}

}  // namespace

Val feature_loss(Tape& t, const GnnParams& theta, const Graph& g, int cls, Val a_prime, Val xp,
                 const std::vector<int>& yp, std::vector<std::string>* warnings) {
  const bool real_empty = !any(train_class_mask(g, cls));
  const bool syn_empty = !any(class_mask(yp, cls));
  if (real_empty || syn_empty) {
    if (warnings)
      warnings->push_back("class " + std::to_string(cls) + " empty on the " +
                          (real_empty ? "original" : "condensed") + " side; skipped");
    return t.constant_scalar(0.0);
  }
  const Tensor g_prop = propagation_matrix(theta.arch, g.adjacency_dense());
  const std::vector<Tensor> real = real_class_gradients(theta, g, g_prop, cls);
  SynForward f = syn_forward(t, theta, theta.arch, a_prime, xp);
  return match_class(t, f, real, yp, cls);
}

Val total_loss(Tape& t, Val feature, Val structure, Val a_prime, double alpha, double beta) {
  Val total = feature;
  if (alpha != 0.0) {
    if (!structure.valid()) throw InputError("total_loss: alpha nonzero but no structure loss");
    total = add(total, scale(structure, alpha));
  }
  if (beta != 0.0) total = add(total, scale(ad::frobenius_norm(a_prime), beta));
  return total;
}

Tensor threshold_structure(const Tensor& a_prime, double tau) {
  Tensor out = a_prime;
  for (double& x : out.data)
    if (!(x > tau)) x = 0.0;
  return out;
}

std::pair<CondensedGraph, CondenseReport> condense(const Graph& g, const CondenseConfig& cfg) {
  cfg.validate();
  validate_graph(g);
  const auto t_start = std::chrono::steady_clock::now();

  Rng root(cfg.seed);
  auto [xp, yp] = init_condensed(g, cfg.ratio, cfg.seed);
  const int np = xp.rows;

  Rng gen_rng = root.child("init:gen");
  GenParams gen =
      GenParams::init(g.feature_dim(), g.num_classes, cfg.gen_hidden, cfg.gen_layers, gen_rng);
  Rng z_rng = root.child("init:coords");
  // Coordinates stay fixed for the whole run; resampling them per class step
  // makes the generator chase a moving grid.
  const CoordinateNoise noise = CoordinateNoise::init(np, z_rng);

  std::vector<Tensor*> xp_params{&xp};
  AdamState xp_state = AdamState::init(xp_params);
  std::vector<Tensor*> gen_params = gen.trainable();
  AdamState gen_state = AdamState::init(gen_params);

  const int sample_n = std::min(cfg.ot.sample_size, g.n);
  TransportPlan plan = TransportPlan::uniform(np, sample_n);
  Tensor lg_pinv;

  const Tensor g_prop = propagation_matrix(cfg.arch, g.adjacency_dense());

  CondenseReport report;
  report.seed = cfg.seed;
  std::set<std::string> seen_warnings;
  auto warn_once = [&](const std::string& w) {
    if (seen_warnings.insert(w).second) report.warnings.push_back(w);
  };

  const int cycle = cfg.tau1 + cfg.tau2;
  GnnParams theta;
  int global_epoch = 0;
  bool diverged = false;

  for (int k = 0; k < cfg.restarts && !diverged; ++k) {
    Rng theta_rng = root.child("init:theta", static_cast<uint64_t>(k));
    theta = GnnParams::init(cfg.arch, g.feature_dim(), cfg.hidden, g.num_classes, theta_rng);
    std::vector<Tensor*> theta_params = theta.trainable();
    AdamState theta_state = AdamState::init(theta_params);

    for (int epoch = 0; epoch < cfg.epochs && !diverged; ++epoch, ++global_epoch) {
      const int phase = global_epoch % cycle;

      // Refresh the original-graph sample and advance the plan once per
      // cycle; per-epoch eigendecompositions would dominate the epoch cost.
      if (cfg.alpha > 0.0 && phase == 0) {
        const uint64_t sample_seed =
            root.child("plan", static_cast<uint64_t>(global_epoch / cycle)).root_seed();
        const Graph sample = sample_subgraph(g, sample_n, sample_seed);
        lg_pinv = laplacian_pinv(sample.adjacency_dense(), cfg.ot.gamma);

        Tensor ap_now;
        {
          Tape t;
          BoundGen gb = bind(t, gen, false);
          ap_now = t.value(gen_forward(t, gen, gb, noise, t.constant(xp), yp));
        }
        const Tensor ls_pinv = laplacian_pinv(ap_now, cfg.ot.gamma);
        PlanOptResult opt = optimize_plan_from(std::move(plan), lg_pinv, ls_pinv, cfg.ot);
        plan = std::move(opt.plan);
        for (const auto& w : opt.warnings) warn_once(w);
        if (!plan.converged) warn_once("sinkhorn projection did not reach tolerance");
      }

      Tape t;
      BoundGen gb = bind(t, gen, true);
      Val xv = t.leaf(xp, true);
      Val ap = gen_forward(t, gen, gb, noise, xv, yp);

      if (cfg.debug_checks) {
        CondensedGraph probe;
        probe.n_prime = np;
        probe.ratio = cfg.ratio;
        probe.num_classes = g.num_classes;
        probe.adjacency = t.value(ap);
        probe.features = xp;
        probe.labels = yp;
        validate_condensed(probe);
      }

      SynForward f = syn_forward(t, theta, cfg.arch, ap, xv);
      Val feat = t.constant_scalar(0.0);
      for (int cls = 0; cls < g.num_classes; ++cls) {
        const bool real_empty = !any(train_class_mask(g, cls));
        const bool syn_empty = !any(class_mask(yp, cls));
        if (real_empty || syn_empty) {
          warn_once("class " + std::to_string(cls) + " empty on the " +
                    (real_empty ? "original" : "condensed") + " side; skipped");
          continue;
        }
        feat = add(feat, match_class(t, f, real_class_gradients(theta, g, g_prop, cls), yp, cls));
      }

      Val structure{};
      if (cfg.alpha > 0.0) structure = structure_loss(t, lg_pinv, ap, plan, cfg.ot);
      Val total = total_loss(t, feat, structure, ap, cfg.alpha, cfg.beta);

      const double feat_v = t.scalar(feat);
      const double struct_v = cfg.alpha > 0.0 ? t.scalar(structure) : 0.0;
      const double total_v = t.scalar(total);
      const double reg_v =
          cfg.beta > 0.0 ? (total_v - feat_v - cfg.alpha * struct_v) / cfg.beta : 0.0;

      if (!std::isfinite(total_v)) {
        report.diverged = true;
        report.warnings.push_back("non-finite loss at epoch " + std::to_string(global_epoch) +
                                  "; stopped at the last finite state");
        diverged = true;
        break;
      }
      report.feature_trace.push_back(feat_v);
      report.structure_trace.push_back(struct_v);
      report.regularizer_trace.push_back(reg_v);
      report.total_trace.push_back(total_v);
      report.epochs_run += 1;

      const Tensor ap_value = t.value(ap);
      const Tensor xp_value = xp;

      GradMap gm = t.backward(total);
      if (phase < cfg.tau1) {
        std::vector<Tensor> grads{t.grad_tensor(gm, xv)};
        AdamConfig ac;
        ac.lr = cfg.lr_feature;
        adam_step(xp_params, grads, xp_state, ac);
      } else {
        std::vector<Val> leaves;
        for (Val w : gb.siren_w) leaves.push_back(w);
        for (Val b : gb.siren_b) leaves.push_back(b);
        for (Val w : gb.cond_w) leaves.push_back(w);
        for (Val b : gb.cond_b) leaves.push_back(b);
        std::vector<Tensor> grads;
        grads.reserve(leaves.size());
        for (Val l : leaves) grads.push_back(t.grad_tensor(gm, l));
        AdamConfig ac;
        ac.lr = cfg.lr_structure;
        adam_step(gen_params, grads, gen_state, ac);
      }

      // Inner GNN refresh on the pre-update condensed graph.
      const Tensor s_prop = propagation_matrix(cfg.arch, ap_value);
      const std::vector<bool> all_nodes(np, true);
      for (int s = 0; s < cfg.tau_theta; ++s) {
        Tape tt;
        BoundGnn tb = bind(tt, theta, true);
        Val logits = gnn_forward(tt, cfg.arch, tb, tt.constant(s_prop), tt.constant(xp_value));
        GradMap tgm = tt.backward(cross_entropy(tt, logits, yp, all_nodes));
        std::vector<Tensor> grads;
        for (Val w : tb.weights) grads.push_back(tt.grad_tensor(tgm, w));
        for (Val b : tb.biases) grads.push_back(tt.grad_tensor(tgm, b));
        AdamConfig ac;
        ac.lr = cfg.lr_theta;
        adam_step(theta_params, grads, theta_state, ac);
      }
    }
  }

  // Final structure from the trained generator, thresholded at 0.5; surviving
  // entries keep their continuous weights.
  CondensedGraph out;
  out.n_prime = np;
  out.ratio = cfg.ratio;
  out.num_classes = g.num_classes;
  out.labels = yp;
  out.features = xp;
  {
    Tape t;
    BoundGen gb = bind(t, gen, false);
    out.adjacency =
        threshold_structure(t.value(gen_forward(t, gen, gb, noise, t.constant(xp), yp)));
  }
  validate_condensed(out);

  // A diverged run can leave non-finite features behind; -1 marks "not
  // computed" in that case.
  report.final_sc =
      report.diverged ? -1.0 : shift_coefficient(g, out, g.features, out.features).sc;
  report.wall_clock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return {std::move(out), std::move(report)};
}

}  // namespace sgdd
