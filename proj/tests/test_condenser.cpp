#include <doctest.h>

#include <cmath>
#include <set>

#include "helpers.hpp"
#include "sgdd/condenser.hpp"
#include "sgdd/errors.hpp"
#include "sgdd/sbm.hpp"

using namespace sgdd;
using namespace sgdd::ad;

namespace {

// Small fast config for loop-behavior tests.
CondenseConfig tiny_config(uint64_t seed) {
  CondenseConfig cfg;
  cfg.ratio = 0.2;
  cfg.hidden = 16;
  cfg.gen_hidden = 8;
  cfg.tau1 = 2;
  cfg.tau2 = 2;
  cfg.tau_theta = 1;
  cfg.restarts = 1;
  cfg.epochs = 8;
  cfg.ot.sample_size = 64;
  cfg.ot.plan_steps = 2;
  cfg.seed = seed;
  return cfg;
}

Graph balanced_graph(int n, int classes, uint64_t seed) {
  return sbm_generate({n, classes, 0.8, 0.1, seed});
}

}  // namespace

TEST_CASE("init_condensed") {
  SUBCASE("balanced four-class graph splits the budget evenly") {
    Graph g = balanced_graph(40, 4, 1);
    auto [xp, yp] = init_condensed(g, 0.2, 7);  // 8 nodes
    REQUIRE(yp.size() == 8);
    std::vector<int> counts(4, 0);
    for (int y : yp) ++counts[y];
    for (int c = 0; c < 4; ++c) CHECK(counts[c] == 2);
    CHECK(xp.rows == 8);
    CHECK(xp.cols == g.feature_dim());
  }
  SUBCASE("ratio*n equal to the class count gives one node per class") {
    Graph g = balanced_graph(50, 5, 2);
    auto [xp, yp] = init_condensed(g, 0.1, 3);  // 5 nodes
    std::vector<int> counts(5, 0);
    for (int y : yp) ++counts[y];
    for (int c = 0; c < 5; ++c) CHECK(counts[c] == 1);
  }
  SUBCASE("class proportions stay within one node of the training shares") {
    Graph g = balanced_graph(60, 3, 3);
    auto [xp, yp] = init_condensed(g, 0.25, 4);  // 15 nodes
    std::vector<int> counts(3, 0);
    for (int y : yp) ++counts[y];
    for (int c = 0; c < 3; ++c) CHECK(std::abs(counts[c] - 5) <= 1);
  }
  SUBCASE("every feature row is copied from a training node of its class") {
    Graph g = balanced_graph(40, 4, 5);
    auto [xp, yp] = init_condensed(g, 0.3, 9);
    for (int i = 0; i < xp.rows; ++i) {
      bool found = false;
      for (int src = 0; src < g.n && !found; ++src) {
        if (!g.train_mask[src] || g.labels[src] != yp[i]) continue;
        bool same = true;
        for (int j = 0; j < xp.cols; ++j)
          if (xp.at(i, j) != g.features.at(src, j)) {
            same = false;
            break;
          }
        found = same;
      }
      CHECK(found);
    }
  }
  SUBCASE("too small a ratio is an input error") {
    Graph g = balanced_graph(50, 5, 6);
    CHECK_THROWS_AS(init_condensed(g, 0.04, 0), InputError);  // 2 nodes, 5 classes
  }
}

TEST_CASE("feature_loss") {
  SUBCASE("identical graphs and parameters give zero loss") {
    Graph g = balanced_graph(12, 2, 11);
    // Make everything training data so both sides see the same batch.
    std::vector<bool> train(g.n, true), off(g.n, false);
    Graph all = build_graph(
        g.n, [&] {
          std::vector<std::pair<int, int>> e;
          for (const Edge& ed : g.edges) e.emplace_back(ed.u, ed.v);
          return e;
        }(),
        g.features, g.labels, train, off, off, g.num_classes);

    Rng rng(12);
    GnnParams theta = GnnParams::init(Arch::Gcn, all.feature_dim(), 8, 2, rng);
    Tape t;
    Val a_prime = t.constant(all.adjacency_dense());
    Val xp = t.constant(all.features);
    for (int cls = 0; cls < 2; ++cls) {
      Val loss = feature_loss(t, theta, all, cls, a_prime, xp, all.labels);
      CHECK(t.scalar(loss) < 1e-18);
    }
  }
  SUBCASE("loss is nonnegative") {
    Graph g = balanced_graph(12, 2, 13);
    Rng rng(14);
    GnnParams theta = GnnParams::init(Arch::Gcn, g.feature_dim(), 8, 2, rng);
    auto [xp0, yp] = init_condensed(g, 0.4, 15);
    GenParams gen = GenParams::init(g.feature_dim(), 2, 8, 2, rng);
    CoordinateNoise noise = CoordinateNoise::init(xp0.rows, rng);
    Tape t;
    BoundGen gb = bind(t, gen, false);
    Val xp = t.constant(xp0);
    Val ap = gen_forward(t, gen, gb, noise, xp, yp);
    for (int cls = 0; cls < 2; ++cls)
      CHECK(t.scalar(feature_loss(t, theta, g, cls, ap, xp, yp)) >= 0.0);
  }
  SUBCASE("a class empty on the condensed side is skipped with a warning") {
    Graph g = balanced_graph(12, 2, 16);
    Rng rng(17);
    GnnParams theta = GnnParams::init(Arch::Gcn, g.feature_dim(), 8, 2, rng);
    Tape t;
    Val ap = t.constant(Tensor::zeros(3, 3));
    Val xp = t.constant(Tensor::ones(3, g.feature_dim()));
    std::vector<std::string> warnings;
    Val loss = feature_loss(t, theta, g, 1, ap, xp, {0, 0, 0}, &warnings);
    CHECK(t.scalar(loss) == 0.0);
    REQUIRE(warnings.size() == 1);
    CHECK(warnings[0].find("condensed") != std::string::npos);
  }
  SUBCASE("second-order gradient wrt X' passes finite differences") {
    Graph g = balanced_graph(12, 2, 18);
    Rng rng(19);
    GnnParams theta = GnnParams::init(Arch::Gcn, g.feature_dim(), 4, 2, rng);
    auto [xp0, yp] = init_condensed(g, 0.4, 20);
    // Fixed condensed structure so only the X' path is exercised.
    Tensor a0(xp0.rows, xp0.rows, 0.0);
    for (int i = 0; i < xp0.rows; ++i)
      for (int j = i + 1; j < xp0.rows; ++j)
        if (yp[i] == yp[j]) {
          a0.at(i, j) = 0.8;
          a0.at(j, i) = 0.8;
        }
    const double err = finite_diff_check(
        [&](Tape& t, Val xp) {
          Val ap = t.constant(a0);
          Val loss = t.constant_scalar(0.0);
          for (int cls = 0; cls < 2; ++cls)
            loss = add(loss, feature_loss(t, theta, g, cls, ap, xp, yp));
          return loss;
        },
        xp0, 1e-4);
    CHECK(err < 1e-3);
  }
}

TEST_CASE("total_loss composition") {
  Tape t;
  Val feat = t.constant_scalar(2.5);
  Val structure = t.constant_scalar(4.0);
  Val ap = t.constant(Tensor::from(2, 2, {0.0, 0.6, 0.6, 0.0}));

  SUBCASE("alpha = beta = 0 reduces to the feature loss exactly") {
    CHECK(t.scalar(total_loss(t, feat, Val{}, ap, 0.0, 0.0)) == 2.5);
  }
  SUBCASE("zero adjacency contributes no regularizer") {
    Val zero_a = t.constant(Tensor::zeros(2, 2));
    CHECK(t.scalar(total_loss(t, feat, structure, zero_a, 0.5, 3.0)) ==
          doctest::Approx(2.5 + 0.5 * 4.0));
  }
  SUBCASE("weighted sum with the frobenius norm") {
    const double frob = std::sqrt(2.0 * 0.36);
    CHECK(t.scalar(total_loss(t, feat, structure, ap, 0.1, 0.1)) ==
          doctest::Approx(2.5 + 0.4 + 0.1 * frob).epsilon(1e-12));
  }
  SUBCASE("defaults mirror the published settings") {
    CondenseConfig cfg;
    CHECK(cfg.alpha == 0.1);
    CHECK(cfg.beta == 0.1);
    CHECK(cfg.lr_structure == 0.001);
    CHECK(cfg.lr_feature == 0.0001);
    CHECK(cfg.hidden == 128);
  }
}

TEST_CASE("threshold_structure") {
  Tensor a = Tensor::from(2, 2, {0.0, 0.4, 0.4, 0.0});
  CHECK(max_abs(threshold_structure(a)) == 0.0);

  Tensor b = Tensor::from(2, 2, {0.0, 0.9, 0.9, 0.0});
  const Tensor tb = threshold_structure(b);
  CHECK(tb.at(0, 1) == 0.9);  // survivors keep their weights

  Rng rng(21);
  Tensor c(4, 4, 0.0);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) {
      const double w = rng.uniform();
      c.at(i, j) = w;
      c.at(j, i) = w;
    }
  const Tensor tc = threshold_structure(c);
  CHECK(max_abs_diff(tc, symmetrized(tc)) == 0.0);
  CHECK(threshold_structure(Tensor::from(1, 1, {0.5})).at(0, 0) == 0.0);  // strict >
}

TEST_CASE("condense runs are reproducible and well-formed") {
  Graph g = balanced_graph(30, 3, 23);
  CondenseConfig cfg = tiny_config(99);
  cfg.debug_checks = true;

  auto [s1, r1] = condense(g, cfg);
  auto [s2, r2] = condense(g, cfg);

  // Bit-identical outputs across reruns with the same config + seed.
  CHECK(s1.adjacency.data == s2.adjacency.data);
  CHECK(s1.features.data == s2.features.data);
  CHECK(s1.labels == s2.labels);
  CHECK(r1.total_trace == r2.total_trace);
  CHECK(r1.final_sc == r2.final_sc);

  // Report traces cover every epoch run; losses stay finite.
  CHECK(r1.epochs_run == cfg.restarts * cfg.epochs);
  CHECK(r1.feature_trace.size() == static_cast<size_t>(r1.epochs_run));
  CHECK(r1.structure_trace.size() == r1.feature_trace.size());
  CHECK(r1.regularizer_trace.size() == r1.feature_trace.size());
  CHECK(r1.total_trace.size() == r1.feature_trace.size());
  for (double v : r1.total_trace) CHECK(std::isfinite(v));
  CHECK_FALSE(r1.diverged);

  // Thresholded structure invariants: symmetric, zero diagonal, (0.5, 1].
  validate_condensed(s1);
  for (int i = 0; i < s1.n_prime; ++i)
    for (int j = 0; j < s1.n_prime; ++j) {
      const double w = s1.adjacency.at(i, j);
      if (w != 0.0) {
        CHECK(w > 0.5);
        CHECK(w <= 1.0);
      }
    }
}

TEST_CASE("pure gradient matching decreases the feature loss") {
  Graph g = balanced_graph(12, 2, 29);
  CondenseConfig cfg;
  cfg.ratio = 0.34;  // 4 nodes
  cfg.alpha = 0.0;
  cfg.beta = 0.0;
  cfg.hidden = 16;
  cfg.gen_hidden = 8;
  cfg.tau1 = 20;  // the first 20 epochs all update X'
  cfg.tau2 = 1;
  cfg.tau_theta = 1;
  cfg.restarts = 1;
  cfg.epochs = 20;
  cfg.lr_feature = 0.01;
  cfg.seed = 31;

  auto [s, report] = condense(g, cfg);
  REQUIRE(report.feature_trace.size() == 20);
  CHECK(report.feature_trace.back() < report.feature_trace.front());
}

TEST_CASE("divergence aborts with the last finite epoch reported") {
  Graph g = balanced_graph(20, 2, 37);
  CondenseConfig cfg = tiny_config(41);
  cfg.epochs = 30;
  cfg.lr_feature = 1e200;  // guaranteed blow-up through the gradient products
  cfg.tau1 = 30;           // keep updating X'

  auto [s, report] = condense(g, cfg);
  CHECK(report.diverged);
  CHECK(report.epochs_run >= 1);
  CHECK(report.epochs_run < 30);
  for (double v : report.total_trace) CHECK(std::isfinite(v));
  // The returned graph still satisfies the structural invariants.
  validate_condensed(s);
}

TEST_CASE("condense config validation") {
  CondenseConfig cfg;
  cfg.ratio = 1.5;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = CondenseConfig{};
  cfg.tau1 = 0;
  CHECK_THROWS_AS(cfg.validate(), InputError);
  cfg = CondenseConfig{};
  cfg.gen_layers = 1;
  CHECK_THROWS_AS(cfg.validate(), InputError);
}
