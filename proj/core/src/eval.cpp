#include "sgdd/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

#include "jsonio.hpp"
#include "sgdd/adam.hpp"
#include "sgdd/errors.hpp"
#include "sgdd/rng.hpp"
#include "sgdd/spectral.hpp"

namespace sgdd {

using ad::GradMap;
using ad::Tape;
using ad::Val;

namespace {

double accuracy_on_test(const GnnParams& p, const Graph& g, const Tensor& g_prop) {
  const Tensor logits = gnn_logits(p, g_prop, g.features);
  int total = 0, correct = 0;
  for (int i = 0; i < g.n; ++i) {
    if (!g.test_mask[i]) continue;
    ++total;
    int best = 0;
    for (int c = 1; c < logits.cols; ++c)
      if (logits.at(i, c) > logits.at(i, best)) best = c;
    if (best == g.labels[i]) ++correct;
  }
  if (total == 0) throw InputError("train_eval: test mask selects no node");
  return static_cast<double>(correct) / total;
}

// One (arch, seed) evaluation. Fitting sees only the condensed graph.
double run_single(Arch arch, const CondensedGraph& s, const Graph& g, const Tensor& s_prop,
                  const Tensor& g_prop, const EvalSettings& es, uint64_t root_seed,
                  int seed_index) {
  Rng rng = Rng(root_seed).child("eval:" + arch_name(arch), static_cast<uint64_t>(seed_index));
  GnnParams p = GnnParams::init(arch, s.features.cols, es.hidden, s.num_classes, rng);
  std::vector<Tensor*> params = p.trainable();
  AdamState state = AdamState::init(params);
  AdamConfig ac;
  ac.lr = es.lr;

  const std::vector<bool> all_nodes(s.n_prime, true);
  for (int e = 0; e < es.epochs; ++e) {
    Tape t;
    BoundGnn b = bind(t, p, true);
    Val logits = gnn_forward(t, arch, b, t.constant(s_prop), t.constant(s.features));
    GradMap gm = t.backward(cross_entropy(t, logits, s.labels, all_nodes));
    std::vector<Tensor> grads;
    for (Val w : b.weights) grads.push_back(t.grad_tensor(gm, w));
    for (Val bi : b.biases) grads.push_back(t.grad_tensor(gm, bi));
    adam_step(params, grads, state, ac);
  }
  return accuracy_on_test(p, g, g_prop);
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

}  // namespace

EvalResult train_eval(Arch arch, const CondensedGraph& s, const Graph& g, const EvalSettings& es,
                      uint64_t seed) {
  CrossArchTable table = cross_architecture(s, g, {arch}, es, seed);
  return table.cells.at(0);
}

CrossArchTable cross_architecture(const CondensedGraph& s, const Graph& g,
                                  const std::vector<Arch>& test_archs, const EvalSettings& es,
                                  uint64_t seed) {
  if (test_archs.empty()) throw InputError("cross_architecture: no architectures given");
  if (es.seeds < 1 || es.epochs < 0 || es.jobs < 1)
    throw InputError("cross_architecture: bad evaluation settings");
  validate_condensed(s);

  // Propagation operators are shared across seeds; compute them once.
  std::vector<Tensor> s_props, g_props;
  const Tensor g_adj = g.adjacency_dense();
  for (Arch a : test_archs) {
    s_props.push_back(propagation_matrix(a, s.adjacency));
    g_props.push_back(propagation_matrix(a, g_adj));
  }

  const int n_tasks = static_cast<int>(test_archs.size()) * es.seeds;
  std::vector<double> acc(n_tasks, 0.0);
  std::vector<double> wall(n_tasks, 0.0);
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;

  auto worker = [&]() {
    for (;;) {
      const int task = next.fetch_add(1);
      if (task >= n_tasks) return;
      const int ai = task / es.seeds;
      const int si = task % es.seeds;
      try {
        const auto t0 = std::chrono::steady_clock::now();
        acc[task] =
            run_single(test_archs[ai], s, g, s_props[ai], g_props[ai], es, seed, si);
        wall[task] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const int jobs = std::min(es.jobs, n_tasks);
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  CrossArchTable table;
  table.condense_arch = "";
  std::vector<double> cell_means;
  for (size_t ai = 0; ai < test_archs.size(); ++ai) {
    EvalResult r;
    r.arch = test_archs[ai];
    r.epochs = es.epochs;
    r.lr = es.lr;
    for (int si = 0; si < es.seeds; ++si) {
      r.per_seed.push_back(acc[ai * es.seeds + si]);
      r.per_seed_wallclock_s.push_back(wall[ai * es.seeds + si]);
    }
    r.mean = mean_of(r.per_seed);
    r.stddev = sample_std(r.per_seed);
    cell_means.push_back(r.mean);
    table.cells.push_back(std::move(r));
  }
  table.avg = mean_of(cell_means);
  table.stddev = sample_std(cell_means);
  return table;
}

// ---------------------------------------------------------------------------
// Coreset baselines

namespace {

// Per-class budgets, capped at the class size with leftovers redistributed.
std::vector<int> capped_allocation(const Graph& g, int n_prime) {
  std::vector<int> alloc = class_allocation(g, n_prime);
  std::vector<int> size(g.num_classes, 0);
  for (int i = 0; i < g.n; ++i) ++size[g.labels[i]];

  int leftover = 0;
  for (int c = 0; c < g.num_classes; ++c)
    if (alloc[c] > size[c]) {
      leftover += alloc[c] - size[c];
      alloc[c] = size[c];
    }
  while (leftover > 0) {
    bool placed = false;
    for (int c = 0; c < g.num_classes && leftover > 0; ++c)
      if (alloc[c] < size[c]) {
        ++alloc[c];
        --leftover;
        placed = true;
      }
    if (!placed) break;  // graph smaller than the budget
  }
  return alloc;
}

// Training pool first; the rest of the class only if the budget needs it.
std::vector<int> class_pool(const Graph& g, int cls, int budget) {
  std::vector<int> pool = g.nodes_of_class(cls, /*train_only=*/true);
  if (static_cast<int>(pool.size()) < budget) {
    for (int i = 0; i < g.n; ++i)
      if (g.labels[i] == cls && !g.train_mask[i]) pool.push_back(i);
    std::sort(pool.begin(), pool.end());
  }
  return pool;
}

CondensedGraph induced_condensed(const Graph& g, std::vector<int> selected, double ratio) {
  std::sort(selected.begin(), selected.end());
  const int np = static_cast<int>(selected.size());
  std::vector<int> remap(g.n, -1);
  for (int i = 0; i < np; ++i) remap[selected[i]] = i;

  CondensedGraph s;
  s.n_prime = np;
  s.ratio = ratio;
  s.num_classes = g.num_classes;
  s.features = Tensor(np, g.feature_dim());
  s.labels.resize(np);
  s.adjacency = Tensor(np, np, 0.0);
  for (int i = 0; i < np; ++i) {
    const int src = selected[i];
    for (int j = 0; j < g.feature_dim(); ++j) s.features.at(i, j) = g.features.at(src, j);
    s.labels[i] = g.labels[src];
  }
  for (const Edge& e : g.edges)
    if (remap[e.u] >= 0 && remap[e.v] >= 0) {
      s.adjacency.at(remap[e.u], remap[e.v]) = e.w;
      s.adjacency.at(remap[e.v], remap[e.u]) = e.w;
    }
  return s;
}

std::vector<double> class_feature_mean(const Graph& g, const std::vector<int>& pool) {
  std::vector<double> mean(g.feature_dim(), 0.0);
  for (int idx : pool)
    for (int j = 0; j < g.feature_dim(); ++j) mean[j] += g.features.at(idx, j);
  for (double& m : mean) m /= static_cast<double>(pool.size());
  return mean;
}

double sq_dist_to(const Graph& g, int node, const std::vector<double>& point) {
  double d = 0.0;
  for (int j = 0; j < g.feature_dim(); ++j) {
    const double diff = g.features.at(node, j) - point[j];
    d += diff * diff;
  }
  return d;
}

double sq_dist_nodes(const Graph& g, int a, int b) {
  double d = 0.0;
  for (int j = 0; j < g.feature_dim(); ++j) {
    const double diff = g.features.at(a, j) - g.features.at(b, j);
    d += diff * diff;
  }
  return d;
}

int target_size(const Graph& g, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw InputError("baseline: ratio must be in (0, 1]");
  const int np = static_cast<int>(std::llround(ratio * g.n));
  if (np < 1) throw InputError("baseline: ratio yields an empty graph");
  return np;
}

}  // namespace

CondensedGraph baseline_random(const Graph& g, double ratio, uint64_t seed) {
  const int np = target_size(g, ratio);
  const std::vector<int> alloc = capped_allocation(g, np);
  Rng rng = Rng(seed).child("baseline:random");

  std::vector<int> selected;
  for (int cls = 0; cls < g.num_classes; ++cls) {
    if (alloc[cls] == 0) continue;
    std::vector<int> pool = class_pool(g, cls, alloc[cls]);
    for (int s : rng.sample_without_replacement(static_cast<int>(pool.size()), alloc[cls]))
      selected.push_back(pool[s]);
  }
  return induced_condensed(g, std::move(selected), ratio);
}

CondensedGraph baseline_herding(const Graph& g, double ratio) {
  const int np = target_size(g, ratio);
  const std::vector<int> alloc = capped_allocation(g, np);

  std::vector<int> selected;
  for (int cls = 0; cls < g.num_classes; ++cls) {
    if (alloc[cls] == 0) continue;
    std::vector<int> pool = class_pool(g, cls, alloc[cls]);
    const std::vector<double> mean = class_feature_mean(g, pool);

    std::vector<bool> used(pool.size(), false);
    std::vector<double> running(g.feature_dim(), 0.0);
    for (int pick = 1; pick <= alloc[cls]; ++pick) {
      int best = -1;
      double best_d = 0.0;
      for (size_t i = 0; i < pool.size(); ++i) {
        if (used[i]) continue;
        double d = 0.0;
        for (int j = 0; j < g.feature_dim(); ++j) {
          const double cand = (running[j] + g.features.at(pool[i], j)) / pick;
          const double diff = mean[j] - cand;
          d += diff * diff;
        }
        if (best < 0 || d < best_d) {
          best = static_cast<int>(i);
          best_d = d;
        }
      }
      used[best] = true;
      selected.push_back(pool[best]);
      for (int j = 0; j < g.feature_dim(); ++j) running[j] += g.features.at(pool[best], j);
    }
  }
  return induced_condensed(g, std::move(selected), ratio);
}

CondensedGraph baseline_kcenter(const Graph& g, double ratio, uint64_t /*seed*/) {
  const int np = target_size(g, ratio);
  const std::vector<int> alloc = capped_allocation(g, np);

  std::vector<int> selected;
  for (int cls = 0; cls < g.num_classes; ++cls) {
    if (alloc[cls] == 0) continue;
    std::vector<int> pool = class_pool(g, cls, alloc[cls]);
    const std::vector<double> mean = class_feature_mean(g, pool);

    std::vector<bool> used(pool.size(), false);
    std::vector<double> min_dist(pool.size(), 0.0);
    // First pick: farthest from the class mean.
    int first = 0;
    for (size_t i = 1; i < pool.size(); ++i)
      if (sq_dist_to(g, pool[i], mean) > sq_dist_to(g, pool[first], mean))
        first = static_cast<int>(i);
    used[first] = true;
    selected.push_back(pool[first]);
    for (size_t i = 0; i < pool.size(); ++i) min_dist[i] = sq_dist_nodes(g, pool[i], pool[first]);

    for (int pick = 1; pick < alloc[cls]; ++pick) {
      int best = -1;
      for (size_t i = 0; i < pool.size(); ++i) {
        if (used[i]) continue;
        if (best < 0 || min_dist[i] > min_dist[best]) best = static_cast<int>(i);
      }
      used[best] = true;
      selected.push_back(pool[best]);
      for (size_t i = 0; i < pool.size(); ++i)
        min_dist[i] = std::min(min_dist[i], sq_dist_nodes(g, pool[i], pool[best]));
    }
  }
  return induced_condensed(g, std::move(selected), ratio);
}

std::pair<CondensedGraph, CondenseReport> baseline_feature_similarity(const Graph& g,
                                                                      const CondenseConfig& cfg) {
  CondenseConfig no_structure = cfg;
  no_structure.alpha = 0.0;
  auto [learned, report] = condense(g, no_structure);

  const int np = learned.n_prime;
  std::vector<double> norm(np, 0.0);
  for (int i = 0; i < np; ++i) {
    double s = 0.0;
    for (int j = 0; j < learned.features.cols; ++j)
      s += learned.features.at(i, j) * learned.features.at(i, j);
    norm[i] = std::sqrt(s);
  }
  Tensor cosine(np, np, 0.0);
  for (int i = 0; i < np; ++i) {
    for (int j = i + 1; j < np; ++j) {
      double dot = 0.0;
      for (int k = 0; k < learned.features.cols; ++k)
        dot += learned.features.at(i, k) * learned.features.at(j, k);
      double c = (norm[i] > 0.0 && norm[j] > 0.0) ? dot / (norm[i] * norm[j]) : 0.0;
      c = std::clamp(c, 0.0, 1.0);  // negative similarity carries no edge
      cosine.at(i, j) = c;
      cosine.at(j, i) = c;
    }
  }
  learned.adjacency = threshold_structure(cosine);
  validate_condensed(learned);
  report.final_sc = shift_coefficient(g, learned, g.features, learned.features).sc;
  return {std::move(learned), std::move(report)};
}

// ---------------------------------------------------------------------------
// Metrics CSV

std::string metrics_csv_header() {
  return "method,condense_arch,test_arch,ratio,seed,accuracy,sc,wallclock_s";
}

std::string format_metrics_row(const MetricsRow& row) {
  char wall[32];
  std::snprintf(wall, sizeof(wall), "%.3f", row.wallclock_s);
  return row.method + "," + row.condense_arch + "," + row.test_arch + "," +
         io::fmt_double(row.ratio) + "," + std::to_string(row.seed) + "," +
         io::fmt_double(row.accuracy) + "," + io::fmt_double(row.sc) + "," + wall;
}

void append_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot open metrics csv for append: " + path);
  if (fresh) out << metrics_csv_header() << "\n";
  for (const MetricsRow& row : rows) out << format_metrics_row(row) << "\n";
  out.flush();
  if (!out) throw IoError("write failure: " + path);
}

}  // namespace sgdd
