#include "sgdd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

#include "sgdd/errors.hpp"
#include "sgdd/rng.hpp"

namespace sgdd {

std::vector<double> Graph::weighted_degrees() const {
  std::vector<double> deg(n, 0.0);
  for (const Edge& e : edges) {
    deg[e.u] += e.w;
    deg[e.v] += e.w;
  }
  return deg;
}

Tensor Graph::adjacency_dense() const {
  Tensor a(n, n, 0.0);
  for (const Edge& e : edges) {
    a.at(e.u, e.v) = e.w;
    a.at(e.v, e.u) = e.w;
  }
  return a;
}

std::vector<int> Graph::nodes_of_class(int c, bool train_only) const {
  std::vector<int> out;
  for (int i = 0; i < n; ++i)
    if (labels[i] == c && (!train_only || train_mask[i])) out.push_back(i);
  return out;
}

namespace {

Graph finish_build(int n, std::vector<Edge> edges, Tensor features, std::vector<int> labels,
                   std::vector<bool> train_mask, std::vector<bool> val_mask,
                   std::vector<bool> test_mask, int num_classes) {
  if (n <= 0) throw InputError("build_graph: graph must have at least one node");
  if (features.rows != n)
    throw InputError("build_graph: features have " + std::to_string(features.rows) +
                     " rows for " + std::to_string(n) + " nodes");
  if (static_cast<int>(labels.size()) != n) throw InputError("build_graph: label count mismatch");
  for (auto* m : {&train_mask, &val_mask, &test_mask})
    if (static_cast<int>(m->size()) != n) throw InputError("build_graph: mask length mismatch");

  int c = num_classes;
  if (c < 0) {
    c = 0;
    for (int l : labels) c = std::max(c, l + 1);
  }
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c)
      throw InputError("build_graph: label " + std::to_string(labels[i]) + " at node " +
                       std::to_string(i) + " outside [0, " + std::to_string(c) + ")");
    if ((train_mask[i] && val_mask[i]) || (train_mask[i] && test_mask[i]) ||
        (val_mask[i] && test_mask[i]))
      throw InputError("build_graph: masks not disjoint at node " + std::to_string(i));
  }

  std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
    return std::tie(a.u, a.v) < std::tie(b.u, b.v);
  });
  std::vector<Edge> dedup;
  dedup.reserve(edges.size());
  for (const Edge& e : edges) {
    if (!dedup.empty() && dedup.back().u == e.u && dedup.back().v == e.v) continue;
    dedup.push_back(e);
  }

  Graph g;
  g.n = n;
  g.num_classes = c;
  g.edges = std::move(dedup);
  g.features = std::move(features);
  g.labels = std::move(labels);
  g.train_mask = std::move(train_mask);
  g.val_mask = std::move(val_mask);
  g.test_mask = std::move(test_mask);
  return g;
}

}  // namespace

Graph build_graph(int n, const std::vector<std::pair<int, int>>& edges, Tensor features,
                  std::vector<int> labels, std::vector<bool> train_mask,
                  std::vector<bool> val_mask, std::vector<bool> test_mask, int num_classes) {
  std::vector<std::tuple<int, int, double>> weighted;
  weighted.reserve(edges.size());
  for (auto [i, j] : edges) weighted.emplace_back(i, j, 1.0);
  return build_graph_weighted(n, weighted, std::move(features), std::move(labels),
                              std::move(train_mask), std::move(val_mask), std::move(test_mask),
                              num_classes);
}

Graph build_graph_weighted(int n, const std::vector<std::tuple<int, int, double>>& edges,
                           Tensor features, std::vector<int> labels, std::vector<bool> train_mask,
                           std::vector<bool> val_mask, std::vector<bool> test_mask,
                           int num_classes) {
  std::vector<Edge> norm;
  norm.reserve(edges.size());
  for (auto [i, j, w] : edges) {
    if (i < 0 || i >= n || j < 0 || j >= n)
      throw InputError("build_graph: edge (" + std::to_string(i) + ", " + std::to_string(j) +
                       ") out of range for " + std::to_string(n) + " nodes");
    if (i == j)
      throw InputError("build_graph: self-loop at node " + std::to_string(i) + " not allowed");
    if (!(w >= 0.0)) throw InputError("build_graph: negative edge weight");
    norm.push_back(Edge{std::min(i, j), std::max(i, j), w});
  }
  return finish_build(n, std::move(norm), std::move(features), std::move(labels),
                      std::move(train_mask), std::move(val_mask), std::move(test_mask),
                      num_classes);
}

Tensor normalized_laplacian_dense(const Tensor& adj) {
  if (adj.rows != adj.cols || adj.rows == 0)
    throw InputError("normalized_laplacian: bad adjacency shape " + adj.shape_str());
  const int n = adj.rows;
  std::vector<double> dinv_sqrt(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double d = 0.0;
    for (int j = 0; j < n; ++j) d += adj.at(i, j);
    dinv_sqrt[i] = d > 0.0 ? 1.0 / std::sqrt(d) : 0.0;  // isolated node: zero row/col
  }
  Tensor l(n, n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      l.at(i, j) = -dinv_sqrt[i] * adj.at(i, j) * dinv_sqrt[j];
    l.at(i, i) += 1.0;
  }
  return l;
}

Tensor normalized_laplacian(const Graph& g) {
  if (g.n == 0) throw InputError("normalized_laplacian: empty graph");
  return normalized_laplacian_dense(g.adjacency_dense());
}

Tensor normalized_laplacian(const CondensedGraph& s) {
  if (s.n_prime == 0) throw InputError("normalized_laplacian: empty condensed graph");
  return normalized_laplacian_dense(s.adjacency);
}

Tensor combinatorial_laplacian_dense(const Tensor& adj) {
  if (adj.rows != adj.cols || adj.rows == 0)
    throw InputError("combinatorial_laplacian: bad adjacency shape " + adj.shape_str());
  const int n = adj.rows;
  Tensor l(n, n, 0.0);
  for (int i = 0; i < n; ++i) {
    double d = 0.0;
    for (int j = 0; j < n; ++j) {
      d += adj.at(i, j);
      l.at(i, j) = -adj.at(i, j);
    }
    l.at(i, i) = d;
  }
  return l;
}

Graph sample_subgraph(const Graph& g, int k, uint64_t seed) {
  if (k < 1 || k > g.n)
    throw InputError("sample_subgraph: budget " + std::to_string(k) + " outside [1, " +
                     std::to_string(g.n) + "]");
  Rng rng = Rng(seed).child("subgraph");
  std::vector<int> keep = rng.sample_without_replacement(g.n, k);

  std::vector<int> remap(g.n, -1);
  for (int i = 0; i < k; ++i) remap[keep[i]] = i;

  Tensor feats(k, g.feature_dim());
  std::vector<int> labels(k);
  std::vector<bool> train(k), val(k), test(k);
  for (int i = 0; i < k; ++i) {
    const int src = keep[i];
    for (int j = 0; j < g.feature_dim(); ++j) feats.at(i, j) = g.features.at(src, j);
    labels[i] = g.labels[src];
    train[i] = g.train_mask[src];
    val[i] = g.val_mask[src];
    test[i] = g.test_mask[src];
  }

  std::vector<std::tuple<int, int, double>> edges;
  for (const Edge& e : g.edges)
    if (remap[e.u] >= 0 && remap[e.v] >= 0) edges.emplace_back(remap[e.u], remap[e.v], e.w);

  return build_graph_weighted(k, edges, std::move(feats), std::move(labels), std::move(train),
                              std::move(val), std::move(test), g.num_classes);
}

void validate_graph(const Graph& g) {
  if (g.n <= 0) throw InputError("graph: empty");
  if (g.features.rows != g.n) throw InputError("graph: feature rows != n");
  if (static_cast<int>(g.labels.size()) != g.n) throw InputError("graph: label count != n");
  for (const Edge& e : g.edges) {
    if (e.u < 0 || e.v >= g.n || e.u >= e.v) throw InputError("graph: malformed edge list");
    if (e.w < 0.0 || e.w > 1.0) throw InputError("graph: edge weight outside [0, 1]");
  }
  for (int i = 0; i < g.n; ++i)
    if (g.labels[i] < 0 || g.labels[i] >= g.num_classes)
      throw InputError("graph: label out of range at node " + std::to_string(i));
}

void validate_condensed(const CondensedGraph& s) {
  if (s.n_prime <= 0) throw InputError("condensed graph: empty");
  if (s.adjacency.rows != s.n_prime || s.adjacency.cols != s.n_prime)
    throw InputError("condensed graph: adjacency shape " + s.adjacency.shape_str());
  if (s.features.rows != s.n_prime) throw InputError("condensed graph: feature rows != n'");
  if (static_cast<int>(s.labels.size()) != s.n_prime)
    throw InputError("condensed graph: label count != n'");
  for (int i = 0; i < s.n_prime; ++i) {
    if (s.adjacency.at(i, i) != 0.0) throw InputError("condensed graph: nonzero diagonal");
    if (s.labels[i] < 0 || s.labels[i] >= s.num_classes)
      throw InputError("condensed graph: label out of range");
    for (int j = 0; j < s.n_prime; ++j) {
      const double w = s.adjacency.at(i, j);
      if (w < 0.0 || w > 1.0) throw InputError("condensed graph: weight outside [0, 1]");
      if (std::abs(w - s.adjacency.at(j, i)) > 1e-12)
        throw InputError("condensed graph: adjacency not symmetric");
    }
  }
}

}  // namespace sgdd
