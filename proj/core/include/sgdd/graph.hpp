#pragma once

#include <cstdint>
#include <tuple>
#include <utility>
#include <vector>

#include "sgdd/tensor.hpp"

namespace sgdd {

// One undirected edge, stored once with u < v.
struct Edge {
  int u = 0;
  int v = 0;
  double w = 1.0;
};

// Node-classified undirected graph. Values are immutable after construction
// and safe to share across threads. Self-loops are never stored; GNN
// renormalization adds them on the fly.
struct Graph {
  int n = 0;
  int num_classes = 0;
  std::vector<Edge> edges;  // u < v, sorted lexicographically, deduplicated
  Tensor features;          // n x d
  std::vector<int> labels;  // in [0, num_classes)
  std::vector<bool> train_mask, val_mask, test_mask;

  int feature_dim() const { return features.cols; }
  std::vector<double> weighted_degrees() const;
  Tensor adjacency_dense() const;
  std::vector<int> nodes_of_class(int c, bool train_only) const;
};

// Condensed synthetic graph: dense symmetric adjacency with entries in [0,1].
struct CondensedGraph {
  int n_prime = 0;
  double ratio = 0.0;
  int num_classes = 0;
  Tensor adjacency;  // n' x n'
  Tensor features;   // n' x d
  std::vector<int> labels;
};

// Builds a graph from an edge list, symmetrizing and deduplicating. Throws
// InputError on out-of-range indices, self-loops, or labels outside
// [0, num_classes). Pass num_classes = -1 to infer it as max(label)+1.
Graph build_graph(int n, const std::vector<std::pair<int, int>>& edges, Tensor features,
                  std::vector<int> labels, std::vector<bool> train_mask,
                  std::vector<bool> val_mask, std::vector<bool> test_mask, int num_classes = -1);

// Weighted variant used by the loader; duplicate edges keep the first weight.
Graph build_graph_weighted(int n, const std::vector<std::tuple<int, int, double>>& edges,
                           Tensor features, std::vector<int> labels, std::vector<bool> train_mask,
                           std::vector<bool> val_mask, std::vector<bool> test_mask,
                           int num_classes = -1);

// I - D^{-1/2} A D^{-1/2}. Isolated nodes get a zero row/column in the
// normalized adjacency and 1 on the Laplacian diagonal, keeping the spectrum
// inside [0, 2].
Tensor normalized_laplacian(const Graph& g);
Tensor normalized_laplacian(const CondensedGraph& s);
Tensor normalized_laplacian_dense(const Tensor& adj);

// Combinatorial Laplacian D - A (used by the optimal-transport loss).
Tensor combinatorial_laplacian_dense(const Tensor& adj);

// Induced subgraph on k nodes drawn uniformly without replacement; the
// selected nodes keep their relative order, so k = n returns the same graph.
Graph sample_subgraph(const Graph& g, int k, uint64_t seed);

// Invariant checks; throw InputError with a description on violation.
void validate_graph(const Graph& g);
void validate_condensed(const CondensedGraph& s);

}  // namespace sgdd
