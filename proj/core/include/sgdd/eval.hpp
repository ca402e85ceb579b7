#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sgdd/condenser.hpp"
#include "sgdd/graph.hpp"
#include "sgdd/models.hpp"

namespace sgdd {

struct EvalSettings {
  int epochs = 1000;
  double lr = 0.001;
  int seeds = 10;
  int jobs = 1;    // worker threads across (arch, seed) runs
  int hidden = 128;
};

struct EvalResult {
  Arch arch = Arch::Gcn;
  std::vector<double> per_seed;             // test accuracies, one per seed
  std::vector<double> per_seed_wallclock_s; // measured training time per seed
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation over seeds
  int epochs = 0;
  double lr = 0.0;
};

struct CrossArchTable {
  std::string condense_arch;
  std::vector<EvalResult> cells;  // one per test architecture
  double avg = 0.0;               // mean of the cell means
  double stddev = 0.0;            // sample std of the cell means
};

// Trains `arch` on the condensed graph (full batch, cross-entropy over all
// condensed nodes) and reports accuracy on the original graph's test mask,
// repeated per seed. Fitting never touches the original graph; it enters
// only at inference time. Deterministic per (arch, seed).
EvalResult train_eval(Arch arch, const CondensedGraph& s, const Graph& g, const EvalSettings& es,
                      uint64_t seed);

CrossArchTable cross_architecture(const CondensedGraph& s, const Graph& g,
                                  const std::vector<Arch>& test_archs, const EvalSettings& es,
                                  uint64_t seed);

// Coreset baselines. Selection is per class against the training pool
// (extended with the remaining class nodes when the budget exceeds it);
// structure is the induced subgraph.
CondensedGraph baseline_random(const Graph& g, double ratio, uint64_t seed);
// Greedy mean matching: each pick minimizes the distance between the running
// selected mean and the class feature mean.
CondensedGraph baseline_herding(const Graph& g, double ratio);
// Greedy farthest-point traversal seeded at the node farthest from the class
// mean. Fully deterministic; the seed parameter is kept for interface parity.
CondensedGraph baseline_kcenter(const Graph& g, double ratio, uint64_t seed);

// Gradient matching with the structure weight forced to zero, then
// A' = cos(X'_i, X'_j) with negatives clamped, zero diagonal, and the usual
// 0.5 threshold.
std::pair<CondensedGraph, CondenseReport> baseline_feature_similarity(const Graph& g,
                                                                      const CondenseConfig& cfg);

// ---------------------------------------------------------------------------
// Metrics CSV: one row per (method, condense_arch, test_arch, seed) run.

struct MetricsRow {
  std::string method;
  std::string condense_arch;
  std::string test_arch;
  double ratio = 0.0;
  uint64_t seed = 0;
  double accuracy = 0.0;
  double sc = 0.0;
  double wallclock_s = 0.0;
};

std::string metrics_csv_header();
std::string format_metrics_row(const MetricsRow& row);
// Creates the file with a header when missing, then appends.
void append_metrics_csv(const std::string& path, const std::vector<MetricsRow>& rows);

}  // namespace sgdd
