#pragma once

#include <string>
#include <vector>

#include "sgdd/graph.hpp"

namespace sgdd {

// Canonical on-disk format (extension .graph.json): a single JSON document
//   {n, num_classes, edges: [[i,j],...] or [[i,j,w],...], features: [[...]],
//    labels: [...], masks: {train, val, test}}
// Edges are stored once per undirected pair with i < j; floats carry 17
// significant digits, so save/load round-trips bit-for-bit. Condensed graphs
// add a "ratio" field and real-valued edge weights.

void save_graph(const Graph& g, const std::string& path);

// Accepts edges in either orientation and duplicated pairs; symmetrizes,
// deduplicates, and appends a note to `warnings` when it had to. Throws
// ParseError (malformed content) or IoError (unreadable file).
Graph load_graph(const std::string& path, std::vector<std::string>* warnings = nullptr);

void save_condensed(const CondensedGraph& s, const std::string& path);
CondensedGraph load_condensed(const std::string& path,
                              std::vector<std::string>* warnings = nullptr);

}  // namespace sgdd
