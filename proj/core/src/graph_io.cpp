#include "sgdd/graph_io.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "jsonio.hpp"
#include "sgdd/errors.hpp"

namespace sgdd {

namespace {

void emit_edges(std::ostringstream& out, const std::vector<Edge>& edges) {
  bool all_unit = true;
  for (const Edge& e : edges)
    if (e.w != 1.0) {
      all_unit = false;
      break;
    }
  out << "  \"edges\": [";
  for (size_t i = 0; i < edges.size(); ++i) {
    if (i) out << ",";
    out << "\n    [" << edges[i].u << ", " << edges[i].v;
    if (!all_unit) out << ", " << io::fmt_double(edges[i].w);
    out << "]";
  }
  out << (edges.empty() ? "]" : "\n  ]");
}

void emit_matrix(std::ostringstream& out, const Tensor& m) {
  out << "[";
  for (int i = 0; i < m.rows; ++i) {
    if (i) out << ",";
    out << "\n    [";
    for (int j = 0; j < m.cols; ++j) {
      if (j) out << ", ";
      out << io::fmt_double(m.at(i, j));
    }
    out << "]";
  }
  out << (m.rows == 0 ? "]" : "\n  ]");
}

void emit_bool_vec(std::ostringstream& out, const std::vector<bool>& v) {
  out << "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out << ", ";
    out << (v[i] ? "true" : "false");
  }
  out << "]";
}

void emit_int_vec(std::ostringstream& out, const std::vector<int>& v) {
  out << "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out << ", ";
    out << v[i];
  }
  out << "]";
}

std::string render(int n, int num_classes, const std::vector<Edge>& edges, const Tensor& feats,
                   const std::vector<int>& labels, const std::vector<bool>& train,
                   const std::vector<bool>& val, const std::vector<bool>& test,
                   const double* ratio) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"n\": " << n << ",\n";
  out << "  \"num_classes\": " << num_classes << ",\n";
  if (ratio) out << "  \"ratio\": " << io::fmt_double(*ratio) << ",\n";
  emit_edges(out, edges);
  out << ",\n  \"features\": ";
  emit_matrix(out, feats);
  out << ",\n  \"labels\": ";
  emit_int_vec(out, labels);
  out << ",\n  \"masks\": {\n    \"train\": ";
  emit_bool_vec(out, train);
  out << ",\n    \"val\": ";
  emit_bool_vec(out, val);
  out << ",\n    \"test\": ";
  emit_bool_vec(out, test);
  out << "\n  }\n}\n";
  return out.str();
}

const nlohmann::json& field(const nlohmann::json& doc, const char* key, const std::string& origin) {
  auto it = doc.find(key);
  if (it == doc.end()) throw ParseError(origin + ": missing field '" + std::string(key) + "'");
  return *it;
}

struct ParsedDoc {
  int n = 0;
  int num_classes = 0;
  double ratio = -1.0;  // < 0 when absent
  std::vector<std::tuple<int, int, double>> edges;
  Tensor features;
  std::vector<int> labels;
  std::vector<bool> train, val, test;
};

ParsedDoc parse_doc(const std::string& path, std::vector<std::string>* warnings) {
  const nlohmann::json doc = io::parse_json_file(path);
  if (!doc.is_object()) throw ParseError(path + ": top-level value must be an object");

  ParsedDoc p;
  try {
    p.n = field(doc, "n", path).get<int>();
    p.num_classes = field(doc, "num_classes", path).get<int>();
    if (doc.contains("ratio")) p.ratio = doc["ratio"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": field 'n'/'num_classes'/'ratio': " + e.what());
  }
  if (p.n <= 0) throw ParseError(path + ": field 'n': must be positive");

  const auto& edges = field(doc, "edges", path);
  if (!edges.is_array()) throw ParseError(path + ": field 'edges': expected an array");
  bool needed_fixup = false;
  for (size_t k = 0; k < edges.size(); ++k) {
    const auto& e = edges[k];
    if (!e.is_array() || (e.size() != 2 && e.size() != 3))
      throw ParseError(path + ": field 'edges[" + std::to_string(k) +
                       "]': expected [i, j] or [i, j, w]");
    int i, j;
    double w = 1.0;
    try {
      i = e[0].get<int>();
      j = e[1].get<int>();
      if (e.size() == 3) w = e[2].get<double>();
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(path + ": field 'edges[" + std::to_string(k) + "]': " + ex.what());
    }
    if (i > j) needed_fixup = true;
    p.edges.emplace_back(i, j, w);
  }
  // Detect duplicates after normalization so we can warn about them.
  {
    std::vector<std::pair<int, int>> canon;
    canon.reserve(p.edges.size());
    for (auto& [i, j, w] : p.edges) canon.emplace_back(std::min(i, j), std::max(i, j));
    std::sort(canon.begin(), canon.end());
    if (std::adjacent_find(canon.begin(), canon.end()) != canon.end()) needed_fixup = true;
  }
  if (needed_fixup && warnings)
    warnings->push_back(path + ": edge list was not in canonical i<j form; symmetrized");

  const auto& feats = field(doc, "features", path);
  if (!feats.is_array() || static_cast<int>(feats.size()) != p.n)
    throw ParseError(path + ": field 'features': expected " + std::to_string(p.n) + " rows");
  const int d = feats.empty() ? 0 : static_cast<int>(feats[0].size());
  p.features = Tensor(p.n, d);
  for (int i = 0; i < p.n; ++i) {
    const auto& row = feats[i];
    if (!row.is_array() || static_cast<int>(row.size()) != d)
      throw ParseError(path + ": field 'features[" + std::to_string(i) + "]': expected " +
                       std::to_string(d) + " values");
    for (int j = 0; j < d; ++j) {
      try {
        p.features.at(i, j) = row[j].get<double>();
      } catch (const nlohmann::json::exception& ex) {
        throw ParseError(path + ": field 'features[" + std::to_string(i) + "][" +
                         std::to_string(j) + "]': " + ex.what());
      }
    }
  }

  const auto& labels = field(doc, "labels", path);
  if (!labels.is_array() || static_cast<int>(labels.size()) != p.n)
    throw ParseError(path + ": field 'labels': expected " + std::to_string(p.n) + " entries");
  for (size_t i = 0; i < labels.size(); ++i) {
    try {
      p.labels.push_back(labels[i].get<int>());
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError(path + ": field 'labels[" + std::to_string(i) + "]': " + ex.what());
    }
  }

  const auto& masks = field(doc, "masks", path);
  auto read_mask = [&](const char* name) {
    const auto& m = field(masks, name, path + ": field 'masks'");
    if (!m.is_array() || static_cast<int>(m.size()) != p.n)
      throw ParseError(path + ": field 'masks." + std::string(name) + "': expected " +
                       std::to_string(p.n) + " booleans");
    std::vector<bool> out(p.n);
    for (int i = 0; i < p.n; ++i) {
      if (!m[i].is_boolean())
        throw ParseError(path + ": field 'masks." + std::string(name) + "[" + std::to_string(i) +
                         "]': expected a boolean");
      out[i] = m[i].get<bool>();
    }
    return out;
  };
  p.train = read_mask("train");
  p.val = read_mask("val");
  p.test = read_mask("test");
  return p;
}

}  // namespace

void save_graph(const Graph& g, const std::string& path) {
  io::write_file(path, render(g.n, g.num_classes, g.edges, g.features, g.labels, g.train_mask,
                              g.val_mask, g.test_mask, nullptr));
}

Graph load_graph(const std::string& path, std::vector<std::string>* warnings) {
  ParsedDoc p = parse_doc(path, warnings);
  try {
    return build_graph_weighted(p.n, p.edges, std::move(p.features), std::move(p.labels),
                                std::move(p.train), std::move(p.val), std::move(p.test),
                                p.num_classes);
  } catch (const InputError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

void save_condensed(const CondensedGraph& s, const std::string& path) {
  std::vector<Edge> edges;
  for (int i = 0; i < s.n_prime; ++i)
    for (int j = i + 1; j < s.n_prime; ++j)
      if (s.adjacency.at(i, j) != 0.0) edges.push_back(Edge{i, j, s.adjacency.at(i, j)});
  // A condensed graph is all training data: train mask true everywhere.
  std::vector<bool> train(s.n_prime, true), off(s.n_prime, false);
  io::write_file(path, render(s.n_prime, s.num_classes, edges, s.features, s.labels, train, off,
                              off, &s.ratio));
}

CondensedGraph load_condensed(const std::string& path, std::vector<std::string>* warnings) {
  ParsedDoc p = parse_doc(path, warnings);
  if (p.ratio < 0.0) throw ParseError(path + ": missing field 'ratio' (not a condensed graph?)");
  CondensedGraph s;
  s.n_prime = p.n;
  s.num_classes = p.num_classes;
  s.ratio = p.ratio;
  s.features = std::move(p.features);
  s.labels = std::move(p.labels);
  s.adjacency = Tensor(p.n, p.n, 0.0);
  for (auto& [i, j, w] : p.edges) {
    if (i < 0 || j < 0 || i >= p.n || j >= p.n || i == j)
      throw ParseError(path + ": field 'edges': bad pair (" + std::to_string(i) + ", " +
                       std::to_string(j) + ")");
    s.adjacency.at(i, j) = w;
    s.adjacency.at(j, i) = w;
  }
  try {
    validate_condensed(s);
  } catch (const InputError& e) {
    throw ParseError(path + ": " + e.what());
  }
  return s;
}

}  // namespace sgdd
