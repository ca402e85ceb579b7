#include "sgdd/models.hpp"

#include <algorithm>
#include <cmath>

#include "jsonio.hpp"
#include "sgdd/errors.hpp"

namespace sgdd {

using ad::Tape;
using ad::Val;

Arch arch_from_string(const std::string& s) {
  if (s == "gcn") return Arch::Gcn;
  if (s == "sgc") return Arch::Sgc;
  if (s == "mlp") return Arch::Mlp;
  if (s == "cheby") return Arch::Cheby;
  throw InputError("unknown architecture tag '" + s + "' (expected gcn/sgc/mlp/cheby)");
}

std::string arch_name(Arch a) {
  switch (a) {
    case Arch::Gcn: return "gcn";
    case Arch::Sgc: return "sgc";
    case Arch::Mlp: return "mlp";
    case Arch::Cheby: return "cheby";
  }
  return "?";
}

const std::vector<Arch>& all_archs() {
  static const std::vector<Arch> archs{Arch::Gcn, Arch::Sgc, Arch::Mlp, Arch::Cheby};
  return archs;
}

namespace {

Tensor glorot(int fan_in, int fan_out, Rng& rng) {
  Tensor w(fan_in, fan_out);
  const double s = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& x : w.data) x = rng.uniform(-s, s);
  return w;
}

Val row_broadcast(Tape& t, Val bias, int rows) {
  return matmul(t.constant(Tensor::ones(rows, 1)), bias);
}

}  // namespace

GnnParams GnnParams::init(Arch arch, int in_dim, int hidden, int out_dim, Rng& rng) {
  if (in_dim < 1 || hidden < 1 || out_dim < 1)
    throw InputError("gnn init: dimensions must be positive");
  GnnParams p;
  p.arch = arch;
  p.in_dim = in_dim;
  p.hidden = hidden;
  p.out_dim = out_dim;
  switch (arch) {
    case Arch::Gcn:
    case Arch::Mlp:
      p.weights = {glorot(in_dim, hidden, rng), glorot(hidden, out_dim, rng)};
      p.biases = {Tensor(1, hidden), Tensor(1, out_dim)};
      break;
    case Arch::Sgc:
      p.weights = {glorot(in_dim, out_dim, rng)};
      p.biases = {Tensor(1, out_dim)};
      break;
    case Arch::Cheby:
      // Three polynomial terms per layer.
      for (int k = 0; k < 3; ++k) p.weights.push_back(glorot(in_dim, hidden, rng));
      for (int k = 0; k < 3; ++k) p.weights.push_back(glorot(hidden, out_dim, rng));
      p.biases = {Tensor(1, hidden), Tensor(1, out_dim)};
      break;
  }
  return p;
}

std::vector<Tensor*> GnnParams::trainable() {
  std::vector<Tensor*> out;
  for (auto& w : weights) out.push_back(&w);
  for (auto& b : biases) out.push_back(&b);
  return out;
}

std::vector<const Tensor*> GnnParams::trainable() const {
  std::vector<const Tensor*> out;
  for (auto& w : weights) out.push_back(&w);
  for (auto& b : biases) out.push_back(&b);
  return out;
}

BoundGnn bind(Tape& t, const GnnParams& p, bool requires_grad) {
  BoundGnn b;
  for (const auto& w : p.weights) b.weights.push_back(t.leaf(w, requires_grad));
  for (const auto& bi : p.biases) b.biases.push_back(t.leaf(bi, requires_grad));
  return b;
}

Tensor renormalized_adjacency(const Tensor& dense_adj) {
  if (dense_adj.rows != dense_adj.cols)
    throw InputError("renormalized_adjacency: adjacency not square: " + dense_adj.shape_str());
  const int n = dense_adj.rows;
  std::vector<double> dinv(n);
  for (int i = 0; i < n; ++i) {
    double d = 1.0;  // self loop
    for (int j = 0; j < n; ++j) d += dense_adj.at(i, j);
    dinv[i] = 1.0 / std::sqrt(d);
  }
  Tensor out(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) out.at(i, j) = dinv[i] * dense_adj.at(i, j) * dinv[j];
    out.at(i, i) += dinv[i] * dinv[i];
  }
  return out;
}

Tensor renormalized_adjacency(const Graph& g) { return renormalized_adjacency(g.adjacency_dense()); }

Val renormalized_adjacency(Tape& t, Val adj) {
  const int n = adj.rows();
  if (adj.rows() != adj.cols())
    throw InputError("renormalized_adjacency: adjacency not square");
  Val with_loops = add(adj, t.constant(Tensor::identity(n)));
  Val deg = matmul(with_loops, t.constant(Tensor::ones(n, 1)));  // >= 1 everywhere
  Val dinv_sqrt = div(t.constant(Tensor::ones(n, 1)), sqrt(deg));
  Val rows = mul(matmul(dinv_sqrt, t.constant(Tensor::ones(1, n))), with_loops);
  return mul(rows, matmul(t.constant(Tensor::ones(n, 1)), transpose(dinv_sqrt)));
}

Tensor cheby_operator(const Tensor& dense_adj) {
  Tensor lhat = normalized_laplacian_dense(dense_adj);
  for (int i = 0; i < lhat.rows; ++i) lhat.at(i, i) -= 1.0;
  return lhat;
}

Tensor propagation_matrix(Arch arch, const Tensor& dense_adj) {
  switch (arch) {
    case Arch::Gcn:
    case Arch::Sgc:
      return renormalized_adjacency(dense_adj);
    case Arch::Cheby:
      return cheby_operator(dense_adj);
    case Arch::Mlp:
      return Tensor::identity(dense_adj.rows);
  }
  throw InputError("propagation_matrix: bad architecture");
}

namespace {

Val cheby_layer(Tape& t, Val prop, Val h, Val w0, Val w1, Val w2, Val bias) {
  Val t1 = matmul(prop, h);
  Val t2 = sub(scale(matmul(prop, t1), 2.0), h);
  Val out = add(add(matmul(h, w0), matmul(t1, w1)), matmul(t2, w2));
  return add(out, row_broadcast(t, bias, h.rows()));
}

}  // namespace

Val gnn_forward(Tape& t, Arch arch, const BoundGnn& p, Val prop, Val x) {
  const int n = x.rows();
  switch (arch) {
    case Arch::Gcn: {
      Val h = relu(add(matmul(prop, matmul(x, p.weights[0])), row_broadcast(t, p.biases[0], n)));
      return add(matmul(prop, matmul(h, p.weights[1])), row_broadcast(t, p.biases[1], n));
    }
    case Arch::Sgc: {
      Val h = matmul(x, p.weights[0]);
      for (int k = 0; k < 2; ++k) h = matmul(prop, h);
      return add(h, row_broadcast(t, p.biases[0], n));
    }
    case Arch::Mlp: {
      Val h = relu(add(matmul(x, p.weights[0]), row_broadcast(t, p.biases[0], n)));
      return add(matmul(h, p.weights[1]), row_broadcast(t, p.biases[1], n));
    }
    case Arch::Cheby: {
      Val h = relu(cheby_layer(t, prop, x, p.weights[0], p.weights[1], p.weights[2], p.biases[0]));
      return cheby_layer(t, prop, h, p.weights[3], p.weights[4], p.weights[5], p.biases[1]);
    }
  }
  throw InputError("gnn_forward: bad architecture");
}

Tensor gnn_logits(const GnnParams& p, const Tensor& prop, const Tensor& x) {
  Tape t;
  BoundGnn b = bind(t, p, /*requires_grad=*/false);
  Val logits = gnn_forward(t, p.arch, b, t.constant(prop), t.constant(x));
  return t.value(logits);
}

Val cross_entropy(Tape& t, Val logits, const std::vector<int>& labels,
                  const std::vector<bool>& mask) {
  const int n = logits.rows();
  const int c = logits.cols();
  if (static_cast<int>(labels.size()) != n || static_cast<int>(mask.size()) != n)
    throw InputError("cross_entropy: labels/mask length mismatch with logits rows");
  int count = 0;
  for (bool m : mask) count += m ? 1 : 0;
  if (count == 0) throw InputError("cross_entropy: mask selects no node");

  const Tensor lv = t.value(logits);
  Tensor row_max(n, 1);
  Tensor onehot(n, c, 0.0);
  Tensor weight(n, 1, 0.0);
  for (int i = 0; i < n; ++i) {
    if (labels[i] < 0 || labels[i] >= c)
      throw InputError("cross_entropy: label out of range at node " + std::to_string(i));
    double m = lv.at(i, 0);
    for (int j = 1; j < c; ++j) m = std::max(m, lv.at(i, j));
    row_max.at(i, 0) = m;
    onehot.at(i, labels[i]) = 1.0;
    if (mask[i]) weight.at(i, 0) = 1.0 / static_cast<double>(count);
  }

  // Row-max subtraction with the max treated as a constant keeps gradients
  // exact while preventing exp overflow.
  Val shifted = sub(logits, matmul(t.constant(row_max), t.constant(Tensor::ones(1, c))));
  Val row_sum = matmul(exp(shifted), t.constant(Tensor::ones(c, 1)));
  Val lse = log(row_sum);
  Val picked = matmul(mul(shifted, t.constant(onehot)), t.constant(Tensor::ones(c, 1)));
  return sum(mul(sub(lse, picked), t.constant(weight)));
}

// ---------------------------------------------------------------------------
// Structure generator

CoordinateNoise CoordinateNoise::init(int n_prime, Rng& rng) {
  if (n_prime < 1) throw InputError("coordinate noise: need at least one node");
  CoordinateNoise z;
  z.coords.resize(n_prime);
  for (double& v : z.coords) v = rng.uniform();
  return z;
}

GenParams GenParams::init(int feat_dim, int num_classes, int hidden, int layers, Rng& rng) {
  if (layers < 2) throw InputError("gen init: need at least 2 layers");
  if (feat_dim < 1 || num_classes < 1 || hidden < 1)
    throw InputError("gen init: dimensions must be positive");
  GenParams p;
  p.feat_dim = feat_dim;
  p.num_classes = num_classes;
  p.hidden = hidden;
  p.layers = layers;

  p.freq = Tensor(2, kGenFreqDims);
  for (double& f : p.freq.data) f = rng.normal();

  const int pe_dim = 2 * kGenFreqDims;
  const int cond_in = 2 * (feat_dim + num_classes);
  int in_dim = pe_dim;
  for (int k = 0; k < layers - 1; ++k) {
    Tensor w(in_dim, hidden);
    if (k == 0) {
      // SIREN first-layer init, scaled by omega_0.
      const double s = 1.0 / in_dim;
      for (double& x : w.data) x = rng.uniform(-s, s) * kSirenOmega0;
    } else {
      const double s = std::sqrt(6.0 / in_dim);
      for (double& x : w.data) x = rng.uniform(-s, s);
    }
    p.siren_w.push_back(std::move(w));
    p.siren_b.push_back(Tensor(1, hidden));
    p.cond_w.push_back(glorot(cond_in, hidden, rng));
    p.cond_b.push_back(Tensor(1, hidden));
    in_dim = 2 * hidden;  // conditional branch concatenated with the sine branch
  }
  {
    Tensor w(in_dim, 1);
    const double s = std::sqrt(6.0 / in_dim);
    for (double& x : w.data) x = rng.uniform(-s, s);
    p.siren_w.push_back(std::move(w));
    p.siren_b.push_back(Tensor(1, 1));
  }
  return p;
}

std::vector<Tensor*> GenParams::trainable() {
  std::vector<Tensor*> out;
  for (auto& w : siren_w) out.push_back(&w);
  for (auto& b : siren_b) out.push_back(&b);
  for (auto& w : cond_w) out.push_back(&w);
  for (auto& b : cond_b) out.push_back(&b);
  return out;
}

std::vector<const Tensor*> GenParams::trainable() const {
  std::vector<const Tensor*> out;
  for (auto& w : siren_w) out.push_back(&w);
  for (auto& b : siren_b) out.push_back(&b);
  for (auto& w : cond_w) out.push_back(&w);
  for (auto& b : cond_b) out.push_back(&b);
  return out;
}

BoundGen bind(Tape& t, const GenParams& p, bool requires_grad) {
  BoundGen b;
  for (const auto& w : p.siren_w) b.siren_w.push_back(t.leaf(w, requires_grad));
  for (const auto& bi : p.siren_b) b.siren_b.push_back(t.leaf(bi, requires_grad));
  for (const auto& w : p.cond_w) b.cond_w.push_back(t.leaf(w, requires_grad));
  for (const auto& bi : p.cond_b) b.cond_b.push_back(t.leaf(bi, requires_grad));
  return b;
}

Val gen_forward(Tape& t, const GenParams& p, const BoundGen& b, const CoordinateNoise& noise,
                Val xp, const std::vector<int>& yp) {
  const int np = static_cast<int>(noise.coords.size());
  if (xp.rows() != np || static_cast<int>(yp.size()) != np)
    throw InputError("gen_forward: coordinate/feature/label count mismatch");
  if (xp.cols() != p.feat_dim)
    throw InputError("gen_forward: feature dim " + std::to_string(xp.cols()) + ", generator built for " +
                     std::to_string(p.feat_dim));
  const int pairs = np * np;
  constexpr double two_pi = 6.283185307179586476925286766559;

  // Positional encoding of the coordinate pair grid (constant).
  Tensor pe(pairs, 2 * kGenFreqDims);
  // Endpoint selectors and one-hot labels (constant).
  Tensor sel_i(pairs, np, 0.0), sel_j(pairs, np, 0.0);
  Tensor oh_i(pairs, p.num_classes, 0.0), oh_j(pairs, p.num_classes, 0.0);
  for (int i = 0; i < np; ++i) {
    for (int j = 0; j < np; ++j) {
      const int row = i * np + j;
      for (int f = 0; f < kGenFreqDims; ++f) {
        const double ang =
            two_pi * (p.freq.at(0, f) * noise.coords[i] + p.freq.at(1, f) * noise.coords[j]);
        pe.at(row, f) = std::sin(ang);
        pe.at(row, kGenFreqDims + f) = std::cos(ang);
      }
      sel_i.at(row, i) = 1.0;
      sel_j.at(row, j) = 1.0;
      if (yp[i] < 0 || yp[i] >= p.num_classes || yp[j] < 0 || yp[j] >= p.num_classes)
        throw InputError("gen_forward: label out of range");
      oh_i.at(row, yp[i]) = 1.0;
      oh_j.at(row, yp[j]) = 1.0;
    }
  }

  Val cond = concat_cols(concat_cols(matmul(t.constant(sel_i), xp), t.constant(oh_i)),
                         concat_cols(matmul(t.constant(sel_j), xp), t.constant(oh_j)));

  Val h = t.constant(pe);
  for (int k = 0; k < p.layers - 1; ++k) {
    Val s = sin(add(matmul(h, b.siren_w[k]), row_broadcast(t, b.siren_b[k], pairs)));
    Val m = relu(add(matmul(cond, b.cond_w[k]), row_broadcast(t, b.cond_b[k], pairs)));
    h = concat_cols(m, s);
  }
  Val raw = sigmoid(
      add(matmul(h, b.siren_w[p.layers - 1]), row_broadcast(t, b.siren_b[p.layers - 1], pairs)));

  Val a = ad::symmetrize(reshape(raw, np, np));
  Tensor offdiag = Tensor::ones(np, np);
  for (int i = 0; i < np; ++i) offdiag.at(i, i) = 0.0;
  return mul(a, t.constant(offdiag));
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, const Tensor*>>& tensors) {
  std::string out = "{\n  \"tensors\": {";
  bool first = true;
  for (const auto& [name, t] : tensors) {
    if (!first) out += ",";
    first = false;
    out += "\n    \"" + name + "\": {\"rows\": " + std::to_string(t->rows) +
           ", \"cols\": " + std::to_string(t->cols) + ", \"data\": [";
    for (size_t i = 0; i < t->data.size(); ++i) {
      if (i) out += ", ";
      out += io::fmt_double(t->data[i]);
    }
    out += "]}";
  }
  out += "\n  }\n}\n";
  io::write_file(path, out);
}

std::map<std::string, Tensor> load_tensors(const std::string& path) {
  const nlohmann::json doc = io::parse_json_file(path);
  if (!doc.is_object() || !doc.contains("tensors") || !doc["tensors"].is_object())
    throw ParseError(path + ": missing 'tensors' object");
  std::map<std::string, Tensor> out;
  for (const auto& [name, entry] : doc["tensors"].items()) {
    try {
      Tensor t(entry.at("rows").get<int>(), entry.at("cols").get<int>());
      const auto& data = entry.at("data");
      if (!data.is_array() || data.size() != t.data.size())
        throw ParseError(path + ": tensor '" + name + "': data size mismatch");
      for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = data[i].get<double>();
      out.emplace(name, std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ": tensor '" + name + "': " + e.what());
    }
  }
  return out;
}

namespace {

Tensor take(std::map<std::string, Tensor>& m, const std::string& name, const std::string& path) {
  auto it = m.find(name);
  if (it == m.end()) throw ParseError(path + ": missing tensor '" + name + "'");
  Tensor t = std::move(it->second);
  m.erase(it);
  return t;
}

}  // namespace

void save_gnn(const GnnParams& p, const std::string& path) {
  Tensor meta = Tensor::row_vector({static_cast<double>(static_cast<int>(p.arch)),
                                    static_cast<double>(p.in_dim), static_cast<double>(p.hidden),
                                    static_cast<double>(p.out_dim), static_cast<double>(p.hops)});
  std::vector<std::pair<std::string, const Tensor*>> entries{{"meta", &meta}};
  for (size_t i = 0; i < p.weights.size(); ++i)
    entries.emplace_back("w" + std::to_string(i), &p.weights[i]);
  for (size_t i = 0; i < p.biases.size(); ++i)
    entries.emplace_back("b" + std::to_string(i), &p.biases[i]);
  save_tensors(path, entries);
}

GnnParams load_gnn(const std::string& path) {
  auto m = load_tensors(path);
  Tensor meta = take(m, "meta", path);
  if (meta.data.size() != 5) throw ParseError(path + ": bad gnn meta tensor");
  GnnParams p;
  p.arch = static_cast<Arch>(static_cast<int>(meta.data[0]));
  p.in_dim = static_cast<int>(meta.data[1]);
  p.hidden = static_cast<int>(meta.data[2]);
  p.out_dim = static_cast<int>(meta.data[3]);
  p.hops = static_cast<int>(meta.data[4]);
  for (size_t i = 0; m.count("w" + std::to_string(i)); ++i)
    p.weights.push_back(take(m, "w" + std::to_string(i), path));
  for (size_t i = 0; m.count("b" + std::to_string(i)); ++i)
    p.biases.push_back(take(m, "b" + std::to_string(i), path));
  if (p.weights.empty()) throw ParseError(path + ": checkpoint has no weights");
  return p;
}

void save_gen(const GenParams& p, const std::string& path) {
  Tensor meta = Tensor::row_vector({static_cast<double>(p.feat_dim),
                                    static_cast<double>(p.num_classes),
                                    static_cast<double>(p.hidden), static_cast<double>(p.layers)});
  std::vector<std::pair<std::string, const Tensor*>> entries{{"meta", &meta}, {"freq", &p.freq}};
  for (size_t i = 0; i < p.siren_w.size(); ++i)
    entries.emplace_back("siren_w" + std::to_string(i), &p.siren_w[i]);
  for (size_t i = 0; i < p.siren_b.size(); ++i)
    entries.emplace_back("siren_b" + std::to_string(i), &p.siren_b[i]);
  for (size_t i = 0; i < p.cond_w.size(); ++i)
    entries.emplace_back("cond_w" + std::to_string(i), &p.cond_w[i]);
  for (size_t i = 0; i < p.cond_b.size(); ++i)
    entries.emplace_back("cond_b" + std::to_string(i), &p.cond_b[i]);
  save_tensors(path, entries);
}

GenParams load_gen(const std::string& path) {
  auto m = load_tensors(path);
  Tensor meta = take(m, "meta", path);
  if (meta.data.size() != 4) throw ParseError(path + ": bad gen meta tensor");
  GenParams p;
  p.feat_dim = static_cast<int>(meta.data[0]);
  p.num_classes = static_cast<int>(meta.data[1]);
  p.hidden = static_cast<int>(meta.data[2]);
  p.layers = static_cast<int>(meta.data[3]);
  p.freq = take(m, "freq", path);
  for (size_t i = 0; m.count("siren_w" + std::to_string(i)); ++i)
    p.siren_w.push_back(take(m, "siren_w" + std::to_string(i), path));
  for (size_t i = 0; m.count("siren_b" + std::to_string(i)); ++i)
    p.siren_b.push_back(take(m, "siren_b" + std::to_string(i), path));
  for (size_t i = 0; m.count("cond_w" + std::to_string(i)); ++i)
    p.cond_w.push_back(take(m, "cond_w" + std::to_string(i), path));
  for (size_t i = 0; m.count("cond_b" + std::to_string(i)); ++i)
    p.cond_b.push_back(take(m, "cond_b" + std::to_string(i), path));
  if (p.siren_w.empty()) throw ParseError(path + ": checkpoint has no generator weights");
  return p;
}

}  // namespace sgdd
