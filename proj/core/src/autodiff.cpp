#include "sgdd/autodiff.hpp"

#include <cmath>
#include <string>

#include "sgdd/errors.hpp"
#include "sgdd/linalg.hpp"

namespace sgdd::ad {

namespace {

std::string shape_str(int r, int c) { return std::to_string(r) + "x" + std::to_string(c); }

void require(bool cond, const std::string& msg) {
  if (!cond) throw InputError(msg);
}

Tape& same_tape(Val a, Val b, const char* op) {
  require(a.valid() && b.valid(), std::string(op) + ": invalid operand");
  require(a.tape == b.tape, std::string(op) + ": operands live on different tapes");
  return *a.tape;
}

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

int Val::rows() const { return tape->node(id).rows; }
int Val::cols() const { return tape->node(id).cols; }

int Tape::push(Node&& n) {
  // OR of the inputs; leaves carry their own flag.
  if (n.op != Op::Leaf && n.op != Op::Const) {
    bool rg = false;
    if (n.a >= 0) rg = rg || nodes_[n.a].requires_grad;
    if (n.b >= 0) rg = rg || nodes_[n.b].requires_grad;
    n.requires_grad = rg;
  }
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

Val Tape::leaf(const Tensor& t, bool requires_grad) {
  Node n;
  n.op = Op::Leaf;
  n.rows = t.rows;
  n.cols = t.cols;
  n.value = t.data;
  n.requires_grad = requires_grad;
  return {this, push(std::move(n))};
}

Val Tape::constant(const Tensor& t) {
  Node n;
  n.op = Op::Const;
  n.rows = t.rows;
  n.cols = t.cols;
  n.value = t.data;
  return {this, push(std::move(n))};
}

Val Tape::constant_scalar(double v) {
  Tensor t(1, 1, v);
  return constant(t);
}

Tensor Tape::value(Val v) const {
  const Node& n = nodes_[v.id];
  Tensor t(n.rows, n.cols);
  t.data = n.value;
  return t;
}

double Tape::scalar(Val v) const {
  const Node& n = nodes_[v.id];
  require(n.rows == 1 && n.cols == 1, "scalar: node is " + shape_str(n.rows, n.cols));
  return n.value[0];
}

Tensor Tape::grad_tensor(const GradMap& gm, Val v) const {
  const Node& n = nodes_[v.id];
  Tensor t(n.rows, n.cols, 0.0);
  if (gm.has(v)) t.data = nodes_[gm.ids[v.id]].value;
  return t;
}

Val Tape::grad_val(const GradMap& gm, Val v) {
  if (gm.has(v)) return {this, gm.ids[v.id]};
  return constant(Tensor(nodes_[v.id].rows, nodes_[v.id].cols, 0.0));
}

// ---------------------------------------------------------------------------
// Forward ops

namespace {

Val make_elementwise_binary(Tape::Op op, Val a, Val b, const char* name) {
  Tape& t = same_tape(a, b, name);
  const auto& na = t.node(a.id);
  const auto& nb = t.node(b.id);
  require(na.rows == nb.rows && na.cols == nb.cols,
          std::string(name) + ": shape mismatch " + shape_str(na.rows, na.cols) + " vs " +
              shape_str(nb.rows, nb.cols));
  Tape::Node n;
  n.op = op;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.b = b.id;
  n.value.resize(na.value.size());
  switch (op) {
    case Tape::Op::Add:
      for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] + nb.value[i];
      break;
    case Tape::Op::Sub:
      for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] - nb.value[i];
      break;
    case Tape::Op::Mul:
      for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] * nb.value[i];
      break;
    case Tape::Op::Div:
      for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] / nb.value[i];
      break;
    default:
      throw InputError("make_elementwise_binary: bad op");
  }
  return {&t, t.push(std::move(n))};
}

Val make_elementwise_unary(Tape::Op op, Val a, const char* name) {
  require(a.valid(), std::string(name) + ": invalid operand");
  Tape& t = *a.tape;
  const auto& na = t.node(a.id);
  Tape::Node n;
  n.op = op;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.value.resize(na.value.size());
  switch (op) {
    case Tape::Op::Neg:
      for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = -na.value[i];
      break;
    case Tape::Op::Exp:
      for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::exp(na.value[i]);
      break;
    case Tape::Op::Log:
      for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::log(na.value[i]);
      break;
    case Tape::Op::Sin:
      for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::sin(na.value[i]);
      break;
    case Tape::Op::Cos:
      for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::cos(na.value[i]);
      break;
    case Tape::Op::Sigmoid:
      for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = stable_sigmoid(na.value[i]);
      break;
    case Tape::Op::Relu:
      for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = na.value[i] > 0.0 ? na.value[i] : 0.0;
      break;
    case Tape::Op::Sqrt:
      for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::sqrt(na.value[i]);
      break;
    default:
      throw InputError("make_elementwise_unary: bad op");
  }
  return {&t, t.push(std::move(n))};
}

// Eigendecomposition of the symmetrized input; shared by the PSD matrix
// functions. Eigenvalues below -1e-6 are a contract violation.
void psd_eigen(const Tape::Node& na, const char* name, std::vector<double>& vals,
               std::vector<double>& vecs) {
  const int n = na.rows;
  linalg::jacobi_eigen(n, na.value, vals, vecs);
  for (double& l : vals) {
    if (l < -1e-6)
      throw NumericalError(std::string(name) + ": matrix not PSD (eigenvalue " +
                           std::to_string(l) + ")");
    if (l < 0.0) l = 0.0;
  }
}

}  // namespace

Val add(Val a, Val b) { return make_elementwise_binary(Tape::Op::Add, a, b, "add"); }
Val sub(Val a, Val b) { return make_elementwise_binary(Tape::Op::Sub, a, b, "sub"); }
Val mul(Val a, Val b) { return make_elementwise_binary(Tape::Op::Mul, a, b, "mul"); }
Val div(Val a, Val b) { return make_elementwise_binary(Tape::Op::Div, a, b, "div"); }
Val neg(Val a) { return make_elementwise_unary(Tape::Op::Neg, a, "neg"); }
Val exp(Val a) { return make_elementwise_unary(Tape::Op::Exp, a, "exp"); }
Val log(Val a) { return make_elementwise_unary(Tape::Op::Log, a, "log"); }
Val sin(Val a) { return make_elementwise_unary(Tape::Op::Sin, a, "sin"); }
Val cos(Val a) { return make_elementwise_unary(Tape::Op::Cos, a, "cos"); }
Val sigmoid(Val a) { return make_elementwise_unary(Tape::Op::Sigmoid, a, "sigmoid"); }
Val relu(Val a) { return make_elementwise_unary(Tape::Op::Relu, a, "relu"); }
Val sqrt(Val a) { return make_elementwise_unary(Tape::Op::Sqrt, a, "sqrt"); }

Val matmul(Val a, Val b) {
  Tape& t = same_tape(a, b, "matmul");
  const auto& na = t.node(a.id);
  const auto& nb = t.node(b.id);
  require(na.cols == nb.rows, "matmul: incompatible shapes " + shape_str(na.rows, na.cols) +
                                  " vs " + shape_str(nb.rows, nb.cols));
  Tape::Node n;
  n.op = Tape::Op::MatMul;
  n.rows = na.rows;
  n.cols = nb.cols;
  n.a = a.id;
  n.b = b.id;
  n.value.resize(static_cast<size_t>(na.rows) * nb.cols);
  linalg::matmul(na.value.data(), na.rows, na.cols, nb.value.data(), nb.cols, n.value.data());
  return {&t, t.push(std::move(n))};
}

Val transpose(Val a) {
  require(a.valid(), "transpose: invalid operand");
  Tape& t = *a.tape;
  const auto& na = t.node(a.id);
  Tape::Node n;
  n.op = Tape::Op::Transpose;
  n.rows = na.cols;
  n.cols = na.rows;
  n.a = a.id;
  n.value.resize(na.value.size());
  for (int i = 0; i < na.rows; ++i)
    for (int j = 0; j < na.cols; ++j)
      n.value[static_cast<size_t>(j) * na.rows + i] = na.value[static_cast<size_t>(i) * na.cols + j];
  return {&t, t.push(std::move(n))};
}

Val concat_cols(Val a, Val b) {
  Tape& t = same_tape(a, b, "concat_cols");
  const auto& na = t.node(a.id);
  const auto& nb = t.node(b.id);
  require(na.rows == nb.rows, "concat_cols: row mismatch " + shape_str(na.rows, na.cols) + " vs " +
                                  shape_str(nb.rows, nb.cols));
  Tape::Node n;
  n.op = Tape::Op::ConcatCols;
  n.rows = na.rows;
  n.cols = na.cols + nb.cols;
  n.a = a.id;
  n.b = b.id;
  n.value.resize(static_cast<size_t>(n.rows) * n.cols);
  for (int i = 0; i < n.rows; ++i) {
    for (int j = 0; j < na.cols; ++j)
      n.value[static_cast<size_t>(i) * n.cols + j] = na.value[static_cast<size_t>(i) * na.cols + j];
    for (int j = 0; j < nb.cols; ++j)
      n.value[static_cast<size_t>(i) * n.cols + na.cols + j] =
          nb.value[static_cast<size_t>(i) * nb.cols + j];
  }
  return {&t, t.push(std::move(n))};
}

Val slice_rows(Val a, int r0, int r1) {
  require(a.valid(), "slice_rows: invalid operand");
  Tape& t = *a.tape;
  const auto& na = t.node(a.id);
  require(0 <= r0 && r0 < r1 && r1 <= na.rows, "slice_rows: bad range");
  Tape::Node n;
  n.op = Tape::Op::SliceRows;
  n.rows = r1 - r0;
  n.cols = na.cols;
  n.a = a.id;
  n.i0 = r0;
  n.i1 = r1;
  n.value.assign(na.value.begin() + static_cast<size_t>(r0) * na.cols,
                 na.value.begin() + static_cast<size_t>(r1) * na.cols);
  return {&t, t.push(std::move(n))};
}

Val slice_cols(Val a, int c0, int c1) {
  require(a.valid(), "slice_cols: invalid operand");
  Tape& t = *a.tape;
  const auto& na = t.node(a.id);
  require(0 <= c0 && c0 < c1 && c1 <= na.cols, "slice_cols: bad range");
  Tape::Node n;
  n.op = Tape::Op::SliceCols;
  n.rows = na.rows;
  n.cols = c1 - c0;
  n.a = a.id;
  n.i0 = c0;
  n.i1 = c1;
  n.value.resize(static_cast<size_t>(n.rows) * n.cols);
  for (int i = 0; i < na.rows; ++i)
    for (int j = c0; j < c1; ++j)
      n.value[static_cast<size_t>(i) * n.cols + (j - c0)] =
          na.value[static_cast<size_t>(i) * na.cols + j];
  return {&t, t.push(std::move(n))};
}

Val pad_rows(Val a, int total_rows, int offset) {
  require(a.valid(), "pad_rows: invalid operand");
  Tape& t = *a.tape;
  const auto& na = t.node(a.id);
  require(offset >= 0 && offset + na.rows <= total_rows, "pad_rows: bad layout");
  Tape::Node n;
  n.op = Tape::Op::PadRows;
  n.rows = total_rows;
  n.cols = na.cols;
  n.a = a.id;
  n.i0 = offset;
  n.value.assign(static_cast<size_t>(total_rows) * na.cols, 0.0);
  std::copy(na.value.begin(), na.value.end(),
            n.value.begin() + static_cast<size_t>(offset) * na.cols);
  return {&t, t.push(std::move(n))};
}

Val pad_cols(Val a, int total_cols, int offset) {
  require(a.valid(), "pad_cols: invalid operand");
  Tape& t = *a.tape;
  const auto& na = t.node(a.id);
  require(offset >= 0 && offset + na.cols <= total_cols, "pad_cols: bad layout");
  Tape::Node n;
  n.op = Tape::Op::PadCols;
  n.rows = na.rows;
  n.cols = total_cols;
  n.a = a.id;
  n.i0 = offset;
  n.value.assign(static_cast<size_t>(na.rows) * total_cols, 0.0);
  for (int i = 0; i < na.rows; ++i)
    for (int j = 0; j < na.cols; ++j)
      n.value[static_cast<size_t>(i) * total_cols + offset + j] =
          na.value[static_cast<size_t>(i) * na.cols + j];
  return {&t, t.push(std::move(n))};
}

Val reshape(Val a, int rows, int cols) {
  require(a.valid(), "reshape: invalid operand");
  Tape& t = *a.tape;
  const auto& na = t.node(a.id);
  require(static_cast<size_t>(rows) * cols == na.value.size(),
          "reshape: size mismatch " + shape_str(na.rows, na.cols) + " -> " + shape_str(rows, cols));
  Tape::Node n;
  n.op = Tape::Op::Reshape;
  n.rows = rows;
  n.cols = cols;
  n.a = a.id;
  n.value = na.value;  // row-major layout is identical
  return {&t, t.push(std::move(n))};
}

Val sum(Val a) {
  require(a.valid(), "sum: invalid operand");
  Tape& t = *a.tape;
  const auto& na = t.node(a.id);
  double s = 0.0;
  for (double x : na.value) s += x;
  Tape::Node n;
  n.op = Tape::Op::Sum;
  n.rows = 1;
  n.cols = 1;
  n.a = a.id;
  n.value = {s};
  return {&t, t.push(std::move(n))};
}

Val mean(Val a) {
  require(a.valid(), "mean: invalid operand");
  Tape& t = *a.tape;
  const auto& na = t.node(a.id);
  require(!na.value.empty(), "mean: empty tensor");
  double s = 0.0;
  for (double x : na.value) s += x;
  Tape::Node n;
  n.op = Tape::Op::Mean;
  n.rows = 1;
  n.cols = 1;
  n.a = a.id;
  n.value = {s / static_cast<double>(na.value.size())};
  return {&t, t.push(std::move(n))};
}

Val scale(Val a, double c) {
  require(a.valid(), "scale: invalid operand");
  Tape& t = *a.tape;
  const auto& na = t.node(a.id);
  Tape::Node n;
  n.op = Tape::Op::Scale;
  n.rows = na.rows;
  n.cols = na.cols;
  n.a = a.id;
  n.c = c;
  n.value.resize(na.value.size());
  for (size_t i = 0; i < n.value.size(); ++i) n.value[i] = c * na.value[i];
  return {&t, t.push(std::move(n))};
}

Val broadcast_scalar(Val a, int rows, int cols) {
  require(a.valid(), "broadcast_scalar: invalid operand");
  Tape& t = *a.tape;
  const auto& na = t.node(a.id);
  require(na.rows == 1 && na.cols == 1,
          "broadcast_scalar: input must be 1x1, got " + shape_str(na.rows, na.cols));
  Tape::Node n;
  n.op = Tape::Op::Broadcast;
  n.rows = rows;
  n.cols = cols;
  n.a = a.id;
  n.value.assign(static_cast<size_t>(rows) * cols, na.value[0]);
  return {&t, t.push(std::move(n))};
}

Val reg_inverse(Val m, double gamma) {
  require(m.valid(), "reg_inverse: invalid operand");
  Tape& t = *m.tape;
  const auto& nm = t.node(m.id);
  require(nm.rows == nm.cols, "reg_inverse: matrix not square: " + shape_str(nm.rows, nm.cols));
  const int n = nm.rows;
  std::vector<double> k(static_cast<size_t>(n) * n);
  const double shift = gamma / static_cast<double>(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      k[static_cast<size_t>(i) * n + j] =
          0.5 * (nm.value[static_cast<size_t>(i) * n + j] + nm.value[static_cast<size_t>(j) * n + i]) +
          shift;
  Tape::Node node;
  node.op = Tape::Op::RegInverse;
  node.rows = n;
  node.cols = n;
  node.a = m.id;
  node.c = gamma;
  node.value = linalg::spd_inverse(n, k);
  return {&t, t.push(std::move(node))};
}

Val sqrtm_psd(Val m) {
  require(m.valid(), "sqrtm_psd: invalid operand");
  Tape& t = *m.tape;
  const auto& nm = t.node(m.id);
  require(nm.rows == nm.cols, "sqrtm_psd: matrix not square: " + shape_str(nm.rows, nm.cols));
  const int n = nm.rows;
  std::vector<double> vals, vecs;
  psd_eigen(nm, "sqrtm_psd", vals, vecs);

  // U diag(sqrt(lambda)) U^T
  std::vector<double> scaled(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      scaled[static_cast<size_t>(i) * n + j] = vecs[static_cast<size_t>(i) * n + j] * std::sqrt(vals[j]);
  Tape::Node node;
  node.op = Tape::Op::SqrtmPsd;
  node.rows = n;
  node.cols = n;
  node.a = m.id;
  node.value.resize(static_cast<size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double s = 0.0;
      for (int l = 0; l < n; ++l)
        s += scaled[static_cast<size_t>(i) * n + l] * vecs[static_cast<size_t>(j) * n + l];
      node.value[static_cast<size_t>(i) * n + j] = s;
    }
  node.aux = vecs;
  node.aux.insert(node.aux.end(), vals.begin(), vals.end());
  return {&t, t.push(std::move(node))};
}

Val trace_sqrtm(Val m) {
  require(m.valid(), "trace_sqrtm: invalid operand");
  Tape& t = *m.tape;
  const auto& nm = t.node(m.id);
  require(nm.rows == nm.cols, "trace_sqrtm: matrix not square: " + shape_str(nm.rows, nm.cols));
  std::vector<double> vals, vecs;
  psd_eigen(nm, "trace_sqrtm", vals, vecs);
  double s = 0.0;
  for (double l : vals) s += std::sqrt(l);
  Tape::Node node;
  node.op = Tape::Op::TraceSqrtm;
  node.rows = 1;
  node.cols = 1;
  node.a = m.id;
  node.value = {s};
  node.aux = vecs;
  node.aux.insert(node.aux.end(), vals.begin(), vals.end());
  return {&t, t.push(std::move(node))};
}

Val square(Val a) { return mul(a, a); }
Val sum_sq(Val a) { return sum(mul(a, a)); }

Val trace(Val a) {
  require(a.valid(), "trace: invalid operand");
  Tape& t = *a.tape;
  const auto& na = t.node(a.id);
  require(na.rows == na.cols, "trace: matrix not square: " + shape_str(na.rows, na.cols));
  return sum(mul(a, t.constant(Tensor::identity(na.rows))));
}

Val frobenius_norm(Val a) { return sqrt(sum_sq(a)); }

Val symmetrize(Val a) { return scale(add(a, transpose(a)), 0.5); }

// ---------------------------------------------------------------------------
// Backward

GradMap Tape::backward(Val loss) {
  require(loss.valid() && loss.tape == this, "backward: loss not on this tape");
  const Node& ln = nodes_[loss.id];
  require(ln.rows == 1 && ln.cols == 1,
          "backward: loss must be scalar, got " + shape_str(ln.rows, ln.cols));

  const int n0 = static_cast<int>(nodes_.size());
  std::vector<int> g(n0, -1);
  if (nodes_[loss.id].requires_grad) {
    g[loss.id] = constant_scalar(1.0).id;
    for (int i = loss.id; i >= 0; --i) {
      if (g[i] < 0) continue;
      if (!nodes_[i].requires_grad) continue;
      emit_backward(i, g);
    }
  }
  GradMap gm;
  gm.ids = std::move(g);
  return gm;
}

void Tape::accumulate(std::vector<int>& grads, int target, Val contrib) {
  if (target < 0 || !nodes_[target].requires_grad) return;
  if (grads[target] < 0) {
    grads[target] = contrib.id;
  } else {
    grads[target] = add(Val{this, grads[target]}, contrib).id;
  }
}

void Tape::emit_backward(int id, std::vector<int>& grads) {
  // Copy the fields we need: pushes below may reallocate nodes_.
  const Op op = nodes_[id].op;
  const int a = nodes_[id].a;
  const int b = nodes_[id].b;
  const double c = nodes_[id].c;
  const int i0 = nodes_[id].i0;

  Val self{this, id};
  Val gv{this, grads[id]};
  Val av{this, a};
  Val bv{this, b};

  switch (op) {
    case Op::Leaf:
    case Op::Const:
      break;
    case Op::Add:
      accumulate(grads, a, gv);
      accumulate(grads, b, gv);
      break;
    case Op::Sub:
      accumulate(grads, a, gv);
      if (b >= 0 && nodes_[b].requires_grad) accumulate(grads, b, neg(gv));
      break;
    case Op::Neg:
      accumulate(grads, a, neg(gv));
      break;
    case Op::Mul:
      if (nodes_[a].requires_grad) accumulate(grads, a, mul(gv, bv));
      if (nodes_[b].requires_grad) accumulate(grads, b, mul(gv, av));
      break;
    case Op::Div:
      // y = a/b: da += g/b, db += -g*y/b
      if (nodes_[a].requires_grad) accumulate(grads, a, div(gv, bv));
      if (nodes_[b].requires_grad) accumulate(grads, b, neg(mul(gv, div(self, bv))));
      break;
    case Op::MatMul:
      if (nodes_[a].requires_grad) accumulate(grads, a, matmul(gv, transpose(bv)));
      if (nodes_[b].requires_grad) accumulate(grads, b, matmul(transpose(av), gv));
      break;
    case Op::Transpose:
      accumulate(grads, a, transpose(gv));
      break;
    case Op::ConcatCols: {
      const int ca = nodes_[a].cols;
      const int cb = nodes_[b].cols;
      if (nodes_[a].requires_grad) accumulate(grads, a, slice_cols(gv, 0, ca));
      if (nodes_[b].requires_grad) accumulate(grads, b, slice_cols(gv, ca, ca + cb));
      break;
    }
    case Op::SliceRows:
      accumulate(grads, a, pad_rows(gv, nodes_[a].rows, i0));
      break;
    case Op::SliceCols:
      accumulate(grads, a, pad_cols(gv, nodes_[a].cols, i0));
      break;
    case Op::PadRows:
      accumulate(grads, a, slice_rows(gv, i0, i0 + nodes_[a].rows));
      break;
    case Op::PadCols:
      accumulate(grads, a, slice_cols(gv, i0, i0 + nodes_[a].cols));
      break;
    case Op::Reshape:
      accumulate(grads, a, reshape(gv, nodes_[a].rows, nodes_[a].cols));
      break;
    case Op::Sum:
      accumulate(grads, a, broadcast_scalar(gv, nodes_[a].rows, nodes_[a].cols));
      break;
    case Op::Mean: {
      const int ra = nodes_[a].rows, ca = nodes_[a].cols;
      accumulate(grads, a,
                 scale(broadcast_scalar(gv, ra, ca), 1.0 / (static_cast<double>(ra) * ca)));
      break;
    }
    case Op::Scale:
      accumulate(grads, a, scale(gv, c));
      break;
    case Op::Broadcast:
      accumulate(grads, a, sum(gv));
      break;
    case Op::Exp:
      accumulate(grads, a, mul(gv, self));
      break;
    case Op::Log:
      accumulate(grads, a, div(gv, av));
      break;
    case Op::Sin:
      accumulate(grads, a, mul(gv, cos(av)));
      break;
    case Op::Cos:
      accumulate(grads, a, neg(mul(gv, sin(av))));
      break;
    case Op::Sigmoid: {
      Val ones = constant(Tensor::ones(nodes_[id].rows, nodes_[id].cols));
      accumulate(grads, a, mul(gv, mul(self, sub(ones, self))));
      break;
    }
    case Op::Relu: {
      Tensor mask(nodes_[id].rows, nodes_[id].cols);
      const auto& in = nodes_[a].value;
      for (size_t i = 0; i < in.size(); ++i) mask.data[i] = in[i] > 0.0 ? 1.0 : 0.0;
      accumulate(grads, a, mul(gv, constant(mask)));
      break;
    }
    case Op::Sqrt:
      accumulate(grads, a, div(scale(gv, 0.5), self));
      break;
    case Op::RegInverse: {
      // d(K^{-1}) = -K^{-1} dK K^{-1}; expressed through the output node so
      // the rule itself stays differentiable.
      Val z = neg(matmul(matmul(self, gv), self));
      accumulate(grads, a, symmetrize(z));
      break;
    }
    case Op::SqrtmPsd: {
      const int n = nodes_[id].rows;
      Tensor u(n, n), w(n, n);
      {
        const auto& aux = nodes_[id].aux;
        for (int i = 0; i < n * n; ++i) u.data[i] = aux[i];
        std::vector<double> rt(n);
        for (int i = 0; i < n; ++i) rt[i] = std::sqrt(aux[static_cast<size_t>(n) * n + i]);
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            const double denom = rt[i] + rt[j];
            w.at(i, j) = denom > 1e-12 ? 1.0 / denom : 0.0;
          }
      }
      // Solve Y X + X Y = G in the eigenbasis: X = U ((U^T G U) * W) U^T.
      Val uc = constant(u);
      Val gt = matmul(matmul(transpose(uc), gv), uc);
      Val x = matmul(matmul(uc, mul(gt, constant(w))), transpose(uc));
      accumulate(grads, a, symmetrize(x));
      break;
    }
    case Op::TraceSqrtm: {
      const int n = nodes_[a].rows;
      Tensor h(n, n);
      {
        const auto& aux = nodes_[id].aux;
        std::vector<double> d(n);
        for (int i = 0; i < n; ++i) {
          const double l = aux[static_cast<size_t>(n) * n + i];
          d[i] = l > 1e-8 ? 0.5 / std::sqrt(l) : 0.0;  // floored modes contribute nothing
        }
        for (int i = 0; i < n; ++i)
          for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int l = 0; l < n; ++l)
              s += aux[static_cast<size_t>(i) * n + l] * d[l] * aux[static_cast<size_t>(j) * n + l];
            h.at(i, j) = s;
          }
      }
      accumulate(grads, a, mul(broadcast_scalar(gv, n, n), constant(h)));
      break;
    }
  }
}

double finite_diff_check(const std::function<Val(Tape&, Val)>& f, const Tensor& x, double eps) {
  require(eps > 0.0, "finite_diff_check: eps must be positive");
  Tensor analytic;
  {
    Tape t;
    Val xv = t.leaf(x, true);
    Val loss = f(t, xv);
    GradMap gm = t.backward(loss);
    analytic = t.grad_tensor(gm, xv);
  }
  auto eval = [&](const Tensor& xt) {
    Tape t;
    Val xv = t.leaf(xt, true);
    return t.scalar(f(t, xv));
  };
  double max_rel = 0.0;
  Tensor xp = x;
  for (size_t i = 0; i < x.data.size(); ++i) {
    const double saved = xp.data[i];
    xp.data[i] = saved + eps;
    const double fp = eval(xp);
    xp.data[i] = saved - eps;
    const double fm = eval(xp);
    xp.data[i] = saved;
    const double fd = (fp - fm) / (2.0 * eps);
    const double an = analytic.data[i];
    const double rel = std::abs(fd - an) / std::max(1e-8, std::abs(an));
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace sgdd::ad
