#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "sgdd/tensor.hpp"

namespace sgdd::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid as long as the tape lives.
struct Val {
  Tape* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  int rows() const;
  int cols() const;
};

// Node ids of the gradients produced by one backward() call, aligned with the
// tape at the time of the call. Gradients are themselves tape nodes, so a
// scalar built from them can be differentiated again (reverse-over-reverse);
// the gradient-matching loss relies on this.
struct GradMap {
  std::vector<int> ids;

  bool has(Val v) const {
    return v.id >= 0 && v.id < static_cast<int>(ids.size()) && ids[v.id] >= 0;
  }
};

// Define-by-run reverse-mode tape over dense 2-D tensors. Forward values are
// computed eagerly at node creation. Single-threaded by design; independent
// tapes may run concurrently.
class Tape {
 public:
  enum class Op : uint8_t {
    Leaf, Const,
    Add, Sub, Neg, Mul, Div, MatMul, Transpose,
    ConcatCols, SliceRows, SliceCols, PadRows, PadCols, Reshape,
    Sum, Mean, Scale, Broadcast,
    Exp, Log, Sin, Cos, Sigmoid, Relu, Sqrt,
    RegInverse, SqrtmPsd, TraceSqrtm,
  };

  struct Node {
    Op op;
    int rows = 0, cols = 0;
    int a = -1, b = -1;     // inputs
    double c = 0.0;         // scale factor / regularizer strength
    int i0 = 0, i1 = 0;     // slice bounds / pad offset / reshape target
    bool requires_grad = false;
    std::vector<double> value;
    std::vector<double> aux;  // eigendecomposition cache for matrix functions
  };

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Val leaf(const Tensor& t, bool requires_grad = true);
  Val constant(const Tensor& t);
  Val constant_scalar(double v);

  // Reverse sweep from a scalar loss. Gradient accumulation order is fixed by
  // node creation order, so results are bit-reproducible.
  GradMap backward(Val loss);

  Tensor value(Val v) const;
  double scalar(Val v) const;
  Tensor grad_tensor(const GradMap& gm, Val v) const;  // zeros when absent
  Val grad_val(const GradMap& gm, Val v);              // zero const when absent

  size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_[id]; }

  // Internal: used by the free-function ops below.
  int push(Node&& n);

 private:
  void emit_backward(int id, std::vector<int>& grads);
  void accumulate(std::vector<int>& grads, int target, Val contrib);
  std::vector<Node> nodes_;
};

Val add(Val a, Val b);
Val sub(Val a, Val b);
Val neg(Val a);
Val mul(Val a, Val b);  // elementwise
Val div(Val a, Val b);  // elementwise
Val matmul(Val a, Val b);
Val transpose(Val a);
Val concat_cols(Val a, Val b);
Val slice_rows(Val a, int r0, int r1);
Val slice_cols(Val a, int c0, int c1);
Val pad_rows(Val a, int total_rows, int offset);
Val pad_cols(Val a, int total_cols, int offset);
Val reshape(Val a, int rows, int cols);
Val sum(Val a);   // 1x1
Val mean(Val a);  // 1x1
Val scale(Val a, double c);
Val broadcast_scalar(Val a, int rows, int cols);
Val exp(Val a);
Val log(Val a);
Val sin(Val a);
Val cos(Val a);
Val sigmoid(Val a);
Val relu(Val a);
Val sqrt(Val a);

// (sym(M) + (gamma/n) J)^{-1} with J the all-ones matrix. The rank-one shift
// makes a graph Laplacian invertible while acting only on the constant mode
// of a connected graph. Throws NumericalError if the shifted matrix is not
// positive definite. Backward: -K^{-1} G K^{-1}, symmetrized.
Val reg_inverse(Val m, double gamma);

// Principal square root of a symmetric PSD matrix via eigendecomposition.
// Eigenvalues in [-1e-6, 0) are clamped to zero; below that it throws.
Val sqrtm_psd(Val m);

// tr(sqrt(sym(M))) for symmetric PSD M, returned as a 1x1 node. Eigenvalues
// below 1e-8 are excluded from the backward sum (1/(2 sqrt(lambda)) blows up).
Val trace_sqrtm(Val m);

// Convenience composites.
Val square(Val a);
Val sum_sq(Val a);
Val trace(Val a);
Val frobenius_norm(Val a);
Val symmetrize(Val a);

inline Val operator+(Val a, Val b) { return add(a, b); }
inline Val operator-(Val a, Val b) { return sub(a, b); }
inline Val operator-(Val a) { return neg(a); }
inline Val operator*(Val a, Val b) { return mul(a, b); }

// Central finite differences against the analytic tape gradient. `f` builds a
// scalar from a fresh tape and the leaf it is given. Returns the max over
// entries of |fd - analytic| / max(1e-8, |analytic|).
double finite_diff_check(const std::function<Val(Tape&, Val)>& f, const Tensor& x,
                         double eps = 1e-5);

}  // namespace sgdd::ad
