#include "sgdd/adam.hpp"

#include <cmath>

#include "sgdd/errors.hpp"

namespace sgdd {

AdamState AdamState::init(const std::vector<Tensor*>& params) {
  AdamState s;
  s.m.reserve(params.size());
  s.v.reserve(params.size());
  for (const Tensor* p : params) {
    s.m.emplace_back(p->rows, p->cols, 0.0);
    s.v.emplace_back(p->rows, p->cols, 0.0);
  }
  return s;
}

void adam_step(std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state,
               const AdamConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw InputError("adam_step: parameter/gradient/state count mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = grads[k];
    if (!p.same_shape(g))
      throw InputError("adam_step: gradient shape " + g.shape_str() + " vs parameter " +
                       p.shape_str());
    Tensor& m = state.m[k];
    Tensor& v = state.v[k];
    for (size_t i = 0; i < p.data.size(); ++i) {
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * g.data[i];
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * g.data[i] * g.data[i];
      const double mhat = m.data[i] / bc1;
      const double vhat = v.data[i] / bc2;
      p.data[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace sgdd
