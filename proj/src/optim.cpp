#include "aad/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aad {

Adam::Adam(double lr, double beta1, double beta2, double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {
  if (lr <= 0.0) throw std::invalid_argument("Adam: learning rate must be > 0");
}

void Adam::step(ParamList& params) {
  for (Param& p : params) {
    const std::vector<double>& g = p.tensor.grad();
    for (double gi : g)
      if (!std::isfinite(gi))
        throw std::runtime_error("Adam: non-finite gradient in parameter '" +
                                 p.name + "'");
    AdamState& st = state_[p.name];
    if (st.m.empty()) {
      st.m.assign(g.size(), 0.0);
      st.v.assign(g.size(), 0.0);
    }
    if (st.m.size() != g.size())
      throw std::invalid_argument("Adam: shape change for parameter '" +
                                  p.name + "'");
    ++st.step;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(st.step));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(st.step));
    std::vector<double>& theta = p.tensor.mutable_values();
    for (std::size_t i = 0; i < g.size(); ++i) {
      st.m[i] = beta1_ * st.m[i] + (1.0 - beta1_) * g[i];
      st.v[i] = beta2_ * st.v[i] + (1.0 - beta2_) * g[i] * g[i];
      double mhat = st.m[i] / bc1;
      double vhat = st.v[i] / bc2;
      theta[i] -= lr_ * mhat / (std::sqrt(vhat) + epsilon_);
    }
  }
}

void zero_grads(ParamList& params) {
  for (Param& p : params) p.tensor.zero_grad();
}

double global_grad_norm(const ParamList& params) {
  double sq = 0.0;
  for (const Param& p : params)
    for (double g : p.tensor.grad()) sq += g * g;
  return std::sqrt(sq);
}

void clip_grad_norm(ParamList& params, double max_norm) {
  if (max_norm <= 0.0)
    throw std::invalid_argument("clip_grad_norm: max_norm must be > 0");
  double norm = global_grad_norm(params);
  if (norm <= max_norm) return;
  double s = max_norm / norm;
  for (Param& p : params)
    for (double& g : p.tensor.grad()) g *= s;
}

void clip_grad_value(ParamList& params, double clip) {
  if (clip <= 0.0)
    throw std::invalid_argument("clip_grad_value: clip must be > 0");
  for (Param& p : params)
    for (double& g : p.tensor.grad()) g = std::clamp(g, -clip, clip);
}

void clip_weight_value(ParamList& params, double clip) {
  if (clip <= 0.0)
    throw std::invalid_argument("clip_weight_value: clip must be > 0");
  for (Param& p : params)
    for (double& w : p.tensor.mutable_values()) w = std::clamp(w, -clip, clip);
}

}  // namespace aad
