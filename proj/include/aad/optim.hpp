#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "aad/tensor.hpp"

namespace aad {

// Named trainable parameter.
struct Param {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<Param>;

struct AdamState {
  std::vector<double> m;  // first moment
  std::vector<double> v;  // second moment
  long step = 0;
};

class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  // Applies one bias-corrected Adam update to every param with its grad.
  // Throws on non-finite gradients, naming the parameter.
  void step(ParamList& params);

  double lr() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, epsilon_;
  std::unordered_map<std::string, AdamState> state_;
};

void zero_grads(ParamList& params);

// Scales all grads by max_norm/norm when the global L2 norm exceeds max_norm.
void clip_grad_norm(ParamList& params, double max_norm);

// Clamps every grad component to [-clip, +clip].
void clip_grad_value(ParamList& params, double clip);

// WGAN-style weight clamping (off by default in configs).
void clip_weight_value(ParamList& params, double clip);

double global_grad_norm(const ParamList& params);

}  // namespace aad
