#pragma once

#include <vector>

#include "aad/tensor.hpp"

namespace aad {

// Scalar loss with its graph attachment.
struct LossValue {
  Tensor tensor;
  double value() const { return tensor.item(); }
};

struct Temperature {
  double t;
  explicit Temperature(double t_);
};

// Mean over batch of -log softmax(logits)[label].
LossValue source_ce(const Tensor& logits, const std::vector<int>& labels);

// t^2 * mean_batch(-sum_k softmax(teacher/t)_k * log softmax(student/t)_k).
// Teacher side is detached; gradients flow only into student logits.
LossValue kd_loss(const Tensor& teacher_logits, const Tensor& student_logits,
                  Temperature t);

// mean(-log D(src)) + mean(-log(1 - D(tgt))); source labeled 1, target 0.
LossValue dis_loss(const Tensor& d_on_source, const Tensor& d_on_target);

// mean(-log D(tgt)) with inverted labels.
LossValue gen_loss(const Tensor& d_on_target);

// L_gen + L_KD, unweighted sum (kd_weight scales the KD term for ablations).
LossValue target_objective(const LossValue& gen, const LossValue& kd,
                           double kd_weight = 1.0);

// L_gen + cross-entropy of source examples routed through the target encoder.
LossValue target_objective_supervised(const LossValue& gen,
                                      const Tensor& source_logits_via_target,
                                      const std::vector<int>& labels);

// Biased MMD^2 with Gaussian kernels k(a,b) = sum_s exp(-|a-b|^2 / (2 s)),
// one term per entry of `bandwidths` (sigma^2 values).
LossValue mmd_gaussian(const Tensor& source_reps, const Tensor& target_reps,
                       const std::vector<double>& bandwidths);

// Median pairwise squared distance of the joint batch (median heuristic).
double mmd_median_bandwidth(const Tensor& source_reps,
                            const Tensor& target_reps);

// |C_S - C_T|_F^2 / (4 h^2) with 1/(n-1) covariance normalization.
LossValue coral_loss(const Tensor& source_reps, const Tensor& target_reps);

// class CE + domain CE; the reversal (forward identity, grad * -lambda)
// is applied via gradient_reversal where reps feed the domain head.
LossValue dann_objective(const LossValue& class_loss,
                         const LossValue& domain_loss);

// Binary cross-entropy of discriminator probabilities against 0/1 labels.
LossValue domain_bce(const Tensor& probs, int label);

}  // namespace aad
