#include "aad/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace aad {

namespace {

Tensor custom_op(const char* op, Shape shape, std::vector<double> values,
                 std::vector<std::shared_ptr<Node>> inputs,
                 std::function<void(Node&)> bwd) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->op = op;
  n->inputs = std::move(inputs);
  n->backward = std::move(bwd);
  for (const auto& in : n->inputs)
    if (in->needs_grad) { n->needs_grad = true; break; }
  return Tensor(n);
}

std::size_t batch_rows(const char* op, const Tensor& t) {
  const Shape& s = t.shape();
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[0];
  throw std::invalid_argument(std::string(op) + ": rank " +
                              std::to_string(s.size()) + " unsupported");
}

void check_probs(const char* op, const Tensor& p) {
  for (double v : p.values())
    if (!(v > 0.0 && v < 1.0))
      throw std::invalid_argument(std::string(op) +
                                  ": probability outside (0,1): " +
                                  std::to_string(v));
}

Tensor one_hot(const std::vector<int>& labels, std::size_t K) {
  std::vector<double> v(labels.size() * K, 0.0);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= K)
      throw std::invalid_argument("label " + std::to_string(y) +
                                  " out of range [0," + std::to_string(K) +
                                  ")");
    v[i * K + static_cast<std::size_t>(y)] = 1.0;
  }
  return Tensor::from({labels.size(), K}, std::move(v));
}

void check_reps_2d(const char* op, const Tensor& a, const Tensor& b,
                   std::size_t min_rows) {
  if (a.shape().size() != 2 || b.shape().size() != 2 ||
      a.shape()[1] != b.shape()[1])
    throw std::invalid_argument(std::string(op) +
                                ": representations must be 2-D with equal "
                                "feature dim, got " +
                                shape_str(a.shape()) + " and " +
                                shape_str(b.shape()));
  if (a.shape()[0] < min_rows || b.shape()[0] < min_rows)
    throw std::invalid_argument(std::string(op) + ": each batch needs >= " +
                                std::to_string(min_rows) + " rows");
}

}  // namespace

Temperature::Temperature(double t_) : t(t_) {
  if (!(t > 0.0)) throw std::invalid_argument("temperature must be > 0");
}

LossValue source_ce(const Tensor& logits, const std::vector<int>& labels) {
  if (logits.shape().size() != 2 || logits.shape()[0] != labels.size())
    throw std::invalid_argument("source_ce: logits " +
                                shape_str(logits.shape()) + " vs " +
                                std::to_string(labels.size()) + " labels");
  std::size_t B = labels.size(), K = logits.shape()[1];
  Tensor oh = one_hot(labels, K);
  Tensor ls = log_softmax(logits, 1);
  Tensor loss = scale(sum(mul(oh, ls)), -1.0 / static_cast<double>(B));
  return {loss};
}

LossValue kd_loss(const Tensor& teacher_logits, const Tensor& student_logits,
                  Temperature t) {
  if (teacher_logits.shape() != student_logits.shape())
    throw std::invalid_argument("kd_loss: teacher " +
                                shape_str(teacher_logits.shape()) +
                                " vs student " +
                                shape_str(student_logits.shape()));
  if (teacher_logits.shape().size() != 2)
    throw std::invalid_argument("kd_loss: logits must be [B,K]");
  std::size_t B = teacher_logits.shape()[0];
  // Teacher distribution is a detached constant.
  Tensor soft_teacher =
      softmax(scale(teacher_logits, 1.0 / t.t), 1).clone_detached();
  Tensor student_ls = log_softmax(scale(student_logits, 1.0 / t.t), 1);
  Tensor loss = scale(sum(mul(soft_teacher, student_ls)),
                      -(t.t * t.t) / static_cast<double>(B));
  return {loss};
}

LossValue dis_loss(const Tensor& d_on_source, const Tensor& d_on_target) {
  check_probs("dis_loss", d_on_source);
  check_probs("dis_loss", d_on_target);
  Tensor ones_t = Tensor::from(d_on_target.shape(),
                               std::vector<double>(d_on_target.numel(), 1.0));
  Tensor src_term = scale(mean(log_(d_on_source)), -1.0);
  Tensor tgt_term = scale(mean(log_(sub(ones_t, d_on_target))), -1.0);
  return {add(src_term, tgt_term)};
}

LossValue gen_loss(const Tensor& d_on_target) {
  check_probs("gen_loss", d_on_target);
  return {scale(mean(log_(d_on_target)), -1.0)};
}

LossValue target_objective(const LossValue& gen, const LossValue& kd,
                           double kd_weight) {
  Tensor kd_term = kd_weight == 1.0 ? kd.tensor : scale(kd.tensor, kd_weight);
  return {add(gen.tensor, kd_term)};
}

LossValue target_objective_supervised(const LossValue& gen,
                                      const Tensor& source_logits_via_target,
                                      const std::vector<int>& labels) {
  LossValue ce = source_ce(source_logits_via_target, labels);
  return {add(gen.tensor, ce.tensor)};
}

LossValue mmd_gaussian(const Tensor& source_reps, const Tensor& target_reps,
                       const std::vector<double>& bandwidths) {
  check_reps_2d("mmd_gaussian", source_reps, target_reps, 1);
  if (bandwidths.empty())
    throw std::invalid_argument("mmd_gaussian: no bandwidths given");
  for (double s : bandwidths)
    if (!(s > 0.0))
      throw std::invalid_argument("mmd_gaussian: bandwidth must be > 0");
  std::size_t m = source_reps.shape()[0], n = target_reps.shape()[0];
  std::size_t h = source_reps.shape()[1];
  const auto& X = source_reps.values();
  const auto& Y = target_reps.values();

  auto ksum = [&](const double* a, const double* b) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
      double d = a[j] - b[j];
      d2 += d * d;
    }
    double k = 0.0;
    for (double s : bandwidths) k += std::exp(-d2 / (2.0 * s));
    return k;
  };

  double xx = 0.0, yy = 0.0, xy = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) xx += ksum(&X[i * h], &X[j * h]);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) yy += ksum(&Y[i * h], &Y[j * h]);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) xy += ksum(&X[i * h], &Y[j * h]);
  double mm = static_cast<double>(m), nn = static_cast<double>(n);
  double value = xx / (mm * mm) + yy / (nn * nn) - 2.0 * xy / (mm * nn);

  auto xn = source_reps.node();
  auto yn = target_reps.node();
  auto bw = bandwidths;
  return {custom_op(
      "mmd_gaussian", {}, {value}, {xn, yn},
      [xn, yn, bw, m, n, h](Node& node) {
        double g = node.grad[0];
        const auto& Xv = xn->values;
        const auto& Yv = yn->values;
        double mm = static_cast<double>(m), nn = static_cast<double>(n);
        // accum(p_row, q_row, coeff) adds coeff * dk/dp into dst for all s.
        auto accum = [&](double* dst, const double* a, const double* b,
                         double coeff) {
          double d2 = 0.0;
          for (std::size_t j = 0; j < h; ++j) {
            double d = a[j] - b[j];
            d2 += d * d;
          }
          double w = 0.0;
          for (double s : bw) w += std::exp(-d2 / (2.0 * s)) / s;
          for (std::size_t j = 0; j < h; ++j)
            dst[j] += coeff * w * -(a[j] - b[j]);
        };
        if (xn->needs_grad)
          for (std::size_t i = 0; i < m; ++i) {
            double* dst = xn->grad.data() + i * h;
            for (std::size_t j = 0; j < m; ++j)
              accum(dst, &Xv[i * h], &Xv[j * h], g * 2.0 / (mm * mm));
            for (std::size_t j = 0; j < n; ++j)
              accum(dst, &Xv[i * h], &Yv[j * h], -g * 2.0 / (mm * nn));
          }
        if (yn->needs_grad)
          for (std::size_t i = 0; i < n; ++i) {
            double* dst = yn->grad.data() + i * h;
            for (std::size_t j = 0; j < n; ++j)
              accum(dst, &Yv[i * h], &Yv[j * h], g * 2.0 / (nn * nn));
            for (std::size_t j = 0; j < m; ++j)
              accum(dst, &Yv[i * h], &Xv[j * h], -g * 2.0 / (mm * nn));
          }
      })};
}

double mmd_median_bandwidth(const Tensor& source_reps,
                            const Tensor& target_reps) {
  check_reps_2d("mmd_median_bandwidth", source_reps, target_reps, 1);
  std::size_t h = source_reps.shape()[1];
  std::vector<const double*> rows;
  for (std::size_t i = 0; i < source_reps.shape()[0]; ++i)
    rows.push_back(source_reps.values().data() + i * h);
  for (std::size_t i = 0; i < target_reps.shape()[0]; ++i)
    rows.push_back(target_reps.values().data() + i * h);
  std::vector<double> d2s;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = i + 1; j < rows.size(); ++j) {
      double d2 = 0.0;
      for (std::size_t k = 0; k < h; ++k) {
        double d = rows[i][k] - rows[j][k];
        d2 += d * d;
      }
      d2s.push_back(d2);
    }
  if (d2s.empty()) return 1.0;
  std::nth_element(d2s.begin(), d2s.begin() + d2s.size() / 2, d2s.end());
  double med = d2s[d2s.size() / 2];
  return med > 0.0 ? med : 1.0;
}

LossValue coral_loss(const Tensor& source_reps, const Tensor& target_reps) {
  check_reps_2d("coral_loss", source_reps, target_reps, 2);
  std::size_t m = source_reps.shape()[0], n = target_reps.shape()[0];
  std::size_t h = source_reps.shape()[1];

  auto covariance = [h](const std::vector<double>& v, std::size_t rows,
                        std::vector<double>& centered) {
    std::vector<double> mu(h, 0.0);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < h; ++j) mu[j] += v[i * h + j];
    for (double& x : mu) x /= static_cast<double>(rows);
    centered.resize(rows * h);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < h; ++j)
        centered[i * h + j] = v[i * h + j] - mu[j];
    std::vector<double> cov(h * h, 0.0);
    double inv = 1.0 / static_cast<double>(rows - 1);
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t a = 0; a < h; ++a) {
        double ca = centered[i * h + a];
        if (ca == 0.0) continue;
        for (std::size_t b = 0; b < h; ++b)
          cov[a * h + b] += ca * centered[i * h + b] * inv;
      }
    return cov;
  };

  std::vector<double> Xc, Yc;
  std::vector<double> Cs = covariance(source_reps.values(), m, Xc);
  std::vector<double> Ct = covariance(target_reps.values(), n, Yc);
  double hh = static_cast<double>(h);
  double value = 0.0;
  std::vector<double> diff(h * h);
  for (std::size_t i = 0; i < h * h; ++i) {
    diff[i] = Cs[i] - Ct[i];
    value += diff[i] * diff[i];
  }
  value /= 4.0 * hh * hh;

  auto xn = source_reps.node();
  auto yn = target_reps.node();
  return {custom_op(
      "coral_loss", {}, {value}, {xn, yn},
      [xn, yn, Xc = std::move(Xc), Yc = std::move(Yc), diff = std::move(diff),
       m, n, h, hh](Node& node) {
        double g = node.grad[0];
        // dL/dC_S = diff / (2 h^2); dL/dC_T = -diff / (2 h^2).
        // dL/dX = P (2/(m-1)) Xc M with M symmetric? diff is symmetric, so
        // dL/dXc = Xc (M + M^T)/(m-1) = 2 Xc M/(m-1); then column-center.
        auto apply = [&](Node* pn, const std::vector<double>& C,
                         std::size_t rows, double sgn) {
          if (!pn->needs_grad) return;
          double coeff = sgn * g / (hh * hh * static_cast<double>(rows - 1));
          std::vector<double> G(rows * h, 0.0);
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t a = 0; a < h; ++a) {
              double ca = C[i * h + a];
              if (ca == 0.0) continue;
              for (std::size_t b = 0; b < h; ++b)
                G[i * h + b] += coeff * ca * diff[a * h + b];
            }
          std::vector<double> colmean(h, 0.0);
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < h; ++j) colmean[j] += G[i * h + j];
          for (double& v : colmean) v /= static_cast<double>(rows);
          for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < h; ++j)
              pn->grad[i * h + j] += G[i * h + j] - colmean[j];
        };
        apply(xn.get(), Xc, m, 1.0);
        apply(yn.get(), Yc, n, -1.0);
      })};
}

LossValue dann_objective(const LossValue& class_loss,
                         const LossValue& domain_loss) {
  return {add(class_loss.tensor, domain_loss.tensor)};
}

LossValue domain_bce(const Tensor& probs, int label) {
  check_probs("domain_bce", probs);
  if (label == 1) return {scale(mean(log_(probs)), -1.0)};
  if (label == 0) {
    Tensor ones =
        Tensor::from(probs.shape(), std::vector<double>(probs.numel(), 1.0));
    return {scale(mean(log_(sub(ones, probs))), -1.0)};
  }
  throw std::invalid_argument("domain_bce: label must be 0 or 1");
}

}  // namespace aad
