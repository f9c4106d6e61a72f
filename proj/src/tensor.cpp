#include "aad/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace aad {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

void Node::ensure_grad() {
  if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

namespace {

std::shared_ptr<Node> make_leaf(Shape shape, std::vector<double> values,
                                bool requires_grad) {
  if (shape_numel(shape) != values.size())
    throw std::invalid_argument("tensor: shape " + shape_str(shape) +
                                " does not match " +
                                std::to_string(values.size()) + " values");
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  n->needs_grad = requires_grad;
  return n;
}

std::shared_ptr<Node> make_op(const char* op, Shape shape,
                              std::vector<double> values,
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
  return n;
}

[[noreturn]] void shape_error(const char* op, const Tensor& a,
                              const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " +
                              shape_str(a.shape()) + " and " +
                              shape_str(b.shape()));
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  std::size_t n = shape_numel(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0),
                          requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double v) { return from({}, {v}); }

const std::vector<double>& Tensor::grad() const {
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  node_->ensure_grad();
  std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

double Tensor::item() const {
  if (numel() != 1)
    throw std::invalid_argument("item: tensor has " + std::to_string(numel()) +
                                " elements, expected 1");
  return node_->values[0];
}

Tensor Tensor::clone_detached(bool requires_grad) const {
  return from(node_->shape, node_->values, requires_grad);
}

void backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_str(loss.shape()));
  // Topological order via iterative DFS.
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [n, idx] = stack.back();
    if (idx < n->inputs.size()) {
      Node* child = n->inputs[idx++].get();
      if (child->needs_grad && !visited.count(child)) {
        visited.insert(child);
        stack.emplace_back(child, 0);
      }
    } else {
      topo.push_back(n);
      stack.pop_back();
    }
  }
  Node* root = loss.node().get();
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->needs_grad) {
      for (auto& in : n->inputs)
        if (in->needs_grad) in->ensure_grad();
      n->backward(*n);
    }
  }
}

// ---- primitives -----------------------------------------------------------

namespace {

// True if b is a row vector broadcastable over the rows of matrix a.
bool row_broadcast(const Shape& a, const Shape& b) {
  return a.size() == 2 && b.size() == 1 && a[1] == b[0];
}

Tensor add_sub(const char* op, const Tensor& a, const Tensor& b, double sgn) {
  const auto& va = a.values();
  const auto& vb = b.values();
  std::vector<double> out;
  if (a.shape() == b.shape()) {
    out.resize(va.size());
    for (std::size_t i = 0; i < va.size(); ++i) out[i] = va[i] + sgn * vb[i];
  } else if (row_broadcast(a.shape(), b.shape())) {
    out.resize(va.size());
    std::size_t cols = b.numel();
    for (std::size_t i = 0; i < va.size(); ++i)
      out[i] = va[i] + sgn * vb[i % cols];
  } else {
    shape_error(op, a, b);
  }
  auto an = a.node();
  auto bn = b.node();
  bool bcast = a.shape() != b.shape();
  return Tensor(make_op(op, a.shape(), std::move(out), {an, bn},
                        [an, bn, bcast, sgn](Node& n) {
                          if (an->needs_grad)
                            for (std::size_t i = 0; i < n.grad.size(); ++i)
                              an->grad[i] += n.grad[i];
                          if (bn->needs_grad) {
                            if (!bcast) {
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                bn->grad[i] += sgn * n.grad[i];
                            } else {
                              std::size_t cols = bn->numel();
                              for (std::size_t i = 0; i < n.grad.size(); ++i)
                                bn->grad[i % cols] += sgn * n.grad[i];
                            }
                          }
                        }));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_sub("add", a, b, 1.0); }
Tensor sub(const Tensor& a, const Tensor& b) { return add_sub("sub", a, b, -1.0); }

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a, b);
  const auto& va = a.values();
  const auto& vb = b.values();
  std::vector<double> out(va.size());
  for (std::size_t i = 0; i < va.size(); ++i) out[i] = va[i] * vb[i];
  auto an = a.node();
  auto bn = b.node();
  return Tensor(make_op("mul", a.shape(), std::move(out), {an, bn},
                        [an, bn](Node& n) {
                          if (an->needs_grad)
                            for (std::size_t i = 0; i < n.grad.size(); ++i)
                              an->grad[i] += n.grad[i] * bn->values[i];
                          if (bn->needs_grad)
                            for (std::size_t i = 0; i < n.grad.size(); ++i)
                              bn->grad[i] += n.grad[i] * an->values[i];
                        }));
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 ||
      a.shape()[1] != b.shape()[0])
    shape_error("matmul", a, b);
  std::size_t m = a.shape()[0], k = a.shape()[1], p = b.shape()[1];
  std::vector<double> out(m * p, 0.0);
  const auto& va = a.values();
  const auto& vb = b.values();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t t = 0; t < k; ++t) {
      double av = va[i * k + t];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < p; ++j) out[i * p + j] += av * vb[t * p + j];
    }
  auto an = a.node();
  auto bn = b.node();
  return Tensor(make_op(
      "matmul", {m, p}, std::move(out), {an, bn}, [an, bn, m, k, p](Node& n) {
        if (an->needs_grad)  // dA = G * B^T
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t t = 0; t < k; ++t) {
              double acc = 0.0;
              for (std::size_t j = 0; j < p; ++j)
                acc += n.grad[i * p + j] * bn->values[t * p + j];
              an->grad[i * k + t] += acc;
            }
        if (bn->needs_grad)  // dB = A^T * G
          for (std::size_t t = 0; t < k; ++t)
            for (std::size_t i = 0; i < m; ++i) {
              double av = an->values[i * k + t];
              if (av == 0.0) continue;
              for (std::size_t j = 0; j < p; ++j)
                bn->grad[t * p + j] += av * n.grad[i * p + j];
            }
      }));
}

namespace {

Tensor unary(const char* op, const Tensor& x,
             const std::function<double(double)>& f,
             const std::function<double(double, double)>& dfdx_of_x_y) {
  const auto& vx = x.values();
  std::vector<double> out(vx.size());
  for (std::size_t i = 0; i < vx.size(); ++i) out[i] = f(vx[i]);
  auto xn = x.node();
  return Tensor(make_op(op, x.shape(), std::move(out), {xn},
                        [xn, dfdx_of_x_y](Node& n) {
                          if (!xn->needs_grad) return;
                          for (std::size_t i = 0; i < n.grad.size(); ++i)
                            xn->grad[i] += n.grad[i] *
                                dfdx_of_x_y(xn->values[i], n.values[i]);
                        }));
}

}  // namespace

Tensor relu(const Tensor& x) {
  return unary("relu", x, [](double v) { return v > 0 ? v : 0.0; },
               [](double v, double) { return v > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& x, double alpha) {
  return unary("leaky_relu", x,
               [alpha](double v) { return v > 0 ? v : alpha * v; },
               [alpha](double v, double) { return v > 0 ? 1.0 : alpha; });
}

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x,
               [](double v) { return 1.0 / (1.0 + std::exp(-v)); },
               [](double, double y) { return y * (1.0 - y); });
}

Tensor exp_(const Tensor& x) {
  return unary("exp", x, [](double v) { return std::exp(v); },
               [](double, double y) { return y; });
}

Tensor log_(const Tensor& x) {
  return unary("log", x,
               [](double v) { return std::log(std::max(v, kLogFloor)); },
               [](double v, double) {
                 return v > kLogFloor ? 1.0 / v : 0.0;
               });
}

Tensor sum(const Tensor& x) {
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  auto xn = x.node();
  return Tensor(make_op("sum", {}, {acc}, {xn}, [xn](Node& n) {
    if (!xn->needs_grad) return;
    double g = n.grad[0];
    for (double& gi : xn->grad) gi += g;
  }));
}

Tensor mean(const Tensor& x) {
  if (x.numel() == 0) throw std::invalid_argument("mean: empty tensor");
  double acc = 0.0;
  for (double v : x.values()) acc += v;
  double inv = 1.0 / static_cast<double>(x.numel());
  auto xn = x.node();
  return Tensor(make_op("mean", {}, {acc * inv}, {xn}, [xn, inv](Node& n) {
    if (!xn->needs_grad) return;
    double g = n.grad[0] * inv;
    for (double& gi : xn->grad) gi += g;
  }));
}

namespace {

// Resolves (rows, cols) so that softmax runs over `cols` contiguous entries.
std::pair<std::size_t, std::size_t> softmax_axes(const char* op,
                                                 const Tensor& x, int axis) {
  const Shape& s = x.shape();
  if (s.size() == 1) {
    if (axis != 0)
      throw std::invalid_argument(std::string(op) + ": axis " +
                                  std::to_string(axis) + " invalid for 1-D");
    if (s[0] == 0) throw std::invalid_argument(std::string(op) + ": empty axis");
    return {1, s[0]};
  }
  if (s.size() == 2) {
    if (axis != 1 && axis != -1)
      throw std::invalid_argument(std::string(op) +
                                  ": only the last axis is supported for 2-D");
    if (s[1] == 0) throw std::invalid_argument(std::string(op) + ": empty axis");
    return {s[0], s[1]};
  }
  throw std::invalid_argument(std::string(op) + ": rank " +
                              std::to_string(s.size()) + " unsupported");
}

}  // namespace

Tensor softmax(const Tensor& x, int axis) {
  auto [rows, cols] = softmax_axes("softmax", x, axis);
  const auto& vx = x.values();
  std::vector<double> out(vx.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = vx.data() + r * cols;
    double* o = out.data() + r * cols;
    double mx = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += (o[j] = std::exp(in[j] - mx));
    for (std::size_t j = 0; j < cols; ++j) o[j] /= z;
  }
  auto xn = x.node();
  std::size_t R = rows, C = cols;
  return Tensor(make_op("softmax", x.shape(), std::move(out), {xn},
                        [xn, R, C](Node& n) {
                          if (!xn->needs_grad) return;
                          for (std::size_t r = 0; r < R; ++r) {
                            const double* y = n.values.data() + r * C;
                            const double* g = n.grad.data() + r * C;
                            double dot = 0.0;
                            for (std::size_t j = 0; j < C; ++j)
                              dot += g[j] * y[j];
                            for (std::size_t j = 0; j < C; ++j)
                              xn->grad[r * C + j] += y[j] * (g[j] - dot);
                          }
                        }));
}

Tensor log_softmax(const Tensor& x, int axis) {
  auto [rows, cols] = softmax_axes("log_softmax", x, axis);
  const auto& vx = x.values();
  std::vector<double> out(vx.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = vx.data() + r * cols;
    double* o = out.data() + r * cols;
    double mx = *std::max_element(in, in + cols);
    double z = 0.0;
    for (std::size_t j = 0; j < cols; ++j) z += std::exp(in[j] - mx);
    double lse = mx + std::log(z);
    for (std::size_t j = 0; j < cols; ++j) o[j] = in[j] - lse;
  }
  auto xn = x.node();
  std::size_t R = rows, C = cols;
  return Tensor(make_op("log_softmax", x.shape(), std::move(out), {xn},
                        [xn, R, C](Node& n) {
                          if (!xn->needs_grad) return;
                          for (std::size_t r = 0; r < R; ++r) {
                            const double* y = n.values.data() + r * C;
                            const double* g = n.grad.data() + r * C;
                            double gsum = 0.0;
                            for (std::size_t j = 0; j < C; ++j) gsum += g[j];
                            for (std::size_t j = 0; j < C; ++j)
                              xn->grad[r * C + j] +=
                                  g[j] - std::exp(y[j]) * gsum;
                          }
                        }));
}

Tensor embedding_gather(const Tensor& table, std::span<const int> ids) {
  if (table.shape().size() != 2)
    throw std::invalid_argument("embedding_gather: table must be 2-D, got " +
                                shape_str(table.shape()));
  if (ids.empty())
    throw std::invalid_argument("embedding_gather: empty id sequence");
  std::size_t V = table.shape()[0], e = table.shape()[1];
  for (int id : ids)
    if (id < 0 || static_cast<std::size_t>(id) >= V)
      throw std::invalid_argument("embedding_gather: id " +
                                  std::to_string(id) +
                                  " out of vocabulary size " +
                                  std::to_string(V));
  std::vector<double> out(ids.size() * e);
  const auto& vt = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy_n(vt.data() + static_cast<std::size_t>(ids[i]) * e, e,
                out.data() + i * e);
  auto tn = table.node();
  std::vector<int> id_copy(ids.begin(), ids.end());
  return Tensor(make_op("embedding_gather", {ids.size(), e}, std::move(out),
                        {tn}, [tn, id_copy, e](Node& n) {
                          if (!tn->needs_grad) return;
                          for (std::size_t i = 0; i < id_copy.size(); ++i) {
                            double* dst =
                                tn->grad.data() +
                                static_cast<std::size_t>(id_copy[i]) * e;
                            const double* src = n.grad.data() + i * e;
                            for (std::size_t j = 0; j < e; ++j)
                              dst[j] += src[j];
                          }
                        }));
}

Tensor mean_pool_rows(const Tensor& x) {
  if (x.shape().size() != 2 || x.shape()[0] == 0)
    throw std::invalid_argument("mean_pool_rows: need non-empty 2-D input, got " +
                                shape_str(x.shape()));
  std::size_t L = x.shape()[0], e = x.shape()[1];
  std::vector<double> out(e, 0.0);
  const auto& vx = x.values();
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < e; ++j) out[j] += vx[i * e + j];
  double inv = 1.0 / static_cast<double>(L);
  for (double& v : out) v *= inv;
  auto xn = x.node();
  return Tensor(make_op("mean_pool_rows", {e}, std::move(out), {xn},
                        [xn, L, e, inv](Node& n) {
                          if (!xn->needs_grad) return;
                          for (std::size_t i = 0; i < L; ++i)
                            for (std::size_t j = 0; j < e; ++j)
                              xn->grad[i * e + j] += n.grad[j] * inv;
                        }));
}

Tensor concat_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw std::invalid_argument("concat_rows: no inputs");
  std::size_t e = rows[0].numel();
  for (const Tensor& r : rows)
    if (r.shape().size() != 1 || r.numel() != e)
      throw std::invalid_argument(
          "concat_rows: all inputs must be 1-D of equal length, got " +
          shape_str(r.shape()));
  std::vector<double> out(rows.size() * e);
  std::vector<std::shared_ptr<Node>> ins;
  ins.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(rows[i].values().data(), e, out.data() + i * e);
    ins.push_back(rows[i].node());
  }
  return Tensor(make_op("concat_rows", {rows.size(), e}, std::move(out),
                        std::move(ins), [e](Node& n) {
                          for (std::size_t i = 0; i < n.inputs.size(); ++i) {
                            Node* in = n.inputs[i].get();
                            if (!in->needs_grad) continue;
                            const double* src = n.grad.data() + i * e;
                            for (std::size_t j = 0; j < e; ++j)
                              in->grad[j] += src[j];
                          }
                        }));
}

Tensor scale(const Tensor& x, double c) {
  std::vector<double> out(x.numel());
  const auto& vx = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = c * vx[i];
  auto xn = x.node();
  return Tensor(make_op("scale", x.shape(), std::move(out), {xn},
                        [xn, c](Node& n) {
                          if (!xn->needs_grad) return;
                          for (std::size_t i = 0; i < n.grad.size(); ++i)
                            xn->grad[i] += c * n.grad[i];
                        }));
}

Tensor gradient_reversal(const Tensor& x, double lambda) {
  auto xn = x.node();
  return Tensor(make_op("gradient_reversal", x.shape(), x.values(), {xn},
                        [xn, lambda](Node& n) {
                          if (!xn->needs_grad) return;
                          for (std::size_t i = 0; i < n.grad.size(); ++i)
                            xn->grad[i] -= lambda * n.grad[i];
                        }));
}

}  // namespace aad
