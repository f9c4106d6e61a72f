#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace aad {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

// One record in the computation graph. Leaves have op == nullptr.
struct Node {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // allocated lazily, same numel as values
  bool requires_grad = false;
  bool needs_grad = false;  // true iff a requires_grad leaf is reachable
  const char* op = nullptr;
  std::vector<std::shared_ptr<Node>> inputs;
  // Distributes this node's grad into its inputs' grads (accumulating).
  std::function<void(Node&)> backward;

  std::size_t numel() const { return values.size(); }
  void ensure_grad();
};

// Value-semantics handle to a shared graph node.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t numel() const { return node_->numel(); }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->op == nullptr; }

  const std::vector<double>& values() const { return node_->values; }
  std::vector<double>& mutable_values() { return node_->values; }
  std::vector<double>& grad() { node_->ensure_grad(); return node_->grad; }
  const std::vector<double>& grad() const;
  void zero_grad();

  double item() const;  // scalar tensors only

  // Detached deep copy (leaf, no graph linkage).
  Tensor clone_detached(bool requires_grad = false) const;

  std::shared_ptr<Node> node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Populates grads of every requires_grad leaf reachable from `loss` with
// d(loss)/d(leaf). Accumulates into existing grads.
void backward(const Tensor& loss);

// ---- primitives -----------------------------------------------------------

// add/sub accept equal shapes, or [B,n] (+|-) [n] broadcast over rows.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise, equal shapes
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double alpha);
Tensor sigmoid(const Tensor& x);
Tensor exp_(const Tensor& x);
Tensor log_(const Tensor& x);  // argument floored at kLogFloor
Tensor sum(const Tensor& x);   // scalar
Tensor mean(const Tensor& x);  // scalar
Tensor softmax(const Tensor& x, int axis);
Tensor log_softmax(const Tensor& x, int axis);
Tensor embedding_gather(const Tensor& table, std::span<const int> ids);
Tensor mean_pool_rows(const Tensor& x);           // [L,e] -> [e]
Tensor concat_rows(const std::vector<Tensor>& rows);  // n x [e] -> [n,e]
Tensor scale(const Tensor& x, double c);
// Identity forward; gradient multiplied by -lambda on the way back.
Tensor gradient_reversal(const Tensor& x, double lambda);

inline constexpr double kLogFloor = 1e-12;

}  // namespace aad
