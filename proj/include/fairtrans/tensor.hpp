#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace fairtrans {

// Dense row-major tensors of 64-bit floats with reverse-mode autodiff.
// Every op records its producers; backward() from a scalar root walks the
// tape in reverse topological order and accumulates exact analytic partial
// derivatives into each reachable leaf that requires them. Graphs are
// rebuilt per step (dynamic tape), which keeps alternating GAN updates
// simple. A graph and its parameters belong to one thread at a time;
// disjoint graphs may run in parallel.

namespace detail {

struct Node {
  std::vector<size_t> shape;
  std::vector<double> values;
  std::vector<double> grad;  // same length as values once allocated
  bool requires_grad = false;
  bool leaf = true;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents
  const char* op = "leaf";

  size_t size() const { return values.size(); }
  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

  static Tensor zeros(std::vector<size_t> shape, bool requires_grad = false);
  static Tensor full(std::vector<size_t> shape, double v, bool requires_grad = false);
  static Tensor from_values(std::vector<size_t> shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double v);

  bool defined() const { return node_ != nullptr; }
  const std::vector<size_t>& shape() const;
  size_t size() const;
  size_t rank() const;
  size_t rows() const;  // rank-2
  size_t cols() const;  // rank-2: columns; rank-1: length
  double value() const;  // scalar tensors only
  std::span<const double> values() const;
  std::span<double> values_mut();  // leaf in-place edits (optimizers, loaders)
  std::span<const double> grad() const;
  bool has_grad() const;
  bool requires_grad() const;
  void set_requires_grad(bool rg);
  void zero_grad();
  Tensor detach() const;  // value copy with no graph history

  std::shared_ptr<detail::Node> node() const { return node_; }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Shape rules follow standard dense linear algebra; violations throw
// std::invalid_argument naming the op and both shapes. Domain hazards
// (log of non-positive values, normalizing a zero row, arccos outside
// [-1,1]) throw std::domain_error instead of producing NaN.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);  // same shape, or rank-1 b broadcast over rows
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum_rows(const Tensor& a);          // (m,n) -> (m)
Tensor log_sum_exp_rows(const Tensor& a);  // (m,n) -> (m), max-subtracted
Tensor abs(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor logistic(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor l2_normalize_rows(const Tensor& a);  // rank-1, or rank-2 along the last axis
Tensor arccos(const Tensor& a);
Tensor cosine(const Tensor& a);
Tensor dot(const Tensor& a, const Tensor& b);  // rank-1 pair -> scalar
Tensor concat(const Tensor& a, const Tensor& b, size_t axis);

// Accumulates into leaf gradients; repeated calls add up until the caller
// resets. Throws std::invalid_argument when root is not scalar.
void backward(const Tensor& root);

std::string shape_str(const std::vector<size_t>& s);

}  // namespace fairtrans
