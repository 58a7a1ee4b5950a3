#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssws::nn {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class Tensor;

namespace detail {

// One value in the recorded computation. `backward` reads this node's grad
// and accumulates into the grads of `parents`.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node& self)> backward;

  std::vector<double>& ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

// Dense row-major tensor handle. Copies share storage; use clone() for a deep
// copy. Rank-2 tensors are [rows, cols]; rank-1 tensors count as one row.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node().shape; }
  std::size_t rank() const { return node().shape.size(); }
  std::size_t size() const { return node().value.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return node().value; }
  std::span<const double> data() const { return node().value; }
  double item() const;
  double at(std::size_t r, std::size_t c) const { return node().value[r * cols() + c]; }

  bool requires_grad() const { return node().requires_grad; }
  void set_requires_grad(bool flag);
  // Empty span when no gradient has been accumulated.
  std::span<const double> grad() const { return node().grad; }
  std::span<double> mutable_grad() { return node().ensure_grad(); }
  bool has_grad() const { return node().grad.size() == node().value.size() && !node().grad.empty(); }
  void zero_grad();

  // Detached deep copy.
  Tensor clone(bool requires_grad = false) const;

  detail::Node& node() const;
  const std::shared_ptr<detail::Node>& ptr() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// While alive, newly created tensors record no parents, so intermediate
// values are released as soon as they go out of scope.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

namespace detail {

// Builds an op result. Parents and the backward closure are recorded only if
// recording is enabled and at least one input requires a gradient.
Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(Node& self)> backward);

// Accumulates into `t`'s grad if it participates in differentiation.
inline bool wants_grad(const std::shared_ptr<Node>& n) { return n && n->requires_grad; }

}  // namespace detail

// Reverse-mode sweep from a scalar. Gradients accumulate into every tensor
// reachable from `loss` that requires them.
void backward(const Tensor& loss);

}  // namespace ssws::nn
