#include "ssws/nn/tensor.hpp"

#include <unordered_set>

namespace ssws::nn {
namespace {

thread_local bool g_grad_enabled = true;

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_size(shape) != values.size())
    throw ShapeError("tensor data length " + std::to_string(values.size()) + " does not match shape " +
                     shape_string(shape));
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

detail::Node& Tensor::node() const {
  if (!node_) throw std::logic_error("use of undefined tensor");
  return *node_;
}

std::size_t Tensor::rows() const {
  const auto& s = node().shape;
  if (s.size() == 1) return 1;
  if (s.size() == 2) return s[0];
  throw ShapeError("rows() on tensor of shape " + shape_string(s));
}

std::size_t Tensor::cols() const {
  const auto& s = node().shape;
  if (s.size() == 1) return s[0];
  if (s.size() == 2) return s[1];
  throw ShapeError("cols() on tensor of shape " + shape_string(s));
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  return node().value[0];
}

void Tensor::set_requires_grad(bool flag) {
  auto& n = node();
  if (!n.parents.empty()) throw std::logic_error("requires_grad can only be set on leaf tensors");
  n.requires_grad = flag;
}

void Tensor::zero_grad() { node().grad.clear(); }

Tensor Tensor::clone(bool requires_grad) const { return from(shape(), node().value, requires_grad); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

bool grad_enabled() { return g_grad_enabled; }

namespace detail {

Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                   std::function<void(Node& self)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  if (g_grad_enabled) {
    for (const auto& in : inputs)
      if (in.defined() && in.requires_grad()) node->requires_grad = true;
    if (node->requires_grad) {
      for (auto& in : inputs)
        if (in.defined()) node->parents.push_back(in.ptr());
      node->backward = std::move(backward);
    }
  }
  return Tensor(std::move(node));
}

}  // namespace detail

void backward(const Tensor& loss) {
  if (loss.size() != 1) throw ShapeError("backward() needs a scalar, got " + shape_string(loss.shape()));
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::Node*, std::size_t>> stack{{loss.ptr().get(), 0}};
  seen.insert(loss.ptr().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      detail::Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node().ensure_grad()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

}  // namespace ssws::nn
