#include "ssws/nn/params.hpp"

#include <cmath>
#include <stdexcept>

namespace ssws::nn {

Tensor& ParameterSet::add(std::string name, Tensor tensor) {
  for (const auto& [n, t] : entries_)
    if (n == name) throw std::invalid_argument("duplicate parameter name " + name);
  tensor.set_requires_grad(true);
  entries_.emplace_back(std::move(name), std::move(tensor));
  return entries_.back().second;
}

Tensor& ParameterSet::add_uniform(std::string name, Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape_size(shape));
  for (auto& v : values) v = dist(rng);
  return add(std::move(name), Tensor::from(std::move(shape), std::move(values)));
}

Tensor& ParameterSet::add_zeros(std::string name, Shape shape) {
  return add(std::move(name), Tensor::zeros(std::move(shape)));
}

Tensor& ParameterSet::get(const std::string& name) {
  for (auto& [n, t] : entries_)
    if (n == name) return t;
  throw std::out_of_range("no parameter named " + name);
}

const Tensor& ParameterSet::get(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

std::size_t ParameterSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

void ParameterSet::fill(double value) {
  for (auto& [name, t] : entries_)
    for (auto& v : t.data()) v = value;
}

}  // namespace ssws::nn
