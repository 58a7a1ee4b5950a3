#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ssws/nn/tensor.hpp"

namespace ssws::nn {

// Ordered, named collection of trainable leaf tensors. Order is the
// canonical order for optimizer state and checkpoints.
class ParameterSet {
 public:
  Tensor& add(std::string name, Tensor tensor);
  // Uniform in ±sqrt(1 / fan_in), drawn from `rng` in declaration order.
  Tensor& add_uniform(std::string name, Shape shape, std::size_t fan_in, std::mt19937_64& rng);
  Tensor& add_zeros(std::string name, Shape shape);

  std::size_t size() const { return entries_.size(); }
  const std::string& name(std::size_t i) const { return entries_[i].first; }
  Tensor& operator[](std::size_t i) { return entries_[i].second; }
  const Tensor& operator[](std::size_t i) const { return entries_[i].second; }
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  std::size_t parameter_count() const;

  void zero_grad();
  void fill(double value);

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

}  // namespace ssws::nn
