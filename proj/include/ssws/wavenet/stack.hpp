#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "ssws/nn/params.hpp"
#include "ssws/nn/tensor.hpp"

namespace ssws::wavenet {

struct StackConfig {
  std::size_t blocks = 4;
  std::size_t layers_per_block = 10;
  std::size_t residual_channels = 128;
  std::size_t skip_channels = 1024;
  std::size_t quantization_bins = 1024;
  std::size_t kernel_size = 2;

  std::size_t layer_count() const { return blocks * layers_per_block; }
  // 2^(n-1) for the n-th layer of its block; resets at every block.
  std::size_t dilation(std::size_t layer_index) const;
  void validate() const;
};

// Number of network inputs that can influence one output:
// 1 + (kernel - 1) * blocks * (2^layers_per_block - 1).
std::size_t receptive_field(const StackConfig& config);

struct GatedLayerWeights {
  nn::Tensor filter_kernel;  // [K, r, r]
  nn::Tensor filter_bias;    // [r]
  nn::Tensor gate_kernel;    // [K, r, r]
  nn::Tensor gate_bias;      // [r]
  nn::Tensor cond_filter;    // [r, r]
  nn::Tensor cond_gate;      // [r, r]
  nn::Tensor residual_weight;  // [r, r]
  nn::Tensor residual_bias;    // [r]
  nn::Tensor skip_weight;      // [r, s]
  nn::Tensor skip_bias;        // [s]
};

struct LayerOutput {
  nn::Tensor residual;  // [T, r]
  nn::Tensor skip;      // [T, s]
};

// z = tanh(conv_f(x) + cond W_f) * sigmoid(conv_g(x) + cond W_g)
// residual = x + z W_r + b_r, skip = z W_s + b_s
LayerOutput gated_layer(const nn::Tensor& x, const nn::Tensor& cond, const GatedLayerWeights& w,
                        std::size_t dilation);

struct OutputHead {
  nn::Tensor hidden_weight;  // [s, s]
  nn::Tensor hidden_bias;    // [s]
  nn::Tensor output_weight;  // [s, a]
  nn::Tensor output_bias;    // [a]
};

class WaveNetStack {
 public:
  WaveNetStack(const StackConfig& config, nn::ParameterSet& params, std::mt19937_64& rng,
               const std::string& prefix = "stack.");

  const StackConfig& config() const { return config_; }
  const nn::Tensor& input_embedding() const { return embedding_; }  // [a, r]
  const GatedLayerWeights& layer(std::size_t i) const { return layers_.at(i); }
  const OutputHead& head() const { return head_; }

  // inputs[t] is the bin fed at step t (the previous sample under teacher
  // forcing); cond is [T, r]. Returns logits [T, a]; row t depends only on
  // inputs[0..t] and cond[0..t].
  nn::Tensor forward(std::span<const int> inputs, const nn::Tensor& cond) const;

 private:
  StackConfig config_;
  nn::Tensor embedding_;
  std::vector<GatedLayerWeights> layers_;
  OutputHead head_;
};

// Shifts audio right by one: result[0] = history_bin, result[t] = audio[t-1].
std::vector<int> teacher_forcing_inputs(std::span<const int> audio, int history_bin);

// Logits for every position of `audio`, where row t is the prediction of
// audio[t] from audio[< t] (and history_bin before the start).
nn::Tensor stack_forward(const WaveNetStack& stack, std::span<const int> audio, const nn::Tensor& cond,
                         int history_bin);

// Step-at-a-time evaluation of a WaveNetStack with per-layer input history.
// Feeding the same inputs and conditioning rows as forward() reproduces its
// logits exactly.
class IncrementalStack {
 public:
  explicit IncrementalStack(const WaveNetStack& stack);

  void reset();
  std::size_t position() const { return step_; }
  std::span<const double> step(int input_bin, std::span<const double> cond_row);

 private:
  const WaveNetStack* stack_;
  std::size_t step_ = 0;
  // Ring buffer of layer inputs, one per layer, capacity (K-1)*d + 1 rows.
  std::vector<std::vector<double>> history_;
  std::vector<std::size_t> capacity_;
  std::vector<double> x_, conv_, cond_, filter_, gate_, z_, proj_, skip_, total_, hidden_, logits_;
};

}  // namespace ssws::wavenet
