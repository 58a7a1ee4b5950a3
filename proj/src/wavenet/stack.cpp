#include "ssws/wavenet/stack.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ssws/nn/ops.hpp"

namespace ssws::wavenet {

using nn::Tensor;

std::size_t StackConfig::dilation(std::size_t layer_index) const {
  return std::size_t{1} << (layer_index % layers_per_block);
}

void StackConfig::validate() const {
  if (blocks < 1 || layers_per_block < 1 || residual_channels < 1 || skip_channels < 1 || quantization_bins < 2 ||
      kernel_size < 1)
    throw std::invalid_argument("stack config values must be positive (bins >= 2)");
  if (layers_per_block > 30) throw std::invalid_argument("layers_per_block too large");
}

std::size_t receptive_field(const StackConfig& config) {
  config.validate();
  return 1 + (config.kernel_size - 1) * config.blocks * ((std::size_t{1} << config.layers_per_block) - 1);
}

LayerOutput gated_layer(const Tensor& x, const Tensor& cond, const GatedLayerWeights& w, std::size_t dilation) {
  if (x.rank() != 2 || cond.rank() != 2 || x.rows() != cond.rows())
    throw nn::ShapeError("gated_layer: input " + nn::shape_string(x.shape()) + " and conditioning " +
                         nn::shape_string(cond.shape()) + " must have the same number of rows");
  Tensor filter = nn::add(nn::conv1d_causal(x, w.filter_kernel, dilation, w.filter_bias), nn::affine(cond, w.cond_filter));
  Tensor gate = nn::add(nn::conv1d_causal(x, w.gate_kernel, dilation, w.gate_bias), nn::affine(cond, w.cond_gate));
  Tensor z = nn::mul(nn::tanh(filter), nn::sigmoid(gate));
  return {nn::add(x, nn::affine(z, w.residual_weight, w.residual_bias)), nn::affine(z, w.skip_weight, w.skip_bias)};
}

WaveNetStack::WaveNetStack(const StackConfig& config, nn::ParameterSet& params, std::mt19937_64& rng,
                           const std::string& prefix)
    : config_(config) {
  config.validate();
  const std::size_t r = config.residual_channels, s = config.skip_channels, a = config.quantization_bins,
                    k = config.kernel_size;
  embedding_ = params.add_uniform(prefix + "input_embedding", {a, r}, a, rng);
  for (std::size_t i = 0; i < config.layer_count(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "layer%02zu.", i);
    const std::string base = prefix + name;
    GatedLayerWeights w;
    w.filter_kernel = params.add_uniform(base + "filter_kernel", {k, r, r}, k * r, rng);
    w.filter_bias = params.add_uniform(base + "filter_bias", {r}, k * r, rng);
    w.gate_kernel = params.add_uniform(base + "gate_kernel", {k, r, r}, k * r, rng);
    w.gate_bias = params.add_uniform(base + "gate_bias", {r}, k * r, rng);
    w.cond_filter = params.add_uniform(base + "cond_filter", {r, r}, r, rng);
    w.cond_gate = params.add_uniform(base + "cond_gate", {r, r}, r, rng);
    w.residual_weight = params.add_uniform(base + "residual_weight", {r, r}, r, rng);
    w.residual_bias = params.add_uniform(base + "residual_bias", {r}, r, rng);
    w.skip_weight = params.add_uniform(base + "skip_weight", {r, s}, r, rng);
    w.skip_bias = params.add_uniform(base + "skip_bias", {s}, r, rng);
    layers_.push_back(std::move(w));
  }
  head_.hidden_weight = params.add_uniform(prefix + "head.hidden_weight", {s, s}, s, rng);
  head_.hidden_bias = params.add_uniform(prefix + "head.hidden_bias", {s}, s, rng);
  head_.output_weight = params.add_uniform(prefix + "head.output_weight", {s, a}, s, rng);
  head_.output_bias = params.add_uniform(prefix + "head.output_bias", {a}, s, rng);
}

Tensor WaveNetStack::forward(std::span<const int> inputs, const Tensor& cond) const {
  if (cond.rank() != 2 || cond.rows() != inputs.size() || cond.cols() != config_.residual_channels)
    throw nn::ShapeError("stack: conditioning " + nn::shape_string(cond.shape()) + " does not match " +
                         std::to_string(inputs.size()) + " inputs x " + std::to_string(config_.residual_channels) +
                         " channels");
  Tensor h = nn::embedding(inputs, embedding_);
  Tensor skip_total;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    LayerOutput out = gated_layer(h, cond, layers_[i], config_.dilation(i));
    h = out.residual;
    skip_total = skip_total.defined() ? nn::add(skip_total, out.skip) : out.skip;
  }
  Tensor hidden = nn::relu(nn::affine(nn::relu(skip_total), head_.hidden_weight, head_.hidden_bias));
  return nn::affine(hidden, head_.output_weight, head_.output_bias);
}

std::vector<int> teacher_forcing_inputs(std::span<const int> audio, int history_bin) {
  std::vector<int> inputs(audio.size());
  if (!audio.empty()) {
    inputs[0] = history_bin;
    std::copy(audio.begin(), audio.end() - 1, inputs.begin() + 1);
  }
  return inputs;
}

Tensor stack_forward(const WaveNetStack& stack, std::span<const int> audio, const Tensor& cond, int history_bin) {
  if (cond.rank() != 2 || cond.rows() != audio.size())
    throw nn::ShapeError("stack_forward: " + std::to_string(audio.size()) + " samples but conditioning has shape " +
                         nn::shape_string(cond.shape()));
  auto inputs = teacher_forcing_inputs(audio, history_bin);
  return stack.forward(inputs, cond);
}

IncrementalStack::IncrementalStack(const WaveNetStack& stack) : stack_(&stack) {
  const auto& c = stack.config();
  for (std::size_t i = 0; i < c.layer_count(); ++i) {
    capacity_.push_back((c.kernel_size - 1) * c.dilation(i) + 1);
    history_.emplace_back(capacity_.back() * c.residual_channels, 0.0);
  }
  const std::size_t r = c.residual_channels, s = c.skip_channels;
  x_.resize(r);
  conv_.resize(r);
  cond_.resize(r);
  filter_.resize(r);
  gate_.resize(r);
  z_.resize(r);
  proj_.resize(r);
  skip_.resize(s);
  total_.resize(s);
  hidden_.resize(s);
  logits_.resize(c.quantization_bins);
}

void IncrementalStack::reset() {
  step_ = 0;
  for (auto& h : history_) std::fill(h.begin(), h.end(), 0.0);
}

std::span<const double> IncrementalStack::step(int input_bin, std::span<const double> cond_row) {
  const auto& c = stack_->config();
  const std::size_t r = c.residual_channels, s = c.skip_channels, a = c.quantization_bins, taps = c.kernel_size;
  if (cond_row.size() != r) throw nn::ShapeError("incremental step: conditioning row width mismatch");
  if (input_bin < 0 || static_cast<std::size_t>(input_bin) >= a) throw std::out_of_range("input bin out of range");

  auto emb = stack_->input_embedding().data();
  std::copy_n(emb.data() + input_bin * r, r, x_.begin());

  using nn::kernels::gemv_accumulate;
  for (std::size_t i = 0; i < c.layer_count(); ++i) {
    const auto& w = stack_->layer(i);
    const std::size_t d = c.dilation(i), cap = capacity_[i];
    auto& hist = history_[i];
    std::copy(x_.begin(), x_.end(), hist.begin() + (step_ % cap) * r);

    auto conv = [&](const Tensor& kernel, const Tensor& bias, std::vector<double>& out) {
      std::copy(bias.data().begin(), bias.data().end(), out.begin());
      for (std::size_t k = 0; k < taps; ++k) {
        const std::size_t lag = (taps - 1 - k) * d;
        if (lag > step_) continue;
        gemv_accumulate(hist.data() + ((step_ - lag) % cap) * r, r, kernel.data().data() + k * r * r, r, out.data());
      }
    };
    auto cond_proj = [&](const Tensor& weight, std::vector<double>& out) {
      std::fill(out.begin(), out.end(), 0.0);
      gemv_accumulate(cond_row.data(), r, weight.data().data(), r, out.data());
    };

    conv(w.filter_kernel, w.filter_bias, conv_);
    cond_proj(w.cond_filter, cond_);
    for (std::size_t j = 0; j < r; ++j) filter_[j] = conv_[j] + cond_[j];
    conv(w.gate_kernel, w.gate_bias, conv_);
    cond_proj(w.cond_gate, cond_);
    for (std::size_t j = 0; j < r; ++j) gate_[j] = conv_[j] + cond_[j];
    for (std::size_t j = 0; j < r; ++j) z_[j] = std::tanh(filter_[j]) * nn::kernels::sigmoid(gate_[j]);

    std::copy(w.residual_bias.data().begin(), w.residual_bias.data().end(), proj_.begin());
    gemv_accumulate(z_.data(), r, w.residual_weight.data().data(), r, proj_.data());
    std::copy(w.skip_bias.data().begin(), w.skip_bias.data().end(), skip_.begin());
    gemv_accumulate(z_.data(), r, w.skip_weight.data().data(), s, skip_.data());

    for (std::size_t j = 0; j < r; ++j) x_[j] = x_[j] + proj_[j];
    if (i == 0)
      std::copy(skip_.begin(), skip_.end(), total_.begin());
    else
      for (std::size_t j = 0; j < s; ++j) total_[j] = total_[j] + skip_[j];
  }

  const auto& head = stack_->head();
  for (auto& v : total_) v = v > 0.0 ? v : 0.0;
  std::copy(head.hidden_bias.data().begin(), head.hidden_bias.data().end(), hidden_.begin());
  gemv_accumulate(total_.data(), s, head.hidden_weight.data().data(), s, hidden_.data());
  for (auto& v : hidden_) v = v > 0.0 ? v : 0.0;
  std::copy(head.output_bias.data().begin(), head.output_bias.data().end(), logits_.begin());
  gemv_accumulate(hidden_.data(), s, head.output_weight.data().data(), a, logits_.data());

  ++step_;
  return logits_;
}

}  // namespace ssws::wavenet
