#pragma once

#include <cmath>
#include <span>

#include "ssws/nn/tensor.hpp"

namespace ssws::nn {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);

Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
// Row-wise.
Tensor softmax(const Tensor& x);

Tensor sum(const Tensor& x);

// x: [T, in], weight: [in, out], bias: [out] or undefined.
Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias = {});

// x: [T, in], kernel: [K, in, out], bias: [out] or undefined.
// out[t] = bias + sum_k kernel[k] . x[t - (K-1-k) * dilation]; samples before
// t = 0 are zero. The last tap sees the current step.
Tensor conv1d_causal(const Tensor& x, const Tensor& kernel, std::size_t dilation,
                     const Tensor& bias = {});

// Row lookup: out[t] = table[indices[t]]. Equivalent to a one-hot input
// followed by a 1x1 convolution without bias.
Tensor embedding(std::span<const int> indices, const Tensor& table);

// [T, a] and [T, b] -> [T, a + b].
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end);

// Weighted cross-entropy against integer targets, divided by `normalizer`:
// sum_t w_t * (logsumexp(logits[t]) - logits[t][target_t]) / normalizer.
// Empty `weights` means all ones; normalizer <= 0 means sum of weights.
Tensor cross_entropy(const Tensor& logits, std::span<const int> targets,
                     std::span<const double> weights = {}, double normalizer = 0.0);

// Shared per-row kernels. The incremental sampler calls these directly so its
// arithmetic matches the batched ops bit for bit.
namespace kernels {

// y[j] += sum_i x[i] * w[i * out + j], accumulated in increasing i.
void gemv_accumulate(const double* x, std::size_t in, const double* w, std::size_t out, double* y);

inline double sigmoid(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace kernels

}  // namespace ssws::nn
