#include "ssws/nn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ssws::nn {

using detail::Node;
using detail::wants_grad;

namespace kernels {

void gemv_accumulate(const double* x, std::size_t in, const double* w, std::size_t out, double* y) {
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    const double* row = w + i * out;
    for (std::size_t j = 0; j < out; ++j) y[j] += xi * row[j];
  }
}

}  // namespace kernels

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
}

void require_matrix(const Tensor& x, const char* op) {
  if (x.rank() != 2) throw ShapeError(std::string(op) + ": expected a matrix, got " + shape_string(x.shape()));
}

// dx[i] += sum_j w[i * out + j] * dy[j]
void gemv_transpose_accumulate(const double* dy, std::size_t out, const double* w, std::size_t in, double* dx) {
  for (std::size_t i = 0; i < in; ++i) {
    const double* row = w + i * out;
    double acc = 0.0;
    for (std::size_t j = 0; j < out; ++j) acc += row[j] * dy[j];
    dx[i] += acc;
  }
}

// dw[i * out + j] += x[i] * dy[j]
void outer_accumulate(const double* x, std::size_t in, const double* dy, std::size_t out, double* dw) {
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    double* row = dw + i * out;
    for (std::size_t j = 0; j < out; ++j) row[j] += xi * dy[j];
  }
}

template <class Fn, class Deriv>
Tensor unary(const Tensor& x, Fn fn, Deriv deriv_from_output) {
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i]);
  auto xn = x.ptr();
  return detail::make_result(x.shape(), std::move(out), {x}, [xn, deriv_from_output](Node& self) {
    auto& gx = xn->ensure_grad();
    for (std::size_t i = 0; i < gx.size(); ++i)
      gx[i] += self.grad[i] * deriv_from_output(xn->value[i], self.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  auto an = a.ptr(), bn = b.ptr();
  return detail::make_result(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    for (auto* n : {an.get(), bn.get()}) {
      if (!n->requires_grad) continue;
      auto& g = n->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto av = a.data(), bv = b.data();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  auto an = a.ptr(), bn = b.ptr();
  return detail::make_result(a.shape(), std::move(out), {a, b}, [an, bn](Node& self) {
    if (an->requires_grad) {
      auto& g = an->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bn->value[i];
    }
    if (bn->requires_grad) {
      auto& g = bn->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * an->value[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  return unary(x, [factor](double v) { return v * factor; }, [factor](double, double) { return factor; });
}

Tensor sigmoid(const Tensor& x) {
  return unary(x, kernels::sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& x) {
  return unary(x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor relu(const Tensor& x) {
  return unary(x, [](double v) { return v > 0.0 ? v : 0.0; }, [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Tensor softmax(const Tensor& x) {
  const std::size_t rows = x.rows(), cols = x.cols();
  auto in = x.data();
  std::vector<double> out(in.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = in.data() + r * cols;
    double* o = out.data() + r * cols;
    double mx = *std::max_element(row, row + cols);
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += (o[c] = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) o[c] /= total;
  }
  auto xn = x.ptr();
  return detail::make_result(x.shape(), std::move(out), {x}, [xn, rows, cols](Node& self) {
    auto& gx = xn->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * cols;
      const double* gy = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += y[c] * gy[c];
      for (std::size_t c = 0; c < cols; ++c) gx[r * cols + c] += y[c] * (gy[c] - dot);
    }
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  auto xn = x.ptr();
  return detail::make_result({1}, {total}, {x}, [xn](Node& self) {
    auto& gx = xn->ensure_grad();
    for (auto& g : gx) g += self.grad[0];
  });
}

Tensor affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_matrix(x, "affine");
  require_matrix(weight, "affine");
  const std::size_t rows = x.rows(), in = x.cols(), out = weight.cols();
  if (weight.rows() != in)
    throw ShapeError("affine: input " + shape_string(x.shape()) + " vs weight " + shape_string(weight.shape()));
  if (bias.defined() && bias.size() != out)
    throw ShapeError("affine: bias " + shape_string(bias.shape()) + " for " + std::to_string(out) + " outputs");

  std::vector<double> y(rows * out, 0.0);
  auto xv = x.data(), wv = weight.data();
  for (std::size_t t = 0; t < rows; ++t) {
    double* yt = y.data() + t * out;
    if (bias.defined()) std::copy(bias.data().begin(), bias.data().end(), yt);
    kernels::gemv_accumulate(xv.data() + t * in, in, wv.data(), out, yt);
  }
  auto xn = x.ptr(), wn = weight.ptr(), bn = bias.ptr();
  return detail::make_result({rows, out}, std::move(y), {x, weight, bias}, [=](Node& self) {
    const double* gy = self.grad.data();
    if (wants_grad(xn)) {
      auto& gx = xn->ensure_grad();
      for (std::size_t t = 0; t < rows; ++t)
        gemv_transpose_accumulate(gy + t * out, out, wn->value.data(), in, gx.data() + t * in);
    }
    if (wants_grad(wn)) {
      auto& gw = wn->ensure_grad();
      for (std::size_t t = 0; t < rows; ++t)
        outer_accumulate(xn->value.data() + t * in, in, gy + t * out, out, gw.data());
    }
    if (wants_grad(bn)) {
      auto& gb = bn->ensure_grad();
      for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t j = 0; j < out; ++j) gb[j] += gy[t * out + j];
    }
  });
}

Tensor conv1d_causal(const Tensor& x, const Tensor& kernel, std::size_t dilation, const Tensor& bias) {
  if (dilation < 1) throw std::invalid_argument("conv1d_causal: dilation must be >= 1");
  require_matrix(x, "conv1d_causal");
  if (kernel.rank() != 3) throw ShapeError("conv1d_causal: kernel must be [K, in, out]");
  const std::size_t taps = kernel.shape()[0], in = kernel.shape()[1], out = kernel.shape()[2];
  const std::size_t rows = x.rows();
  if (x.cols() != in)
    throw ShapeError("conv1d_causal: input " + shape_string(x.shape()) + " vs kernel " + shape_string(kernel.shape()));
  if (bias.defined() && bias.size() != out) throw ShapeError("conv1d_causal: bias size mismatch");

  std::vector<double> y(rows * out, 0.0);
  auto xv = x.data(), kv = kernel.data();
  for (std::size_t t = 0; t < rows; ++t) {
    double* yt = y.data() + t * out;
    if (bias.defined()) std::copy(bias.data().begin(), bias.data().end(), yt);
    for (std::size_t k = 0; k < taps; ++k) {
      const std::size_t lag = (taps - 1 - k) * dilation;
      if (lag > t) continue;
      kernels::gemv_accumulate(xv.data() + (t - lag) * in, in, kv.data() + k * in * out, out, yt);
    }
  }
  auto xn = x.ptr(), kn = kernel.ptr(), bn = bias.ptr();
  return detail::make_result({rows, out}, std::move(y), {x, kernel, bias}, [=](Node& self) {
    const double* gy = self.grad.data();
    for (std::size_t k = 0; k < taps; ++k) {
      const std::size_t lag = (taps - 1 - k) * dilation;
      const double* wk = kn->value.data() + k * in * out;
      for (std::size_t t = lag; t < rows; ++t) {
        if (wants_grad(xn))
          gemv_transpose_accumulate(gy + t * out, out, wk, in, xn->ensure_grad().data() + (t - lag) * in);
        if (wants_grad(kn))
          outer_accumulate(xn->value.data() + (t - lag) * in, in, gy + t * out, out,
                           kn->ensure_grad().data() + k * in * out);
      }
    }
    if (wants_grad(bn)) {
      auto& gb = bn->ensure_grad();
      for (std::size_t t = 0; t < rows; ++t)
        for (std::size_t j = 0; j < out; ++j) gb[j] += gy[t * out + j];
    }
  });
}

Tensor embedding(std::span<const int> indices, const Tensor& table) {
  require_matrix(table, "embedding");
  const std::size_t vocab = table.rows(), width = table.cols(), rows = indices.size();
  std::vector<double> y(rows * width);
  auto tv = table.data();
  for (std::size_t t = 0; t < rows; ++t) {
    const int idx = indices[t];
    if (idx < 0 || static_cast<std::size_t>(idx) >= vocab)
      throw std::out_of_range("embedding: index " + std::to_string(idx) + " outside table");
    std::copy_n(tv.data() + idx * width, width, y.data() + t * width);
  }
  std::vector<int> idx(indices.begin(), indices.end());
  auto tn = table.ptr();
  return detail::make_result({rows, width}, std::move(y), {table}, [tn, idx = std::move(idx), width](Node& self) {
    auto& g = tn->ensure_grad();
    for (std::size_t t = 0; t < idx.size(); ++t)
      for (std::size_t j = 0; j < width; ++j) g[idx[t] * width + j] += self.grad[t * width + j];
  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_matrix(a, "concat_cols");
  require_matrix(b, "concat_cols");
  const std::size_t rows = a.rows(), ca = a.cols(), cb = b.cols();
  if (b.rows() != rows) throw ShapeError("concat_cols: row count mismatch");
  std::vector<double> y(rows * (ca + cb));
  auto av = a.data(), bv = b.data();
  for (std::size_t t = 0; t < rows; ++t) {
    std::copy_n(av.data() + t * ca, ca, y.data() + t * (ca + cb));
    std::copy_n(bv.data() + t * cb, cb, y.data() + t * (ca + cb) + ca);
  }
  auto an = a.ptr(), bn = b.ptr();
  return detail::make_result({rows, ca + cb}, std::move(y), {a, b}, [=](Node& self) {
    for (std::size_t t = 0; t < rows; ++t) {
      const double* g = self.grad.data() + t * (ca + cb);
      if (an->requires_grad) {
        auto& ga = an->ensure_grad();
        for (std::size_t j = 0; j < ca; ++j) ga[t * ca + j] += g[j];
      }
      if (bn->requires_grad) {
        auto& gb = bn->ensure_grad();
        for (std::size_t j = 0; j < cb; ++j) gb[t * cb + j] += g[ca + j];
      }
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  require_matrix(x, "slice_rows");
  if (begin > end || end > x.rows()) throw ShapeError("slice_rows: range out of bounds");
  const std::size_t cols = x.cols();
  auto xv = x.data();
  std::vector<double> y(xv.begin() + begin * cols, xv.begin() + end * cols);
  auto xn = x.ptr();
  return detail::make_result({end - begin, cols}, std::move(y), {x}, [xn, begin, cols](Node& self) {
    auto& g = xn->ensure_grad();
    for (std::size_t i = 0; i < self.grad.size(); ++i) g[begin * cols + i] += self.grad[i];
  });
}

Tensor cross_entropy(const Tensor& logits, std::span<const int> targets, std::span<const double> weights,
                     double normalizer) {
  const std::size_t rows = logits.rows(), cols = logits.cols();
  if (targets.size() != rows) throw ShapeError("cross_entropy: target count does not match logits rows");
  if (!weights.empty() && weights.size() != rows) throw ShapeError("cross_entropy: weight count mismatch");
  if (normalizer <= 0.0) {
    normalizer = weights.empty() ? static_cast<double>(rows) : 0.0;
    for (double w : weights) normalizer += w;
  }
  if (!(normalizer > 0.0)) throw std::invalid_argument("cross_entropy: total weight must be positive");

  auto lv = logits.data();
  std::vector<double> probs(rows * cols);
  double total = 0.0;
  for (std::size_t t = 0; t < rows; ++t) {
    const int target = targets[t];
    if (target < 0 || static_cast<std::size_t>(target) >= cols)
      throw std::out_of_range("cross_entropy: target bin out of range");
    const double* row = lv.data() + t * cols;
    double mx = *std::max_element(row, row + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) z += (probs[t * cols + c] = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) probs[t * cols + c] /= z;
    const double w = weights.empty() ? 1.0 : weights[t];
    if (w != 0.0) total += w * (mx + std::log(z) - row[target]);
  }
  const double loss = total / normalizer;

  std::vector<int> tgt(targets.begin(), targets.end());
  std::vector<double> wts(weights.begin(), weights.end());
  auto ln = logits.ptr();
  return detail::make_result(
      {1}, {loss}, {logits},
      [ln, probs = std::move(probs), tgt = std::move(tgt), wts = std::move(wts), normalizer, cols](Node& self) {
        auto& g = ln->ensure_grad();
        const double upstream = self.grad[0] / normalizer;
        for (std::size_t t = 0; t < tgt.size(); ++t) {
          const double w = wts.empty() ? 1.0 : wts[t];
          if (w == 0.0) continue;
          const double k = upstream * w;
          for (std::size_t c = 0; c < cols; ++c) g[t * cols + c] += k * probs[t * cols + c];
          g[t * cols + tgt[t]] -= k;
        }
      });
}

}  // namespace ssws::nn
