#include "ssws/cond/conditioning.hpp"

#include <cmath>

#include "ssws/nn/ops.hpp"

namespace ssws::cond {

using nn::Shape;
using nn::ShapeError;
using nn::Tensor;
using nn::detail::Node;

namespace {

void check_lstm_shapes(const Tensor& x, const LstmWeights& w) {
  if (x.rank() != 2) throw ShapeError("lstm: input must be [frames, dims]");
  if (x.rows() == 0) throw std::invalid_argument("lstm: at least one frame is required");
  const std::size_t h = w.recurrent_weight.rows();
  if (w.recurrent_weight.cols() != 4 * h || w.input_weight.cols() != 4 * h || w.bias.size() != 4 * h)
    throw ShapeError("lstm: gate weights must have 4H columns");
  if (w.input_weight.rows() != x.cols())
    throw ShapeError("lstm: input width " + std::to_string(x.cols()) + " vs weight " +
                     nn::shape_string(w.input_weight.shape()));
}

}  // namespace

Tensor lstm_sequence(const Tensor& x, const LstmWeights& w, bool reverse) {
  check_lstm_shapes(x, w);
  const std::size_t frames = x.rows(), in = x.cols(), h = w.hidden(), g4 = 4 * h;

  // Per processed step: activated gates [i f g o], cell state, tanh(cell).
  std::vector<double> gates(frames * g4), cell(frames * h), cell_tanh(frames * h), hidden(frames * h);
  std::vector<std::size_t> order(frames);
  for (std::size_t s = 0; s < frames; ++s) order[s] = reverse ? frames - 1 - s : s;

  auto xv = x.data(), wx = w.input_weight.data(), wh = w.recurrent_weight.data(), b = w.bias.data();
  std::vector<double> h_prev(h, 0.0), c_prev(h, 0.0);
  for (std::size_t s = 0; s < frames; ++s) {
    const std::size_t t = order[s];
    double* a = gates.data() + s * g4;
    std::copy(b.begin(), b.end(), a);
    nn::kernels::gemv_accumulate(xv.data() + t * in, in, wx.data(), g4, a);
    nn::kernels::gemv_accumulate(h_prev.data(), h, wh.data(), g4, a);
    for (std::size_t j = 0; j < h; ++j) {
      const double ig = nn::kernels::sigmoid(a[j]);
      const double fg = nn::kernels::sigmoid(a[h + j]);
      const double cg = std::tanh(a[2 * h + j]);
      const double og = nn::kernels::sigmoid(a[3 * h + j]);
      a[j] = ig;
      a[h + j] = fg;
      a[2 * h + j] = cg;
      a[3 * h + j] = og;
      const double c = fg * c_prev[j] + ig * cg;
      const double tc = std::tanh(c);
      cell[s * h + j] = c;
      cell_tanh[s * h + j] = tc;
      h_prev[j] = og * tc;
      c_prev[j] = c;
    }
    std::copy(h_prev.begin(), h_prev.end(), hidden.begin() + t * h);
  }

  auto xn = x.ptr(), wxn = w.input_weight.ptr(), whn = w.recurrent_weight.ptr(), bn = w.bias.ptr();
  return nn::detail::make_result(
      {frames, h}, std::move(hidden), {x, w.input_weight, w.recurrent_weight, w.bias},
      [=, gates = std::move(gates), cell = std::move(cell), cell_tanh = std::move(cell_tanh),
       order = std::move(order)](Node& self) {
        std::vector<double> dh_next(h, 0.0), dc_next(h, 0.0), da(g4);
        for (std::size_t s = frames; s-- > 0;) {
          const std::size_t t = order[s];
          const double* a = gates.data() + s * g4;
          for (std::size_t j = 0; j < h; ++j) {
            const double ig = a[j], fg = a[h + j], cg = a[2 * h + j], og = a[3 * h + j];
            const double tc = cell_tanh[s * h + j];
            const double c_before = s > 0 ? cell[(s - 1) * h + j] : 0.0;
            const double dh = self.grad[t * h + j] + dh_next[j];
            const double dc = dh * og * (1.0 - tc * tc) + dc_next[j];
            da[j] = dc * cg * ig * (1.0 - ig);
            da[h + j] = dc * c_before * fg * (1.0 - fg);
            da[2 * h + j] = dc * ig * (1.0 - cg * cg);
            da[3 * h + j] = dh * tc * og * (1.0 - og);
            dc_next[j] = dc * fg;
          }
          // Hidden state that fed this step.
          std::vector<double> h_before(h, 0.0);
          if (s > 0) {
            const std::size_t prev_t = order[s - 1];
            const double* ha = self.value.data() + prev_t * h;
            std::copy(ha, ha + h, h_before.begin());
          }
          if (nn::detail::wants_grad(xn)) {
            auto& gx = xn->ensure_grad();
            for (std::size_t i = 0; i < in; ++i) {
              const double* row = wxn->value.data() + i * g4;
              double acc = 0.0;
              for (std::size_t k = 0; k < g4; ++k) acc += row[k] * da[k];
              gx[t * in + i] += acc;
            }
          }
          if (nn::detail::wants_grad(wxn)) {
            auto& gw = wxn->ensure_grad();
            const double* xt = xn->value.data() + t * in;
            for (std::size_t i = 0; i < in; ++i) {
              if (xt[i] == 0.0) continue;
              for (std::size_t k = 0; k < g4; ++k) gw[i * g4 + k] += xt[i] * da[k];
            }
          }
          if (nn::detail::wants_grad(whn)) {
            auto& gw = whn->ensure_grad();
            for (std::size_t i = 0; i < h; ++i) {
              if (h_before[i] == 0.0) continue;
              for (std::size_t k = 0; k < g4; ++k) gw[i * g4 + k] += h_before[i] * da[k];
            }
          }
          if (nn::detail::wants_grad(bn)) {
            auto& gb = bn->ensure_grad();
            for (std::size_t k = 0; k < g4; ++k) gb[k] += da[k];
          }
          for (std::size_t i = 0; i < h; ++i) {
            const double* row = whn->value.data() + i * g4;
            double acc = 0.0;
            for (std::size_t k = 0; k < g4; ++k) acc += row[k] * da[k];
            dh_next[i] = acc;
          }
        }
      });
}

Tensor bilstm_layer(const Tensor& frames, const BiLstmWeights& w) {
  return nn::concat_cols(lstm_sequence(frames, w.forward, false), lstm_sequence(frames, w.backward, true));
}

Tensor project_embedding(const Tensor& stacked, const Tensor& weight, const Tensor& bias) {
  if (stacked.rank() != 2 || stacked.cols() != weight.rows())
    throw ShapeError("project_embedding: input " + nn::shape_string(stacked.shape()) + " vs weight " +
                     nn::shape_string(weight.shape()));
  return nn::affine(stacked, weight, bias);
}

Tensor upsample(const Tensor& frame_embedding, std::size_t hop) {
  if (hop < 1) throw std::invalid_argument("upsample: hop size must be >= 1");
  if (frame_embedding.rank() != 2) throw ShapeError("upsample: expected [frames, dims]");
  const std::size_t frames = frame_embedding.rows(), cols = frame_embedding.cols();
  auto src = frame_embedding.data();
  std::vector<double> out(frames * hop * cols);
  for (std::size_t f = 0; f < frames; ++f)
    for (std::size_t k = 0; k < hop; ++k)
      std::copy_n(src.data() + f * cols, cols, out.data() + (f * hop + k) * cols);
  auto fn = frame_embedding.ptr();
  return nn::detail::make_result({frames * hop, cols}, std::move(out), {frame_embedding},
                                 [fn, frames, hop, cols](Node& self) {
                                   auto& g = fn->ensure_grad();
                                   for (std::size_t f = 0; f < frames; ++f)
                                     for (std::size_t k = 0; k < hop; ++k)
                                       for (std::size_t c = 0; c < cols; ++c)
                                         g[f * cols + c] += self.grad[(f * hop + k) * cols + c];
                                 });
}

ConditioningNet::ConditioningNet(const ConditioningConfig& config, nn::ParameterSet& params,
                                 std::mt19937_64& rng, const std::string& prefix)
    : config_(config) {
  if (config.lstm_layers < 1 || config.lstm_hidden < 1 || config.embedding_dims < 1 || config.input_dims < 1)
    throw std::invalid_argument("conditioning config dimensions must be positive");
  const std::size_t h = config.lstm_hidden;
  std::size_t in = config.input_dims;
  for (std::size_t l = 0; l < config.lstm_layers; ++l) {
    BiLstmWeights layer;
    for (auto [dir, weights] : {std::pair{"fwd", &layer.forward}, std::pair{"bwd", &layer.backward}}) {
      const std::string base = prefix + "lstm" + std::to_string(l) + "." + dir + ".";
      weights->input_weight = params.add_uniform(base + "input_weight", {in, 4 * h}, h, rng);
      weights->recurrent_weight = params.add_uniform(base + "recurrent_weight", {h, 4 * h}, h, rng);
      weights->bias = params.add_uniform(base + "bias", {4 * h}, h, rng);
    }
    layers_.push_back(layer);
    in = 2 * h;
  }
  projection_weight_ = params.add_uniform(prefix + "projection.weight", {2 * h, config.embedding_dims}, 2 * h, rng);
  projection_bias_ = params.add_uniform(prefix + "projection.bias", {config.embedding_dims}, 2 * h, rng);
}

Tensor ConditioningNet::frame_embedding(const Tensor& frames) const {
  if (frames.rank() != 2 || frames.cols() != config_.input_dims)
    throw ShapeError("conditioning input must be [frames, " + std::to_string(config_.input_dims) + "]");
  Tensor x = frames;
  for (const auto& layer : layers_) x = bilstm_layer(x, layer);
  return project_embedding(x, projection_weight_, projection_bias_);
}

Tensor ConditioningNet::forward(const Tensor& frames, std::size_t hop) const {
  return upsample(frame_embedding(frames), hop);
}

}  // namespace ssws::cond
