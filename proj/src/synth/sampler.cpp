#include "ssws/synth/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "ssws/audio/mulaw.hpp"

namespace ssws::synth {

int gumbel_sample(std::span<const double> logits, std::mt19937_64& rng, double temperature) {
  if (logits.empty()) throw std::invalid_argument("gumbel_sample: no logits");
  if (!(temperature > 0.0)) throw std::invalid_argument("gumbel_sample: temperature must be positive");
  constexpr double kEps = 1e-12;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!std::isfinite(logits[i])) throw std::domain_error("gumbel_sample: non-finite logit");
    const double u = std::clamp(uniform(rng), kEps, 1.0 - kEps);
    const double score = logits[i] / temperature - std::log(-std::log(u));
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(i);
    }
  }
  return best;
}

SynthesisResult synthesize(const cond::FrameFeatures& features, const wavenet::Model& model,
                           const SamplerConfig& config, const std::function<void(const ChunkTrace&)>& on_chunk) {
  const auto& mc = model.config();
  features.validate();
  if (features.frames < 1) throw std::invalid_argument("synthesize: no frames");
  if (features.hop_size != mc.hop_size)
    throw std::invalid_argument("synthesize: feature hop " + std::to_string(features.hop_size) +
                                " does not match model hop " + std::to_string(mc.hop_size));
  if (model.conditioning().config().input_dims != cond::kFeatureDims)
    throw std::invalid_argument("synthesize: model conditioning width does not match feature width");
  const auto& layout = config.layout;
  const auto hop = static_cast<std::size_t>(mc.hop_size);
  const std::size_t r = mc.stack.residual_channels;
  const audio::MulawCodec codec(static_cast<int>(mc.stack.quantization_bins));
  const int silence = codec.silence_bin();

  nn::NoGradGuard no_grad;
  std::mt19937_64 rng(config.seed);
  wavenet::IncrementalStack stepper(model.stack());
  std::vector<int> bins(features.samples(), silence);
  auto bin_at = [&](std::ptrdiff_t i) { return i >= 0 ? bins[static_cast<std::size_t>(i)] : silence; };

  std::size_t index = 0;
  for (std::size_t begin = 0; begin < features.frames; begin += layout.content_frames, ++index) {
    const std::size_t end = std::min(begin + layout.content_frames, features.frames);
    const auto first_frame = static_cast<std::ptrdiff_t>(begin) - static_cast<std::ptrdiff_t>(layout.history_frames);
    auto window = features.window(first_frame, layout.frames());
    nn::Tensor cond = model.conditioning().forward(window.to_tensor(), hop);
    auto cond_data = cond.data();

    ChunkTrace trace;
    trace.chunk = index;
    stepper.reset();
    const std::ptrdiff_t s0 = first_frame * static_cast<std::ptrdiff_t>(hop);
    const std::size_t history = layout.history_frames * hop;
    for (std::size_t i = 0; i < history; ++i) {
      const auto g = s0 + static_cast<std::ptrdiff_t>(i);
      stepper.step(bin_at(g - 1), cond_data.subspan(i * r, r));
      trace.history.push_back(bin_at(g));
    }
    for (std::size_t i = history; i < history + (end - begin) * hop; ++i) {
      const auto g = s0 + static_cast<std::ptrdiff_t>(i);
      auto logits = stepper.step(bin_at(g - 1), cond_data.subspan(i * r, r));
      const int bin = gumbel_sample(logits, rng, config.temperature);
      bins[static_cast<std::size_t>(g)] = bin;
      trace.generated.push_back(bin);
    }
    if (on_chunk) on_chunk(trace);
  }

  SynthesisResult result;
  result.audio.sample_rate = mc.sample_rate;
  result.audio.samples = codec.decode(bins);
  result.bins = std::move(bins);
  return result;
}

}  // namespace ssws::synth
