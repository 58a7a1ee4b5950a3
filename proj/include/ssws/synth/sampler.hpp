#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ssws/audio/wav.hpp"
#include "ssws/cond/features.hpp"
#include "ssws/train/chunk.hpp"
#include "ssws/wavenet/model.hpp"

namespace ssws::synth {

struct SamplerConfig {
  std::uint64_t seed = 0;
  train::ChunkLayout layout;
  double temperature = 1.0;
};

// argmax_i(logits[i] / temperature + g_i) with g_i = -ln(-ln(u_i)), u_i
// uniform and clamped to [1e-12, 1 - 1e-12]. Equivalent to drawing from
// softmax(logits / temperature). Throws std::domain_error on a non-finite logit.
int gumbel_sample(std::span<const double> logits, std::mt19937_64& rng, double temperature = 1.0);

// What one chunk saw and produced, for instrumentation.
struct ChunkTrace {
  std::size_t chunk = 0;
  std::vector<int> history;    // bins occupying the chunk's history frames
  std::vector<int> generated;  // bins sampled for its content frames
};

struct SynthesisResult {
  audio::AudioBuffer audio;
  std::vector<int> bins;
};

// Chunk-by-chunk autoregressive generation. Each chunk runs the
// conditioning network over its full window, replays its history frames
// (previously generated samples, silence before the start) through the stack,
// then samples its content frames one at a time. Output holds
// frames * hop samples.
SynthesisResult synthesize(const cond::FrameFeatures& features, const wavenet::Model& model,
                           const SamplerConfig& config,
                           const std::function<void(const ChunkTrace&)>& on_chunk = {});

}  // namespace ssws::synth
