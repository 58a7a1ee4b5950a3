#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ssws/cond/features.hpp"
#include "ssws/nn/tensor.hpp"

namespace ssws::train {

// Frame layout of one training/synthesis window.
struct ChunkLayout {
  std::size_t history_frames = 35;
  std::size_t content_frames = 120;
  std::size_t future_frames = 10;

  std::size_t frames() const { return history_frames + content_frames + future_frames; }
};

// One window over an utterance. Rows outside the utterance are padding:
// zero features and the silence bin.
struct Chunk {
  std::size_t index = 0;
  std::ptrdiff_t first_frame = 0;  // utterance frame at chunk row 0; negative at the start
  std::size_t content_begin = 0;   // utterance frames [content_begin, content_end)
  std::size_t content_end = 0;
  int hop_size = 1;
  cond::FrameFeatures features;  // layout.frames() rows
  std::vector<int> inputs;       // network input per sample (previous sample)
  std::vector<int> targets;      // sample to predict
  std::vector<double> mask;      // 1 on content samples, else 0

  std::ptrdiff_t first_sample() const { return first_frame * hop_size; }
  std::size_t content_samples() const { return (content_end - content_begin) * hop_size; }
  // Offset of the first content sample inside the chunk.
  std::size_t content_offset() const {
    return static_cast<std::size_t>(static_cast<std::ptrdiff_t>(content_begin) - first_frame) * hop_size;
  }
};

// Splits an utterance into chunks whose content regions advance by
// layout.content_frames and tile the utterance exactly once. History before
// the utterance and future frames past its end are padded; the last chunk
// may hold a shorter content region.
//
// `audio` holds frames * hop encoded samples. If `receptive_field` > 0, the
// history span (history_frames * hop samples) must cover it.
std::vector<Chunk> chunk_utterance(const cond::FrameFeatures& features, std::span<const int> audio,
                                   int hop_size, int silence_bin, std::size_t receptive_field = 0,
                                   const ChunkLayout& layout = {});

// Mean cross-entropy over positions with nonzero mask. Throws if the mask
// selects nothing. A positive `normalizer` replaces the mask total, which
// lets chunks of one batch share a denominator.
nn::Tensor masked_loss(const nn::Tensor& logits, std::span<const int> targets, std::span<const double> mask,
                       double normalizer = 0.0);

}  // namespace ssws::train
