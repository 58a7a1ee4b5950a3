#include "ssws/train/chunk.hpp"

#include <stdexcept>
#include <string>

#include "ssws/nn/ops.hpp"

namespace ssws::train {

std::vector<Chunk> chunk_utterance(const cond::FrameFeatures& features, std::span<const int> audio, int hop_size,
                                   int silence_bin, std::size_t receptive_field, const ChunkLayout& layout) {
  if (features.frames < 1) throw std::invalid_argument("cannot chunk an utterance with no frames");
  if (hop_size < 1) throw std::invalid_argument("hop size must be >= 1");
  if (layout.content_frames < 1) throw std::invalid_argument("chunk content must hold at least one frame");
  const auto hop = static_cast<std::size_t>(hop_size);
  if (audio.size() != features.frames * hop)
    throw std::invalid_argument("audio has " + std::to_string(audio.size()) + " samples, expected frames x hop = " +
                                std::to_string(features.frames * hop));
  if (receptive_field > 0 && layout.history_frames * hop < receptive_field)
    throw std::invalid_argument("history span of " + std::to_string(layout.history_frames * hop) +
                                " samples does not cover the receptive field of " + std::to_string(receptive_field));

  const std::size_t total_frames = layout.frames();
  const std::size_t span = total_frames * hop;
  const auto n = static_cast<std::ptrdiff_t>(audio.size());
  auto sample_at = [&](std::ptrdiff_t i) { return (i >= 0 && i < n) ? audio[i] : silence_bin; };

  std::vector<Chunk> chunks;
  for (std::size_t begin = 0; begin < features.frames; begin += layout.content_frames) {
    Chunk c;
    c.index = chunks.size();
    c.hop_size = hop_size;
    c.content_begin = begin;
    c.content_end = std::min(begin + layout.content_frames, features.frames);
    c.first_frame = static_cast<std::ptrdiff_t>(begin) - static_cast<std::ptrdiff_t>(layout.history_frames);
    c.features = features.window(c.first_frame, total_frames);

    const std::ptrdiff_t s0 = c.first_sample();
    c.inputs.resize(span);
    c.targets.resize(span);
    c.mask.assign(span, 0.0);
    for (std::size_t i = 0; i < span; ++i) {
      const auto g = s0 + static_cast<std::ptrdiff_t>(i);
      c.targets[i] = sample_at(g);
      c.inputs[i] = sample_at(g - 1);
    }
    const std::size_t off = c.content_offset();
    for (std::size_t i = 0; i < c.content_samples(); ++i) c.mask[off + i] = 1.0;
    chunks.push_back(std::move(c));
  }
  return chunks;
}

nn::Tensor masked_loss(const nn::Tensor& logits, std::span<const int> targets, std::span<const double> mask,
                       double normalizer) {
  if (mask.size() != targets.size()) throw nn::ShapeError("masked_loss: mask and targets differ in length");
  double total = 0.0;
  for (double m : mask) total += m;
  if (total <= 0.0) throw std::invalid_argument("masked_loss: mask selects no positions");
  return nn::cross_entropy(logits, targets, mask, normalizer > 0.0 ? normalizer : total);
}

}  // namespace ssws::train
