#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ssws/audio/wav.hpp"
#include "ssws/nn/tensor.hpp"

namespace ssws::cond {

inline constexpr std::size_t kLinguisticDims = 86;
inline constexpr std::size_t kVoicingColumn = 86;
inline constexpr std::size_t kLogF0Column = 87;
inline constexpr std::size_t kFeatureDims = 88;
inline constexpr int kDefaultHopSize = 120;

class FeatureFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Per-frame conditioning inputs: 86 linguistic context values, a voiced flag
// (0 or 1) and log-f0 in log-Hz. Unvoiced frames carry log-f0 = 0.
struct FrameFeatures {
  std::size_t frames = 0;
  int hop_size = kDefaultHopSize;
  std::vector<double> values;  // frames x 88, row-major

  double at(std::size_t frame, std::size_t column) const { return values[frame * kFeatureDims + column]; }
  double& at(std::size_t frame, std::size_t column) { return values[frame * kFeatureDims + column]; }
  bool voiced(std::size_t frame) const { return at(frame, kVoicingColumn) != 0.0; }
  std::size_t samples() const { return frames * static_cast<std::size_t>(hop_size); }

  // Frames [begin, begin + count) where out-of-range frames are all zero.
  FrameFeatures window(std::ptrdiff_t begin, std::size_t count) const;
  nn::Tensor to_tensor() const;
  void validate() const;
};

// Binary feature file: "SSWSFEAT", u32 version, u32 frames, u32 dims (88),
// u32 hop_size, then frames x dims little-endian f32.
void write_features(const std::string& path, const FrameFeatures& features);
FrameFeatures read_features(const std::string& path);

// Whitespace-separated text, one frame per line, 88 numbers per line.
// Lines starting with '#' are comments.
FrameFeatures parse_feature_text(const std::string& text, int hop_size);
FrameFeatures read_feature_text(const std::string& path, int hop_size);

struct PitchTrackerOptions {
  double min_f0 = 60.0;
  double max_f0 = 500.0;
  // Normalized autocorrelation peak needed to call a frame voiced.
  double voicing_threshold = 0.5;
  // Among lags scoring within this fraction of the best, the shortest wins
  // (suppresses picking a multiple of the true period).
  double octave_tolerance = 0.9;
};

struct PitchEstimate {
  bool voiced = false;
  double f0 = 0.0;
  double periodicity = 0.0;
};

// Normalized autocorrelation pitch tracker. Frame i is analysed over a
// window centred on samples [i * hop, (i + 1) * hop).
std::vector<PitchEstimate> track_pitch(const audio::AudioBuffer& audio, int hop_size,
                                       const PitchTrackerOptions& options = {});

// Stand-in for a text front end: pitch and voicing come from the tracker,
// the 86 linguistic columns are seeded smooth pseudo-random trajectories.
// Frame count is ceil(samples / hop).
FrameFeatures generate_synthetic_features(const audio::AudioBuffer& audio, std::uint64_t seed,
                                          int hop_size = kDefaultHopSize, const PitchTrackerOptions& options = {});

}  // namespace ssws::cond
