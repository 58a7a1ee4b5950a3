#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace ssws::audio {

inline constexpr int kDefaultSampleRate = 24000;

struct AudioBuffer {
  int sample_rate = kDefaultSampleRate;
  std::vector<double> samples;  // each in [-1, 1]

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
  // Throws std::invalid_argument if an invariant is broken.
  void validate() const;
};

class WavFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// 16-bit little-endian PCM, mono only.
AudioBuffer read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioBuffer& audio);

std::vector<char> encode_wav(const AudioBuffer& audio);
AudioBuffer decode_wav(const std::vector<char>& bytes);

}  // namespace ssws::audio
