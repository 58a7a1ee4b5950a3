#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace ssws::audio {

inline constexpr int kDefaultLevels = 1024;

// Index of a quantization bin, 0 <= value < levels.
class BinIndex {
 public:
  constexpr BinIndex() = default;
  explicit BinIndex(int value, int levels = kDefaultLevels);
  constexpr int value() const { return value_; }
  friend constexpr bool operator==(BinIndex, BinIndex) = default;

 private:
  int value_ = 0;
};

// μ-law companding onto `levels` uniform bins with μ = levels - 1.
// Encoding floors after offsetting, so boundary ties go to the upper bin;
// decoding returns the amplitude at the centre of the bin in the companded
// domain.
class MulawCodec {
 public:
  explicit MulawCodec(int levels = kDefaultLevels);

  int levels() const { return levels_; }
  double mu() const { return mu_; }
  int silence_bin() const { return levels_ / 2; }

  // Throws std::domain_error if |x| > 1 or x is NaN.
  int encode(double x) const;
  double decode(int bin) const;

  // Amplitude interval [lo, hi] covered by `bin`.
  std::pair<double, double> bin_edges(int bin) const;

  std::vector<int> encode(std::span<const double> samples) const;
  std::vector<double> decode(std::span<const int> bins) const;

 private:
  double expand(double y) const;

  int levels_;
  double mu_;
  double log1p_mu_;
};

BinIndex mulaw_encode(double x);
double mulaw_decode(BinIndex bin);

}  // namespace ssws::audio
