#include "ssws/audio/mulaw.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ssws::audio {

BinIndex::BinIndex(int value, int levels) : value_(value) {
  if (value < 0 || value >= levels)
    throw std::out_of_range("bin index " + std::to_string(value) + " outside [0, " +
                            std::to_string(levels - 1) + "]");
}

MulawCodec::MulawCodec(int levels) : levels_(levels), mu_(levels - 1.0) {
  if (levels < 2) throw std::invalid_argument("mu-law codec needs at least 2 levels");
  log1p_mu_ = std::log1p(mu_);
}

int MulawCodec::encode(double x) const {
  if (!(std::abs(x) <= 1.0)) throw std::domain_error("mu-law input outside [-1, 1]");
  double y = std::copysign(std::log1p(mu_ * std::abs(x)) / log1p_mu_, x);
  auto bin = static_cast<long long>(std::floor((y + 1.0) / 2.0 * levels_));
  if (bin > levels_ - 1) bin = levels_ - 1;
  if (bin < 0) bin = 0;
  return static_cast<int>(bin);
}

double MulawCodec::expand(double y) const {
  return std::copysign(std::expm1(std::abs(y) * log1p_mu_) / mu_, y);
}

double MulawCodec::decode(int bin) const {
  if (bin < 0 || bin >= levels_) throw std::out_of_range("mu-law bin out of range");
  return expand(2.0 * (bin + 0.5) / levels_ - 1.0);
}

std::pair<double, double> MulawCodec::bin_edges(int bin) const {
  if (bin < 0 || bin >= levels_) throw std::out_of_range("mu-law bin out of range");
  return {expand(2.0 * bin / levels_ - 1.0), expand(2.0 * (bin + 1.0) / levels_ - 1.0)};
}

std::vector<int> MulawCodec::encode(std::span<const double> samples) const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (double x : samples) out.push_back(encode(x));
  return out;
}

std::vector<double> MulawCodec::decode(std::span<const int> bins) const {
  std::vector<double> out;
  out.reserve(bins.size());
  for (int b : bins) out.push_back(decode(b));
  return out;
}

BinIndex mulaw_encode(double x) {
  static const MulawCodec codec;
  return BinIndex(codec.encode(x));
}

double mulaw_decode(BinIndex bin) {
  static const MulawCodec codec;
  return codec.decode(bin.value());
}

}  // namespace ssws::audio
