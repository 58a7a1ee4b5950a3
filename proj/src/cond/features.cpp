#include "ssws/cond/features.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>
#include <random>
#include <sstream>

namespace ssws::cond {
namespace {

constexpr char kMagic[8] = {'S', 'S', 'W', 'S', 'F', 'E', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t at) {
  if (at + 4 > in.size()) throw FeatureFormatError("feature file truncated");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[at + i]);
  return v;
}

}  // namespace

FrameFeatures FrameFeatures::window(std::ptrdiff_t begin, std::size_t count) const {
  FrameFeatures out;
  out.frames = count;
  out.hop_size = hop_size;
  out.values.assign(count * kFeatureDims, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    std::ptrdiff_t src = begin + static_cast<std::ptrdiff_t>(i);
    if (src < 0 || src >= static_cast<std::ptrdiff_t>(frames)) continue;
    std::copy_n(values.begin() + src * kFeatureDims, kFeatureDims, out.values.begin() + i * kFeatureDims);
  }
  return out;
}

nn::Tensor FrameFeatures::to_tensor() const { return nn::Tensor::from({frames, kFeatureDims}, values); }

void FrameFeatures::validate() const {
  if (hop_size < 1) throw FeatureFormatError("hop size must be >= 1");
  if (values.size() != frames * kFeatureDims)
    throw FeatureFormatError("feature matrix must have exactly 88 columns per frame");
  for (std::size_t f = 0; f < frames; ++f) {
    const double flag = at(f, kVoicingColumn);
    if (flag != 0.0 && flag != 1.0)
      throw FeatureFormatError("frame " + std::to_string(f) + ": voiced flag must be 0 or 1");
    if (flag == 1.0 && !std::isfinite(at(f, kLogF0Column)))
      throw FeatureFormatError("frame " + std::to_string(f) + ": log-f0 not finite on voiced frame");
    for (std::size_t c = 0; c < kFeatureDims; ++c)
      if (!std::isfinite(at(f, c))) throw FeatureFormatError("frame " + std::to_string(f) + ": non-finite value");
  }
}

void write_features(const std::string& path, const FrameFeatures& features) {
  features.validate();
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kVersion);
  put_u32(out, static_cast<std::uint32_t>(features.frames));
  put_u32(out, static_cast<std::uint32_t>(kFeatureDims));
  put_u32(out, static_cast<std::uint32_t>(features.hop_size));
  for (double v : features.values) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

FrameFeatures read_features(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (in.size() < 24 || std::memcmp(in.data(), kMagic, sizeof kMagic) != 0)
    throw FeatureFormatError("not a feature file: " + path);
  if (get_u32(in, 8) != kVersion) throw FeatureFormatError("unsupported feature file version");
  FrameFeatures features;
  features.frames = get_u32(in, 12);
  if (get_u32(in, 16) != kFeatureDims) throw FeatureFormatError("feature dimension must be 88");
  features.hop_size = static_cast<int>(get_u32(in, 20));
  const std::size_t n = features.frames * kFeatureDims;
  if (in.size() != 24 + 4 * n) throw FeatureFormatError("feature file size does not match header");
  features.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) features.values[i] = std::bit_cast<float>(get_u32(in, 24 + 4 * i));
  features.validate();
  return features;
}

FrameFeatures parse_feature_text(const std::string& text, int hop_size) {
  FrameFeatures features;
  features.hop_size = hop_size;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::vector<double> row;
    std::string tok;
    while (fields >> tok) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(tok, &used));
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw FeatureFormatError("line " + std::to_string(lineno) + ": bad number '" + tok + "'");
      }
    }
    if (row.size() != kFeatureDims)
      throw FeatureFormatError("line " + std::to_string(lineno) + ": expected 88 values, got " +
                               std::to_string(row.size()));
    features.values.insert(features.values.end(), row.begin(), row.end());
    ++features.frames;
  }
  features.validate();
  return features;
}

FrameFeatures read_feature_text(const std::string& path, int hop_size) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_feature_text(ss.str(), hop_size);
}

std::vector<PitchEstimate> track_pitch(const audio::AudioBuffer& audio, int hop_size,
                                       const PitchTrackerOptions& options) {
  if (hop_size < 1) throw std::invalid_argument("hop size must be >= 1");
  const auto& x = audio.samples;
  const std::size_t n = x.size();
  const std::size_t frames = (n + hop_size - 1) / hop_size;
  const auto min_lag = static_cast<std::size_t>(std::floor(audio.sample_rate / options.max_f0));
  const auto max_lag = static_cast<std::size_t>(std::ceil(audio.sample_rate / options.min_f0));
  const std::size_t width = max_lag;  // correlation window: one longest period
  const std::size_t span = width + max_lag;

  std::vector<PitchEstimate> out(frames);
  if (n < span || min_lag < 1) return out;

  std::vector<double> r(max_lag + 2, 0.0);
  for (std::size_t f = 0; f < frames; ++f) {
    const double centre = f * static_cast<double>(hop_size) + hop_size / 2.0;
    auto start = static_cast<std::ptrdiff_t>(std::llround(centre - span / 2.0));
    start = std::clamp<std::ptrdiff_t>(start, 0, static_cast<std::ptrdiff_t>(n - span));
    const double* seg = x.data() + start;

    double e0 = 0.0;
    for (std::size_t i = 0; i < width; ++i) e0 += seg[i] * seg[i];
    if (e0 < 1e-10 * width) continue;

    double best = -1.0;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
      double xy = 0.0, e1 = 0.0;
      for (std::size_t i = 0; i < width; ++i) {
        xy += seg[i] * seg[i + lag];
        e1 += seg[i + lag] * seg[i + lag];
      }
      r[lag] = e1 > 0.0 ? xy / std::sqrt(e0 * e1) : 0.0;
      best = std::max(best, r[lag]);
    }

    std::size_t pick = 0;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
      const bool peak = (lag == min_lag || r[lag] >= r[lag - 1]) && (lag == max_lag || r[lag] >= r[lag + 1]);
      if (peak && r[lag] >= options.octave_tolerance * best) {
        pick = lag;
        break;
      }
    }
    if (pick == 0) continue;

    double refined = static_cast<double>(pick);
    if (pick > min_lag && pick < max_lag) {
      const double a = r[pick - 1], b = r[pick], c = r[pick + 1];
      const double denom = a - 2.0 * b + c;
      if (denom < 0.0) refined += 0.5 * (a - c) / denom;
    }
    out[f].periodicity = r[pick];
    out[f].voiced = r[pick] >= options.voicing_threshold;
    out[f].f0 = audio.sample_rate / refined;
  }
  return out;
}

FrameFeatures generate_synthetic_features(const audio::AudioBuffer& audio, std::uint64_t seed, int hop_size,
                                          const PitchTrackerOptions& options) {
  if (audio.samples.empty()) throw std::invalid_argument("cannot derive features from empty audio");
  auto pitch = track_pitch(audio, hop_size, options);

  FrameFeatures features;
  features.hop_size = hop_size;
  features.frames = pitch.size();
  features.values.assign(features.frames * kFeatureDims, 0.0);

  // Three slow sinusoids per linguistic column, parameters drawn in column order.
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.1, 0.4), freq(0.004, 0.05), phase(0.0, 2.0 * std::numbers::pi);
  for (std::size_t c = 0; c < kLinguisticDims; ++c) {
    double a[3], w[3], p[3];
    for (int k = 0; k < 3; ++k) {
      a[k] = amp(rng);
      w[k] = 2.0 * std::numbers::pi * freq(rng);
      p[k] = phase(rng);
    }
    for (std::size_t f = 0; f < features.frames; ++f) {
      double v = 0.0;
      for (int k = 0; k < 3; ++k) v += a[k] * std::sin(w[k] * f + p[k]);
      features.at(f, c) = v;
    }
  }
  for (std::size_t f = 0; f < features.frames; ++f) {
    features.at(f, kVoicingColumn) = pitch[f].voiced ? 1.0 : 0.0;
    features.at(f, kLogF0Column) = pitch[f].voiced ? std::log(pitch[f].f0) : 0.0;
  }
  return features;
}

}  // namespace ssws::cond
