#include "ssws/audio/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

namespace ssws::audio {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

void put_u16(std::vector<char>& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::vector<char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_tag(std::vector<char>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

std::uint16_t get_u16(const std::vector<char>& b, std::size_t at) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                    (static_cast<unsigned char>(b[at + 1]) << 8));
}

std::uint32_t get_u32(const std::vector<char>& b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[at + i]);
  return v;
}

}  // namespace

void AudioBuffer::validate() const {
  if (sample_rate <= 0) throw std::invalid_argument("sample rate must be positive");
  for (double s : samples)
    if (!(std::abs(s) <= 1.0)) throw std::invalid_argument("sample outside [-1, 1]");
}

std::vector<char> encode_wav(const AudioBuffer& audio) {
  audio.validate();
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  std::vector<char> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put_u32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_u32(out, 16);
  put_u16(out, kFormatPcm);
  put_u16(out, 1);
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate));
  put_u32(out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  put_u16(out, 2);
  put_u16(out, 16);
  put_tag(out, "data");
  put_u32(out, data_bytes);
  for (double s : audio.samples) {
    long q = std::lround(s * 32768.0);
    q = std::clamp(q, -32768L, 32767L);
    put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

AudioBuffer decode_wav(const std::vector<char>& b) {
  if (b.size() < 12 || std::memcmp(b.data(), "RIFF", 4) != 0 || std::memcmp(b.data() + 8, "WAVE", 4) != 0)
    throw WavFormatError("not a RIFF/WAVE file");

  bool have_fmt = false;
  std::uint16_t channels = 0, bits = 0;
  std::uint32_t rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= b.size()) {
    const char* tag = b.data() + pos;
    std::uint32_t size = get_u32(b, pos + 4);
    std::size_t body = pos + 8;
    if (body + size > b.size()) throw WavFormatError("truncated chunk");
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      if (size < 16) throw WavFormatError("short fmt chunk");
      std::uint16_t format = get_u16(b, body);
      if (format == kFormatExtensible && size >= 40) format = get_u16(b, body + 24);
      if (format != kFormatPcm) throw WavFormatError("only integer PCM is supported");
      channels = get_u16(b, body + 2);
      rate = get_u32(b, body + 4);
      bits = get_u16(b, body + 14);
      if (channels != 1)
        throw WavFormatError("unsupported channel count " + std::to_string(channels) + " (mono only)");
      if (bits != 16) throw WavFormatError("unsupported bit depth " + std::to_string(bits));
      if (rate == 0) throw WavFormatError("zero sample rate");
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw WavFormatError("data chunk before fmt chunk");
      if (size % 2 != 0) throw WavFormatError("odd data size for 16-bit PCM");
      AudioBuffer audio;
      audio.sample_rate = static_cast<int>(rate);
      audio.samples.resize(size / 2);
      for (std::size_t i = 0; i < audio.samples.size(); ++i)
        audio.samples[i] = static_cast<std::int16_t>(get_u16(b, body + 2 * i)) / 32768.0;
      return audio;
    }
    pos = body + size + (size & 1);
  }
  throw WavFormatError(have_fmt ? "missing data chunk" : "missing fmt chunk");
}

void write_wav(const std::string& path, const AudioBuffer& audio) {
  auto bytes = encode_wav(audio);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path);
}

AudioBuffer read_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes);
}

}  // namespace ssws::audio
