#include "ssws/nn/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

namespace ssws::nn {
namespace {

constexpr char kMagic[8] = {'S', 'S', 'W', 'S', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    auto c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<char>& buffer() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<char> data) : data_(std::move(data)) {}
  const char* take(std::size_t n) {
    if (pos_ + n > data_.size()) throw CheckpointError("checkpoint truncated");
    const char* p = data_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(*take(1)); }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    const char* p = take(4);
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    const char* p = take(8);
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(p[i]);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    auto n = u32();
    const char* p = take(n);
    return std::string(p, n);
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  std::vector<char> data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const std::string& path, const std::string& metadata, const ParameterSet& params,
                     const AdamState* optimizer) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.str(metadata);
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& [name, t] : params) {
    w.str(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.u64(d);
    for (double v : t.data()) w.f32(static_cast<float>(v));
  }
  w.u8(optimizer ? 1 : 0);
  if (optimizer) {
    if (optimizer->first_moment.size() != params.size()) throw CheckpointError("optimizer state size mismatch");
    w.f64(optimizer->beta1);
    w.f64(optimizer->beta2);
    w.f64(optimizer->epsilon);
    w.u64(optimizer->step_count);
    for (std::size_t p = 0; p < params.size(); ++p) {
      for (double v : optimizer->first_moment[p]) w.f32(static_cast<float>(v));
      for (double v : optimizer->second_moment[p]) w.f32(static_cast<float>(v));
    }
  }

  // Write to a sibling temp file and rename so a crash never leaves a torn checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp);
    out.write(w.buffer().data(), static_cast<std::streamsize>(w.buffer().size()));
    if (!out) throw CheckpointError("write failed for " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw CheckpointError("cannot rename checkpoint to " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  Reader r(std::vector<char>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>()));
  if (std::memcmp(r.take(sizeof kMagic), kMagic, sizeof kMagic) != 0) throw CheckpointError("bad checkpoint magic");
  if (auto version = r.u32(); version != kCheckpointVersion)
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint ck;
  ck.metadata = r.str();
  const auto count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    auto name = r.str();
    auto rank = r.u32();
    if (rank > 8) throw CheckpointError("implausible tensor rank in " + name);
    Shape shape(rank);
    for (auto& d : shape) d = r.u64();
    std::vector<double> values(shape_size(shape));
    for (auto& v : values) v = r.f32();
    ck.params.add(std::move(name), Tensor::from(std::move(shape), std::move(values)));
  }
  ck.has_optimizer = r.u8() != 0;
  if (ck.has_optimizer) {
    ck.optimizer.beta1 = r.f64();
    ck.optimizer.beta2 = r.f64();
    ck.optimizer.epsilon = r.f64();
    ck.optimizer.step_count = r.u64();
    for (std::size_t p = 0; p < ck.params.size(); ++p) {
      std::vector<double> m(ck.params[p].size()), v(ck.params[p].size());
      for (auto& x : m) x = r.f32();
      for (auto& x : v) x = r.f32();
      ck.optimizer.first_moment.push_back(std::move(m));
      ck.optimizer.second_moment.push_back(std::move(v));
    }
  }
  if (!r.done()) throw CheckpointError("trailing bytes in checkpoint");
  return ck;
}

void assign_parameters(ParameterSet& target, const ParameterSet& source) {
  for (auto& [name, t] : target) {
    const Tensor* src = nullptr;
    for (const auto& [n, s] : source)
      if (n == name) src = &s;
    if (!src) throw CheckpointError("checkpoint lacks parameter " + name);
    if (src->shape() != t.shape())
      throw CheckpointError("shape mismatch for " + name + ": " + shape_string(src->shape()) + " vs " +
                            shape_string(t.shape()));
    std::copy(src->data().begin(), src->data().end(), t.data().begin());
  }
}

}  // namespace ssws::nn
