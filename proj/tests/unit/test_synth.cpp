#include <cmath>
#include <numbers>
#include <random>

#include "chi_square.hpp"
#include "doctest.h"
#include "grad_check.hpp"
#include "ssws/audio/mulaw.hpp"
#include "ssws/synth/sampler.hpp"
#include "ssws/train/trainer.hpp"

using namespace ssws;
using namespace ssws::synth;
using ssws::testing::chi_square_accepts;

namespace {


std::vector<long> draw_counts(const std::vector<double>& logits, long draws, std::uint64_t seed, double temp = 1.0) {
  std::mt19937_64 rng(seed);
  std::vector<long> counts(logits.size(), 0);
  for (long i = 0; i < draws; ++i) ++counts[gumbel_sample(logits, rng, temp)];
  return counts;
}

std::vector<double> softmax_of(const std::vector<double>& logits, double temp = 1.0) {
  double m = logits[0];
  for (double v : logits) m = std::max(m, v);
  std::vector<double> p;
  double z = 0.0;
  for (double v : logits) z += std::exp((v - m) / temp);
  for (double v : logits) p.push_back(std::exp((v - m) / temp) / z);
  return p;
}

wavenet::ModelConfig small_config(std::size_t bins) {
  wavenet::ModelConfig mc;
  mc.stack.blocks = 1;
  mc.stack.layers_per_block = 3;
  mc.stack.residual_channels = 4;
  mc.stack.skip_channels = 8;
  mc.stack.quantization_bins = bins;
  mc.lstm_hidden = 4;
  mc.sample_rate = 8000;
  mc.hop_size = 4;
  return mc;
}

cond::FrameFeatures features_for(std::size_t seconds_x100, int hop) {
  audio::AudioBuffer a;
  a.sample_rate = 8000;
  for (std::size_t i = 0; i < seconds_x100 * 80; ++i) a.samples.push_back(0.4 * std::sin(0.2 * static_cast<double>(i)));
  return cond::generate_synthetic_features(a, 4, hop);
}

}  // namespace

TEST_CASE("dominant logit wins") {
  auto counts = draw_counts({50, 0, 0, 0}, 10000, 1);
  CHECK(counts[0] > 9990);
}

TEST_CASE("uniform logits pass a chi-square test") {
  CHECK(chi_square_accepts(draw_counts({0, 0, 0, 0}, 100000, 2), {0.25, 0.25, 0.25, 0.25}, 1e-3));
}

TEST_CASE("sampling frequencies follow the softmax for arbitrary logits") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.5);
  for (std::size_t bins : {2u, 5u, 17u}) {
    std::vector<double> logits(bins);
    for (auto& v : logits) v = n(rng);
    CHECK(chi_square_accepts(draw_counts(logits, 100000, bins), softmax_of(logits), 1e-3));
    CHECK(chi_square_accepts(draw_counts(logits, 100000, bins + 1, 0.5), softmax_of(logits, 0.5), 1e-3));
  }
}

TEST_CASE("the chi-square oracle rejects a wrong distribution") {
  CHECK_FALSE(chi_square_accepts(draw_counts({0.2, 0, 0, 0}, 100000, 2), {0.25, 0.25, 0.25, 0.25}, 1e-3));
}

TEST_CASE("gumbel sampling is deterministic and validates input") {
  std::vector<double> logits{0.3, -1, 2, 0.5, 0};
  std::mt19937_64 a(9), b(9);
  for (int i = 0; i < 1000; ++i) REQUIRE(gumbel_sample(logits, a) == gumbel_sample(logits, b));
  CHECK_THROWS_AS(gumbel_sample(std::vector<double>{0, std::nan("")}, a), std::domain_error);
  CHECK_THROWS_AS(gumbel_sample(std::vector<double>{0, INFINITY}, a), std::domain_error);
  CHECK_THROWS(gumbel_sample(std::vector<double>{}, a));
}

TEST_CASE("output length is frames times hop") {
  wavenet::Model model(small_config(32), 1);
  for (std::size_t hundredths : {1u, 7u, 30u}) {
    auto f = features_for(hundredths, 4);
    auto out = synthesize(f, model, {});
    CHECK(out.audio.samples.size() == f.frames * 4);
    CHECK(out.bins.size() == f.frames * 4);
    CHECK(out.audio.sample_rate == 8000);
  }
}

TEST_CASE("synthesis is deterministic per seed") {
  wavenet::Model model(small_config(32), 1);
  auto f = features_for(20, 4);
  SamplerConfig c;
  c.seed = 77;
  auto a = synthesize(f, model, c), b = synthesize(f, model, c);
  CHECK(a.bins == b.bins);
  c.seed = 78;
  CHECK(synthesize(f, model, c).bins != a.bins);
}

TEST_CASE("a model forced onto the silence bin synthesizes silence") {
  wavenet::Model model(small_config(1024), 1);
  nn::Tensor w = model.stack().head().output_weight, b = model.stack().head().output_bias;
  for (auto& v : w.data()) v = 0.0;
  for (auto& v : b.data()) v = 0.0;
  b.data()[512] = 100.0;
  auto out = synthesize(features_for(40, 4), model, {});
  const double silence = audio::mulaw_decode(audio::BinIndex(512));
  for (double s : out.audio.samples) REQUIRE(s == silence);
  CHECK(std::abs(silence) < 1e-3);
}

TEST_CASE("sampler is rejected for mismatched features") {
  wavenet::Model model(small_config(32), 1);
  CHECK_THROWS(synthesize(features_for(5, 8), model, {}));
}

TEST_CASE("per-step logits match the teacher-forced forward pass exactly") {
  auto mc = small_config(32);
  wavenet::Model model(mc, 5);
  audio::AudioBuffer a;
  a.sample_rate = 8000;
  for (int i = 0; i < 4 * 200; ++i) a.samples.push_back(0.5 * std::sin(0.05 * i) * std::cos(0.011 * i));
  auto u = train::make_utterance("u", "d", a, cond::generate_synthetic_features(a, 1, 4), mc);
  auto chunks = train::chunk_utterance(u.features, u.audio, 4, 16, wavenet::receptive_field(mc.stack));
  REQUIRE(chunks.size() == 2);
  nn::NoGradGuard ng;
  for (const auto& chunk : chunks) {
    auto batched = train::chunk_logits(model, chunk);
    auto cond = model.conditioning().forward(chunk.features.to_tensor(), 4);
    wavenet::IncrementalStack stepper(model.stack());
    for (std::size_t t = 0; t < chunk.inputs.size(); ++t) {
      auto logits = stepper.step(chunk.inputs[t], cond.data().subspan(t * 4, 4));
      for (std::size_t c = 0; c < 32; ++c) REQUIRE(logits[c] == batched.at(t, c));
    }
  }
}

TEST_CASE("each chunk's history is the previous chunk's output") {
  wavenet::Model model(small_config(32), 2);
  SamplerConfig c;
  c.layout = {5, 20, 2};
  auto f = features_for(10, 4);  // 200 frames
  std::vector<ChunkTrace> traces;
  auto out = synthesize(f, model, c, [&](const ChunkTrace& t) { traces.push_back(t); });
  REQUIRE(traces.size() == 10);
  const std::size_t history = 5 * 4;
  for (std::size_t i = 0; i < history; ++i) CHECK(traces[0].history[i] == 16);
  for (std::size_t k = 1; k < traces.size(); ++k) {
    const auto& prev = traces[k - 1].generated;
    REQUIRE(traces[k].history.size() == history);
    for (std::size_t i = 0; i < history; ++i) REQUIRE(traces[k].history[i] == prev[prev.size() - history + i]);
  }
  std::vector<int> joined;
  for (const auto& t : traces) joined.insert(joined.end(), t.generated.begin(), t.generated.end());
  CHECK(joined == out.bins);
}
