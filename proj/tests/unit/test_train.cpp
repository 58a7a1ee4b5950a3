#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "doctest.h"
#include "grad_check.hpp"
#include "ssws/nn/ops.hpp"
#include "ssws/train/chunk.hpp"
#include "ssws/train/trainer.hpp"
#include "ssws/util/csv.hpp"

using namespace ssws;
using namespace ssws::train;
using nn::Tensor;
namespace fs = std::filesystem;

namespace {

cond::FrameFeatures frames_of(std::size_t n, int hop) {
  cond::FrameFeatures f;
  f.frames = n;
  f.hop_size = hop;
  f.values.assign(n * cond::kFeatureDims, 0.0);
  for (std::size_t i = 0; i < n; ++i) f.at(i, 0) = static_cast<double>(i);
  return f;
}

std::vector<int> ramp(std::size_t n) {
  std::vector<int> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<int>(i % 1000);
  return v;
}

wavenet::ModelConfig small_config() {
  wavenet::ModelConfig mc;
  mc.stack.blocks = 1;
  mc.stack.layers_per_block = 3;
  mc.stack.residual_channels = 4;
  mc.stack.skip_channels = 8;
  mc.stack.quantization_bins = 32;
  mc.lstm_hidden = 4;
  mc.sample_rate = 8000;
  mc.hop_size = 8;
  return mc;
}

audio::AudioBuffer tone(double hz, std::size_t n, int rate) {
  audio::AudioBuffer a;
  a.sample_rate = rate;
  for (std::size_t i = 0; i < n; ++i) a.samples.push_back(0.6 * std::sin(2.0 * std::numbers::pi * hz * i / rate));
  return a;
}

std::vector<Utterance> small_dataset(const wavenet::ModelConfig& mc) {
  std::vector<Utterance> ds;
  for (int k = 0; k < 2; ++k) {
    auto a = tone(400.0 + 100.0 * k, 8 * 150, mc.sample_rate);
    ds.push_back(make_utterance("u" + std::to_string(k), "news", a, cond::generate_synthetic_features(a, k, 8), mc));
  }
  return ds;
}

}  // namespace

TEST_CASE("content regions tile the utterance exactly once") {
  for (std::size_t F : {1u, 119u, 120u, 121u, 165u, 240u, 500u}) {
    auto chunks = chunk_utterance(frames_of(F, 2), ramp(F * 2), 2, 512);
    std::vector<int> covered(F, 0);
    for (const auto& c : chunks) {
      CHECK(c.features.frames == 165);
      CHECK(c.inputs.size() == 330);
      std::size_t masked = 0;
      for (double m : c.mask) masked += m != 0.0;
      CHECK(masked == c.content_samples());
      for (std::size_t f = c.content_begin; f < c.content_end; ++f) ++covered[f];
    }
    for (int n : covered) REQUIRE(n == 1);
    CHECK(chunks.size() == (F + 119) / 120);
  }
}

TEST_CASE("165 frames give two chunks under the tiling rule") {
  auto chunks = chunk_utterance(frames_of(165, 1), ramp(165), 1, 512);
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].content_begin == 0);
  CHECK(chunks[0].content_end == 120);
  CHECK(chunks[0].content_offset() == 35);
  CHECK(chunks[1].content_begin == 120);
  CHECK(chunks[1].content_end == 165);
}

TEST_CASE("240 frames: second chunk warms up on frames 85..119") {
  const int hop = 3;
  auto f = frames_of(240, hop);
  auto audio = ramp(240 * hop);
  auto chunks = chunk_utterance(f, audio, hop, 512);
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].content_begin == 0);
  CHECK(chunks[0].content_end == 120);
  CHECK(chunks[1].content_begin == 120);
  CHECK(chunks[1].content_end == 240);
  const auto& c = chunks[1];
  CHECK(c.first_frame == 85);
  for (std::size_t row = 0; row < 35; ++row) CHECK(c.features.at(row, 0) == static_cast<double>(85 + row));
  for (std::size_t i = 0; i < 35 * hop; ++i) {
    REQUIRE(c.targets[i] == audio[85 * hop + i]);
    REQUIRE(c.mask[i] == 0.0);
  }
  for (std::size_t row = 155; row < 165; ++row) CHECK(c.features.at(row, 0) == 0.0);
  for (std::size_t i = 155 * hop; i < 165 * hop; ++i) REQUIRE(c.targets[i] == 512);
}

TEST_CASE("first chunk history is silence and inputs lag targets by one") {
  auto audio = ramp(130);
  auto chunks = chunk_utterance(frames_of(130, 1), audio, 1, 512);
  const auto& c = chunks[0];
  for (std::size_t i = 0; i < 35; ++i) CHECK(c.targets[i] == 512);
  CHECK(c.inputs[35] == 512);
  for (std::size_t i = 36; i < 155; ++i) REQUIRE(c.inputs[i] == c.targets[i - 1]);
}

TEST_CASE("chunker errors") {
  CHECK_THROWS_AS(chunk_utterance(frames_of(0, 1), {}, 1, 512), std::invalid_argument);
  CHECK_THROWS_AS(chunk_utterance(frames_of(4, 2), ramp(7), 2, 512), std::invalid_argument);
  CHECK_THROWS_AS(chunk_utterance(frames_of(4, 120), ramp(480), 120, 512, 4201), std::invalid_argument);
  CHECK_NOTHROW(chunk_utterance(frames_of(4, 120), ramp(480), 120, 512, 4093));
}

TEST_CASE("masked loss") {
  std::mt19937_64 rng(1);
  std::vector<int> targets{3, 1, 0, 7, 2, 5};
  CHECK(masked_loss(Tensor::zeros({6, 1024}), targets, std::vector<double>{0, 1, 1, 0, 1, 0}).item() ==
        doctest::Approx(std::log(1024.0)));

  auto logits = ssws::testing::random_tensor({6, 8}, rng, 3.0);
  std::vector<double> one{0, 0, 0, 1, 0, 0};
  auto single = masked_loss(logits, targets, one).item();
  double z = 0.0;
  for (std::size_t c = 0; c < 8; ++c) z += std::exp(logits.at(3, c));
  CHECK(single == doctest::Approx(std::log(z) - logits.at(3, 7)).epsilon(1e-12));

  std::vector<double> mask{1, 1, 0, 1, 0, 0};
  auto loss = masked_loss(logits, targets, mask);
  nn::backward(loss);
  for (std::size_t t : {2u, 4u, 5u})
    for (std::size_t c = 0; c < 8; ++c) CHECK(logits.grad()[t * 8 + c] == 0.0);

  auto doubled = logits.clone();
  for (std::size_t t : {4u, 5u})
    for (std::size_t c = 0; c < 8; ++c) doubled.data()[t * 8 + c] *= 2.0;
  CHECK(masked_loss(doubled, targets, mask).item() == loss.item());

  CHECK_THROWS_AS(masked_loss(logits, targets, std::vector<double>(6, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(masked_loss(logits, targets, std::vector<double>(5, 1.0)), nn::ShapeError);
}

TEST_CASE("training is deterministic and lowers the loss") {
  auto mc = small_config();
  auto ds = small_dataset(mc);
  TrainRunConfig tc;
  tc.epochs = 6;
  tc.seed = 5;
  tc.batch_size = 2;
  tc.schedule.initial_rate = 1e-2;
  tc.schedule.anneal_factor = 0.9;
  tc.layout = {5, 60, 2};

  wavenet::Model m1(mc, 3), m2(mc, 3);
  auto r1 = train::train(m1, ds, tc), r2 = train::train(m2, ds, tc);
  REQUIRE(r1.trace.size() == 6);
  for (std::size_t e = 0; e < 6; ++e) {
    CHECK(r1.trace[e].loss == r2.trace[e].loss);
    CHECK(r1.trace[e].learning_rate == tc.schedule.rate(static_cast<int>(e)));
  }
  CHECK(r1.trace.back().loss < r1.trace.front().loss);
  for (std::size_t p = 0; p < m1.params().size(); ++p)
    for (std::size_t i = 0; i < m1.params()[p].size(); ++i)
      REQUIRE(m1.params()[p].data()[i] == m2.params()[p].data()[i]);

  wavenet::Model m3(mc, 3);
  tc.seed = 6;
  auto r3 = train::train(m3, ds, tc);
  CHECK(r3.trace[1].loss != r1.trace[1].loss);
}

TEST_CASE("every live parameter moves in one step") {
  auto mc = small_config();
  auto ds = small_dataset(mc);
  wavenet::Model m(mc, 1);
  std::vector<std::vector<double>> before;
  for (auto& [name, t] : m.params()) before.emplace_back(t.data().begin(), t.data().end());
  TrainRunConfig tc;
  tc.batch_size = 100;
  tc.layout = {5, 60, 2};
  train::train(m, ds, tc);
  for (std::size_t p = 0; p < m.params().size(); ++p) {
    bool moved = false;
    for (std::size_t i = 0; i < before[p].size(); ++i) moved |= m.params()[p].data()[i] != before[p][i];
    const auto& name = m.params().name(p);
    INFO(name);
    // The last layer's residual output feeds nothing downstream.
    const bool dead = name.rfind("stack.layer02.residual_", 0) == 0;
    CHECK(moved != dead);
  }
}

TEST_CASE("trainer writes checkpoints and loss traces") {
  auto mc = small_config();
  auto ds = small_dataset(mc);
  wavenet::Model m(mc, 2);
  auto dir = fs::temp_directory_path() / "ssws_train_test";
  fs::create_directories(dir);
  TrainRunConfig tc;
  tc.epochs = 2;
  tc.layout = {5, 60, 2};
  tc.checkpoint_path = (dir / "model.ckpt").string();
  int seen = 0;
  auto result = train::train(m, ds, tc, [&](const EpochRecord&) { ++seen; });
  CHECK(seen == 2);
  REQUIRE(fs::exists(tc.checkpoint_path));
  nn::AdamState adam;
  auto loaded = wavenet::Model::load(tc.checkpoint_path, &adam);
  CHECK(adam.step_count == result.trace.size() * 6);  // 2 utterances x 3 chunks, batch 1
  write_loss_trace((dir / "loss.csv").string(), result.trace);
  auto rows = util::read_csv_file((dir / "loss.csv").string());
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == std::vector<std::string>{"epoch", "loss", "learning_rate"});
  CHECK(std::stod(rows[2][1]) == result.trace[1].loss);
  fs::remove_all(dir);
}

TEST_CASE("training rejects bad input") {
  auto mc = small_config();
  wavenet::Model m(mc, 2);
  TrainRunConfig tc;
  CHECK_THROWS(train::train(m, {}, tc));
  tc.epochs = 0;
  CHECK_THROWS(train::train(m, small_dataset(mc), tc));
  auto a = tone(300.0, 400, 16000);
  CHECK_THROWS(make_utterance("x", "d", a, cond::generate_synthetic_features(a, 0, 8), mc));
}

TEST_CASE("manifest parsing resolves relative paths") {
  auto dir = fs::temp_directory_path() / "ssws_manifest_test";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "m.tsv");
    out << "# corpus\naudio\tfeatures\tutterance_id\tdomain\n"
        << "wav/a.wav\t-\ta\tnews\n/abs/b.wav\tfeat/b.feat\tb\tbooks\n";
  }
  auto entries = read_manifest((dir / "m.tsv").string());
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].audio_path == (dir / "wav/a.wav").string());
  CHECK(entries[0].feature_path == "-");
  CHECK(entries[1].audio_path == "/abs/b.wav");
  CHECK(entries[1].feature_path == (dir / "feat/b.feat").string());
  CHECK(entries[1].domain == "books");
  fs::remove_all(dir);
}
