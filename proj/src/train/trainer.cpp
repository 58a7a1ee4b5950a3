#include "ssws/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>

#include "ssws/audio/mulaw.hpp"
#include "ssws/audio/wav.hpp"
#include "ssws/nn/ops.hpp"
#include "ssws/util/csv.hpp"

namespace ssws::train {

namespace fs = std::filesystem;

std::vector<ManifestEntry> read_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest " + path);
  std::stringstream filtered;
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("#", 0) != 0) filtered << line << '\n';
  auto rows = util::read_csv(filtered, '\t');
  if (rows.empty()) throw std::runtime_error("manifest " + path + " is empty");
  const auto& header = rows.front();
  const auto audio = util::column_index(header, "audio"), features = util::column_index(header, "features"),
             id = util::column_index(header, "utterance_id"), domain = util::column_index(header, "domain");
  const fs::path base = fs::path(path).parent_path();
  auto resolve = [&](const std::string& p) {
    if (p == "-" || p.empty() || fs::path(p).is_absolute()) return p;
    return (base / p).string();
  };
  std::vector<ManifestEntry> entries;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (r.size() != header.size())
      throw std::runtime_error("manifest row " + std::to_string(i + 1) + " has " + std::to_string(r.size()) +
                               " fields, expected " + std::to_string(header.size()));
    entries.push_back({resolve(r[audio]), resolve(r[features]), r[id], r[domain]});
  }
  if (entries.empty()) throw std::runtime_error("manifest " + path + " lists no utterances");
  return entries;
}

Utterance make_utterance(std::string id, std::string domain, const audio::AudioBuffer& audio,
                         cond::FrameFeatures features, const wavenet::ModelConfig& config) {
  if (audio.sample_rate != config.sample_rate)
    throw std::invalid_argument(id + ": sample rate " + std::to_string(audio.sample_rate) + " but model expects " +
                                std::to_string(config.sample_rate));
  if (features.hop_size != config.hop_size)
    throw std::invalid_argument(id + ": feature hop " + std::to_string(features.hop_size) + " but model expects " +
                                std::to_string(config.hop_size));
  features.validate();
  const audio::MulawCodec codec(static_cast<int>(config.stack.quantization_bins));
  Utterance u;
  u.id = std::move(id);
  u.domain = std::move(domain);
  u.audio.assign(features.samples(), codec.silence_bin());
  const std::size_t n = std::min(audio.samples.size(), u.audio.size());
  for (std::size_t i = 0; i < n; ++i) u.audio[i] = codec.encode(audio.samples[i]);
  u.features = std::move(features);
  return u;
}

Utterance load_utterance(const ManifestEntry& entry, const wavenet::ModelConfig& config, std::uint64_t feature_seed) {
  auto audio = audio::read_wav(entry.audio_path);
  cond::FrameFeatures features = entry.feature_path == "-"
                                     ? cond::generate_synthetic_features(audio, feature_seed, config.hop_size)
                                     : cond::read_features(entry.feature_path);
  return make_utterance(entry.utterance_id, entry.domain, audio, std::move(features), config);
}

const std::vector<std::string>& TrainRunConfig::keys() {
  static const std::vector<std::string> k{"epochs", "seed", "batch_size", "learning_rate", "anneal_factor"};
  return k;
}

TrainRunConfig TrainRunConfig::from_keyvalue(const util::KeyValueFile& kv) {
  TrainRunConfig c;
  c.epochs = static_cast<int>(kv.get_int("epochs", c.epochs));
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<long long>(c.seed)));
  c.batch_size = static_cast<std::size_t>(kv.get_int("batch_size", static_cast<long long>(c.batch_size)));
  c.schedule.initial_rate = kv.get_double("learning_rate", c.schedule.initial_rate);
  c.schedule.anneal_factor = kv.get_double("anneal_factor", c.schedule.anneal_factor);
  c.validate();
  return c;
}

void TrainRunConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(schedule.initial_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(schedule.anneal_factor > 0.0 && schedule.anneal_factor <= 1.0))
    throw std::invalid_argument("anneal_factor must be in (0, 1]");
}

nn::Tensor chunk_logits(const wavenet::Model& model, const Chunk& chunk) {
  nn::Tensor cond = model.conditioning().forward(chunk.features.to_tensor(), static_cast<std::size_t>(chunk.hop_size));
  return model.stack().forward(chunk.inputs, cond);
}

namespace {

std::vector<Chunk> chunk_dataset(const wavenet::Model& model, const std::vector<Utterance>& dataset,
                                 const ChunkLayout& layout) {
  const auto& config = model.config();
  const int silence = static_cast<int>(config.stack.quantization_bins / 2);
  const std::size_t rf = wavenet::receptive_field(config.stack);
  std::vector<Chunk> chunks;
  for (const auto& u : dataset) {
    if (u.features.hop_size != config.hop_size)
      throw std::invalid_argument(u.id + ": hop size does not match the model");
    auto c = chunk_utterance(u.features, u.audio, config.hop_size, silence, rf, layout);
    std::move(c.begin(), c.end(), std::back_inserter(chunks));
  }
  return chunks;
}

}  // namespace

TrainResult train(wavenet::Model& model, const std::vector<Utterance>& dataset, const TrainRunConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  if (dataset.empty()) throw std::invalid_argument("training needs at least one utterance");
  auto chunks = chunk_dataset(model, dataset, config.layout);

  auto& params = model.params();
  nn::AdamState adam = nn::AdamState::for_params(params);
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(chunks.size());
  TrainResult result;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double rate = config.schedule.rate(epoch);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_total = 0.0, epoch_count = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      double batch_count = 0.0;
      for (std::size_t i = start; i < stop; ++i) batch_count += static_cast<double>(chunks[order[i]].content_samples());

      params.zero_grad();
      for (std::size_t i = start; i < stop; ++i) {
        const Chunk& chunk = chunks[order[i]];
        nn::Tensor loss = masked_loss(chunk_logits(model, chunk), chunk.targets, chunk.mask, batch_count);
        if (!std::isfinite(loss.item()))
          throw nn::NonFiniteError("non-finite loss at epoch " + std::to_string(epoch) + ", chunk " +
                                   std::to_string(chunk.index));
        nn::backward(loss);
        epoch_total += loss.item() * batch_count;
      }
      epoch_count += batch_count;
      nn::adam_step(params, adam, rate);
    }

    EpochRecord record{epoch, epoch_total / epoch_count, rate};
    result.trace.push_back(record);
    if (!config.checkpoint_path.empty()) model.save(config.checkpoint_path, &adam);
    if (on_epoch) on_epoch(record);
  }
  return result;
}

double evaluate(const wavenet::Model& model, const std::vector<Utterance>& dataset, const ChunkLayout& layout) {
  nn::NoGradGuard no_grad;
  auto chunks = chunk_dataset(model, dataset, layout);
  double total = 0.0, count = 0.0;
  for (const auto& chunk : chunks) {
    const double n = static_cast<double>(chunk.content_samples());
    total += masked_loss(chunk_logits(model, chunk), chunk.targets, chunk.mask).item() * n;
    count += n;
  }
  return total / count;
}

void write_loss_trace(const std::string& path, const std::vector<EpochRecord>& trace) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,loss,learning_rate\n" << std::setprecision(17);
  for (const auto& r : trace) out << r.epoch << ',' << r.loss << ',' << r.learning_rate << '\n';
}

}  // namespace ssws::train
