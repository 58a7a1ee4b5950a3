#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ssws/cond/features.hpp"
#include "ssws/nn/adam.hpp"
#include "ssws/train/chunk.hpp"
#include "ssws/util/keyvalue.hpp"
#include "ssws/wavenet/model.hpp"

namespace ssws::train {

struct Utterance {
  std::string id;
  std::string domain;
  cond::FrameFeatures features;
  std::vector<int> audio;  // encoded, features.frames * hop samples
};

struct ManifestEntry {
  std::string audio_path;
  std::string feature_path;  // "-" derives synthetic features from the audio
  std::string utterance_id;
  std::string domain;
};

// Tab-separated with header `audio features utterance_id domain`. Relative
// paths resolve against the manifest's directory. '#' lines are comments.
std::vector<ManifestEntry> read_manifest(const std::string& path);

// Loads audio and features, checks them against `config` and encodes the
// audio, padding with silence or trimming to frames * hop samples.
Utterance load_utterance(const ManifestEntry& entry, const wavenet::ModelConfig& config, std::uint64_t feature_seed);
Utterance make_utterance(std::string id, std::string domain, const audio::AudioBuffer& audio,
                         cond::FrameFeatures features, const wavenet::ModelConfig& config);

struct TrainRunConfig {
  int epochs = 1;
  std::uint64_t seed = 0;
  std::size_t batch_size = 1;  // chunks per optimizer step
  nn::LearningRateSchedule schedule;
  ChunkLayout layout;
  std::string checkpoint_path;  // written after every epoch when non-empty

  // Keys: epochs, seed, batch_size, learning_rate, anneal_factor.
  static TrainRunConfig from_keyvalue(const util::KeyValueFile& kv);
  static const std::vector<std::string>& keys();
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;       // 0-based
  double loss = 0.0;   // mean content cross-entropy seen during the epoch
  double learning_rate = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> trace;
};

// Teacher-forced chunked training. Each step averages the content
// cross-entropy over every content sample in its batch of chunks; chunk order
// is reshuffled each epoch from `config.seed`.
TrainResult train(wavenet::Model& model, const std::vector<Utterance>& dataset, const TrainRunConfig& config,
                  const std::function<void(const EpochRecord&)>& on_epoch = {});

// Mean teacher-forced content cross-entropy over all chunks, no update.
double evaluate(const wavenet::Model& model, const std::vector<Utterance>& dataset, const ChunkLayout& layout = {});

// Logits for one chunk: conditioning network, upsampling, stack.
nn::Tensor chunk_logits(const wavenet::Model& model, const Chunk& chunk);

// CSV with header epoch,loss,learning_rate.
void write_loss_trace(const std::string& path, const std::vector<EpochRecord>& trace);

}  // namespace ssws::train
