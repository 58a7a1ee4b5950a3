#include "ssws/wavenet/model.hpp"

#include <random>
#include <stdexcept>

#include "ssws/cond/features.hpp"
#include "ssws/nn/checkpoint.hpp"

namespace ssws::wavenet {

cond::ConditioningConfig ModelConfig::conditioning() const {
  cond::ConditioningConfig c;
  c.input_dims = cond::kFeatureDims;
  c.lstm_hidden = lstm_hidden;
  c.lstm_layers = lstm_layers;
  c.embedding_dims = stack.residual_channels;
  return c;
}

void ModelConfig::validate() const {
  stack.validate();
  if (lstm_hidden < 1 || lstm_layers < 1) throw std::invalid_argument("lstm sizes must be positive");
  if (sample_rate <= 0) throw std::invalid_argument("sample_rate must be positive");
  if (hop_size < 1) throw std::invalid_argument("hop_size must be >= 1");
}

const std::vector<std::string>& ModelConfig::keys() {
  static const std::vector<std::string> k{"blocks",      "layers",   "r",          "s",
                                          "a",           "kernel",   "sample_rate", "hop_size",
                                          "lstm_hidden", "lstm_layers"};
  return k;
}

ModelConfig ModelConfig::from_keyvalue(const util::KeyValueFile& kv) {
  ModelConfig c;
  auto size = [&](const char* key, std::size_t fallback) {
    long long v = kv.get_int(key, static_cast<long long>(fallback));
    if (v < 0) throw std::invalid_argument(std::string("config key ") + key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  c.stack.blocks = size("blocks", c.stack.blocks);
  c.stack.layers_per_block = size("layers", c.stack.layers_per_block);
  c.stack.residual_channels = size("r", c.stack.residual_channels);
  c.stack.skip_channels = size("s", c.stack.skip_channels);
  c.stack.quantization_bins = size("a", c.stack.quantization_bins);
  c.stack.kernel_size = size("kernel", c.stack.kernel_size);
  c.sample_rate = static_cast<int>(kv.get_int("sample_rate", c.sample_rate));
  c.hop_size = static_cast<int>(kv.get_int("hop_size", c.hop_size));
  c.lstm_hidden = size("lstm_hidden", c.lstm_hidden);
  c.lstm_layers = size("lstm_layers", c.lstm_layers);
  c.validate();
  return c;
}

util::KeyValueFile ModelConfig::to_keyvalue() const {
  util::KeyValueFile kv;
  kv.set("blocks", std::to_string(stack.blocks));
  kv.set("layers", std::to_string(stack.layers_per_block));
  kv.set("r", std::to_string(stack.residual_channels));
  kv.set("s", std::to_string(stack.skip_channels));
  kv.set("a", std::to_string(stack.quantization_bins));
  kv.set("kernel", std::to_string(stack.kernel_size));
  kv.set("sample_rate", std::to_string(sample_rate));
  kv.set("hop_size", std::to_string(hop_size));
  kv.set("lstm_hidden", std::to_string(lstm_hidden));
  kv.set("lstm_layers", std::to_string(lstm_layers));
  return kv;
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config.validate();
  std::mt19937_64 rng(seed);
  conditioning_ = std::make_unique<cond::ConditioningNet>(config.conditioning(), params_, rng);
  stack_ = std::make_unique<WaveNetStack>(config.stack, params_, rng);
}

void Model::save(const std::string& path, const nn::AdamState* optimizer) const {
  nn::save_checkpoint(path, config_.to_keyvalue().to_string(), params_, optimizer);
}

std::unique_ptr<Model> Model::load(const std::string& path, nn::AdamState* optimizer) {
  auto ck = nn::load_checkpoint(path);
  auto config = ModelConfig::from_keyvalue(util::KeyValueFile::parse(ck.metadata));
  auto model = std::make_unique<Model>(config, 0);
  nn::assign_parameters(model->params_, ck.params);
  if (optimizer) {
    if (!ck.has_optimizer) throw nn::CheckpointError("checkpoint has no optimizer state");
    *optimizer = std::move(ck.optimizer);
  }
  return model;
}

}  // namespace ssws::wavenet
