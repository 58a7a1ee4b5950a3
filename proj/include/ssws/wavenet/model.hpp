#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "ssws/cond/conditioning.hpp"
#include "ssws/nn/adam.hpp"
#include "ssws/nn/params.hpp"
#include "ssws/util/keyvalue.hpp"
#include "ssws/wavenet/stack.hpp"

namespace ssws::wavenet {

// Everything needed to rebuild a model: stack topology, conditioning
// network sizes and the audio framing.
struct ModelConfig {
  StackConfig stack;
  std::size_t lstm_hidden = 128;
  std::size_t lstm_layers = 2;
  int sample_rate = 24000;
  int hop_size = 120;

  cond::ConditioningConfig conditioning() const;
  void validate() const;

  // Keys: blocks, layers, r, s, a, kernel, sample_rate, hop_size,
  // lstm_hidden, lstm_layers. Missing keys keep their defaults.
  static ModelConfig from_keyvalue(const util::KeyValueFile& kv);
  util::KeyValueFile to_keyvalue() const;
  static const std::vector<std::string>& keys();
};

// Conditioning network and waveform stack sharing one parameter set.
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  nn::ParameterSet& params() { return params_; }
  const nn::ParameterSet& params() const { return params_; }
  const cond::ConditioningNet& conditioning() const { return *conditioning_; }
  const WaveNetStack& stack() const { return *stack_; }

  void save(const std::string& path, const nn::AdamState* optimizer = nullptr) const;
  // Rebuilds the model from a checkpoint's embedded config and weights.
  static std::unique_ptr<Model> load(const std::string& path, nn::AdamState* optimizer = nullptr);

 private:
  ModelConfig config_;
  nn::ParameterSet params_;
  std::unique_ptr<cond::ConditioningNet> conditioning_;
  std::unique_ptr<WaveNetStack> stack_;
};

}  // namespace ssws::wavenet
