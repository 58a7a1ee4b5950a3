#pragma once

#include <random>
#include <string>

#include "ssws/nn/params.hpp"
#include "ssws/nn/tensor.hpp"

namespace ssws::cond {

// Gate blocks are laid out [input, forget, cell, output] along the 4H axis.
struct LstmWeights {
  nn::Tensor input_weight;      // [in, 4H]
  nn::Tensor recurrent_weight;  // [H, 4H]
  nn::Tensor bias;              // [4H]

  std::size_t hidden() const { return recurrent_weight.rows(); }
};

struct BiLstmWeights {
  LstmWeights forward;
  LstmWeights backward;
};

// Runs an LSTM over the rows of `x` ([F, in]) from zero state, returning the
// hidden state for every frame ([F, H]). With `reverse` the recurrence runs
// from the last frame to the first; row t of the result still belongs to
// frame t.
nn::Tensor lstm_sequence(const nn::Tensor& x, const LstmWeights& w, bool reverse);

// Forward and backward hidden states concatenated per frame: [F, 2H].
nn::Tensor bilstm_layer(const nn::Tensor& frames, const BiLstmWeights& w);

// Single affine map from the stacked recurrent output to the embedding.
nn::Tensor project_embedding(const nn::Tensor& stacked, const nn::Tensor& weight, const nn::Tensor& bias);

// Nearest-neighbour upsampling: each row repeated `hop` times. The adjoint
// sums each run of `hop` sample gradients back into its frame.
nn::Tensor upsample(const nn::Tensor& frame_embedding, std::size_t hop);

struct ConditioningConfig {
  std::size_t input_dims = 88;
  std::size_t lstm_hidden = 128;  // per direction
  std::size_t lstm_layers = 2;
  std::size_t embedding_dims = 128;  // residual channel count of the stack
};

// Two bi-directional LSTM layers, an affine projection and upsampling.
// Parameters live in the ParameterSet passed at construction.
class ConditioningNet {
 public:
  ConditioningNet(const ConditioningConfig& config, nn::ParameterSet& params, std::mt19937_64& rng,
                  const std::string& prefix = "cond.");

  const ConditioningConfig& config() const { return config_; }
  const BiLstmWeights& layer(std::size_t i) const { return layers_.at(i); }

  // [F, input_dims] -> [F, embedding_dims]
  nn::Tensor frame_embedding(const nn::Tensor& frames) const;
  // [F, input_dims] -> [F * hop, embedding_dims]
  nn::Tensor forward(const nn::Tensor& frames, std::size_t hop) const;

 private:
  ConditioningConfig config_;
  std::vector<BiLstmWeights> layers_;
  nn::Tensor projection_weight_;
  nn::Tensor projection_bias_;
};

}  // namespace ssws::cond
