#pragma once

#include <stdexcept>
#include <string>

#include "ssws/nn/adam.hpp"
#include "ssws/nn/params.hpp"

namespace ssws::nn {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Binary checkpoint container; layout in docs/checkpoint-format.md.
// `metadata` is free text (the model config) stored alongside the tensors.
struct Checkpoint {
  std::string metadata;
  ParameterSet params;
  AdamState optimizer;
  bool has_optimizer = false;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const std::string& metadata, const ParameterSet& params,
                     const AdamState* optimizer);
Checkpoint load_checkpoint(const std::string& path);

// Copies values by name into `target`; every target tensor must be present
// with the same shape.
void assign_parameters(ParameterSet& target, const ParameterSet& source);

}  // namespace ssws::nn
