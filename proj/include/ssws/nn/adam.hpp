#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ssws/nn/params.hpp"

namespace ssws::nn {

struct LearningRateSchedule {
  double initial_rate = 5e-4;
  double anneal_factor = 0.836;  // multiplied in after every epoch

  // Rate in effect during epoch `epoch` (0-based).
  double rate(int epoch) const;
};

struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step_count = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;

  // Zero moments shaped like `params`.
  static AdamState for_params(const ParameterSet& params);
};

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One bias-corrected Adam update using the gradients currently accumulated
// on `params` (missing gradients count as zero). If any gradient is not
// finite, throws NonFiniteError and leaves parameters and state untouched.
void adam_step(ParameterSet& params, AdamState& state, double rate);

}  // namespace ssws::nn
