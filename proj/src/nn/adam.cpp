#include "ssws/nn/adam.hpp"

#include <cmath>

namespace ssws::nn {

double LearningRateSchedule::rate(int epoch) const {
  if (epoch < 0) throw std::invalid_argument("epoch must be >= 0");
  return initial_rate * std::pow(anneal_factor, epoch);
}

AdamState AdamState::for_params(const ParameterSet& params) {
  AdamState state;
  for (const auto& [name, t] : params) {
    state.first_moment.emplace_back(t.size(), 0.0);
    state.second_moment.emplace_back(t.size(), 0.0);
  }
  return state;
}

void adam_step(ParameterSet& params, AdamState& state, double rate) {
  if (!(rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
    throw std::invalid_argument("optimizer state does not match parameter set");
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (state.first_moment[p].size() != params[p].size())
      throw std::invalid_argument("optimizer moments misshaped for " + params.name(p));
    for (double g : params[p].grad())
      if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in " + params.name(p));
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto grad = params[p].grad();
    auto values = params[p].data();
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      values[i] -= rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

}  // namespace ssws::nn
