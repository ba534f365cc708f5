#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "lila/env/game.hpp"

namespace lila::eval {

struct PlanResult {
  double value = 0;                          // optimal discounted joint return
  std::vector<std::array<int, 2>> actions;   // one optimal joint action sequence (first found)
  std::size_t sequences = 0;                 // joint action sequences enumerated
};

inline constexpr int kMaxOracleHorizon = 4;
inline constexpr int kMaxOracleCells = 9;
inline constexpr int kMaxOracleObjects = 3;

/// Exact optimum of sum_t gamma^t r_t over the first `horizon` steps, by
/// enumerating all 25^horizon joint action sequences under full
/// observability. Prefix states are cached, so each sequence costs one step.
inline PlanResult brute_force_return(const env::TaskSpec& task, int horizon, double gamma) {
  const auto& spec = task.spec;
  if (horizon < 1 || horizon > kMaxOracleHorizon || horizon > spec.horizon)
    throw std::invalid_argument("brute_force_return: horizon " + std::to_string(horizon) + " outside [1, " +
                                std::to_string(std::min(kMaxOracleHorizon, spec.horizon)) + "]");
  if (spec.width * spec.height > kMaxOracleCells || spec.width > 3 || spec.height > 3)
    throw std::invalid_argument("brute_force_return: grid larger than 3x3");
  if (static_cast<int>(task.objects.size()) > kMaxOracleObjects)
    throw std::invalid_argument("brute_force_return: more than 3 objects");
  if (!(gamma >= 0 && gamma <= 1)) throw std::invalid_argument("brute_force_return: gamma must lie in [0,1]");

  constexpr int kJoint = env::kNumActions * env::kNumActions;
  std::vector<env::WorldState> state(horizon + 1);
  std::vector<double> ret(horizon + 1, 0.0);
  std::vector<int> digit(horizon, 0);
  std::vector<double> discount(horizon);
  for (int t = 0; t < horizon; ++t) discount[t] = std::pow(gamma, t);
  state[0] = env::initial_state(task);

  PlanResult best;
  best.value = -std::numeric_limits<double>::infinity();
  int from = 0;  // first depth whose state must be recomputed
  for (;;) {
    for (int t = from; t < horizon; ++t) {
      state[t + 1] = state[t];
      const int j = digit[t];
      const auto tr = env::advance(state[t + 1], task, static_cast<env::Action>(j / env::kNumActions),
                                   static_cast<env::Action>(j % env::kNumActions));
      ret[t + 1] = ret[t] + discount[t] * tr.reward;
    }
    ++best.sequences;
    if (ret[horizon] > best.value) {
      best.value = ret[horizon];
      best.actions.clear();
      for (int t = 0; t < horizon; ++t) best.actions.push_back({digit[t] / env::kNumActions, digit[t] % env::kNumActions});
    }
    int d = horizon - 1;
    while (d >= 0 && ++digit[d] == kJoint) digit[d--] = 0;
    if (d < 0) break;
    from = d;
  }
  return best;
}

}  // namespace lila::eval
