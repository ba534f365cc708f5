#pragma once

#include <stdexcept>
#include <vector>

#include "lila/trainer/rollout.hpp"

namespace lila::train {

namespace detail {

inline std::vector<int> actions_at(const std::vector<EpisodeRecord>& recs, int t, int agent) {
  std::vector<int> a;
  a.reserve(recs.size());
  for (const auto& r : recs) a.push_back(r.actions[t][agent]);
  return a;
}

template <class T>
num::Var<T> rewards_at(num::Tape<T>& tape, const std::vector<EpisodeRecord>& recs, int t) {
  num::Tensor<T> r({static_cast<int>(recs.size())});
  for (std::size_t b = 0; b < recs.size(); ++b) r[b] = static_cast<T>(recs[b].steps[t].reward);
  return tape.constant(std::move(r));
}

/// y_t = r_t + gamma * stop_gradient(next), with y_H = r_H on the last step.
template <class T>
num::Var<T> bellman_target(num::Var<T> reward, num::Var<T> next_max, bool last, double gamma) {
  if (last) return reward;
  return num::add(reward, num::scale(num::stop_gradient(next_max), static_cast<T>(gamma)));
}

template <class T>
num::Var<T> maidrqn_terms(const model::Architecture& arch, const std::vector<model::StepOutput<T>>& out,
                          const std::vector<EpisodeRecord>& recs, double gamma) {
  num::Tape<T>& tape = *out.front().head[0].tape;
  const int horizon = static_cast<int>(out.size());
  const int agents = arch.agents();
  num::Var<T> total;
  for (int i = 0; i < agents; ++i) {
    for (int t = 0; t < horizon; ++t) {
      const bool last = t + 1 == horizon;
      auto q = num::gather_rows(out[t].head[i], actions_at(recs, t, i));
      auto y = bellman_target(rewards_at(tape, recs, t), last ? num::Var<T>{} : num::max_rows(out[t + 1].head[i]),
                              last, gamma);
      auto e = num::squared_error(q, y);
      total = total.valid() ? num::add(total, e) : e;
    }
  }
  return num::scale(total, T(1) / static_cast<T>(agents));
}

/// V + sum of per-agent advantages at the taken (or maximising) actions, [B].
template <class T>
num::Var<T> joint_value(const model::Architecture& arch, const model::StepOutput<T>& s,
                        const std::vector<int>* ap, const std::vector<int>* aa) {
  const int batch = s.head[0].shape()[0];
  num::Var<T> q = s.value.valid() ? num::reshape(s.value, {batch}) : num::Var<T>{};
  for (int i = 0; i < arch.agents(); ++i) {
    const std::vector<int>* a = i == 0 ? ap : aa;
    auto term = a ? num::gather_rows(s.head[i], *a) : num::max_rows(s.head[i]);
    q = q.valid() ? num::add(q, term) : term;
  }
  return q;
}

template <class T>
num::Var<T> maddrqn_terms(const model::Architecture& arch, const std::vector<model::StepOutput<T>>& out,
                          const std::vector<EpisodeRecord>& recs, double gamma) {
  num::Tape<T>& tape = *out.front().head[0].tape;
  const int horizon = static_cast<int>(out.size());
  num::Var<T> total;
  for (int t = 0; t < horizon; ++t) {
    const bool last = t + 1 == horizon;
    const auto ap = actions_at(recs, t, 0), aa = actions_at(recs, t, 1);
    auto q = joint_value(arch, out[t], &ap, &aa);
    // The joint max over 25 action pairs separates into per-agent maxima.
    auto y = bellman_target(rewards_at(tape, recs, t),
                            last ? num::Var<T>{} : joint_value<T>(arch, out[t + 1], nullptr, nullptr), last, gamma);
    auto e = num::squared_error(q, y);
    total = total.valid() ? num::add(total, e) : e;
  }
  return total;
}

}  // namespace detail

/// Batch loss (summed over episodes) built on already-computed step outputs.
template <class T>
num::Var<T> bellman_loss(const model::Architecture& arch, const std::vector<model::StepOutput<T>>& out,
                         const std::vector<EpisodeRecord>& recs, double gamma) {
  if (out.empty() || recs.empty()) throw std::invalid_argument("bellman_loss: empty batch");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("bellman_loss: gamma must lie in [0,1]");
  return arch.kind == model::Kind::maidrqn ? detail::maidrqn_terms(arch, out, recs, gamma)
                                           : detail::maddrqn_terms(arch, out, recs, gamma);
}

template <class T>
struct LossAndGrads {
  T loss = 0;
  std::vector<num::Tensor<T>> grads;  // aligned with the ParamSet
};

/// Replays the recorded episodes through the network and differentiates
/// the batch loss.
template <class T>
LossAndGrads<T> loss_and_grads(const model::AgentPair<T>& net, const num::ParamSet<T>& params,
                               const std::vector<EpisodeRecord>& recs, double gamma) {
  num::Tape<T> tape;
  auto p = num::bind(tape, params, true);
  auto loss = bellman_loss(net.arch(), replay_outputs(net, p, tape, recs), recs, gamma);
  tape.backward(loss);
  return {loss.value().item(), num::collect_grads(tape, p)};
}

/// Independent-Q loss: (1/N) sum over agents, steps and episodes of squared
/// Bellman errors.
template <class T>
T maidrqn_loss(const model::AgentPair<T>& net, const num::ParamSet<T>& params, const std::vector<EpisodeRecord>& recs,
               double gamma) {
  if (net.arch().kind != model::Kind::maidrqn) throw std::invalid_argument("maidrqn_loss: architecture is dueling");
  num::Tape<T> tape;
  auto p = num::bind(tape, params, false);
  return bellman_loss(net.arch(), replay_outputs(net, p, tape, recs), recs, gamma).value().item();
}

/// Dueling loss: squared errors of V + sum_i A^i against the joint target.
template <class T>
T maddrqn_loss(const model::AgentPair<T>& net, const num::ParamSet<T>& params, const std::vector<EpisodeRecord>& recs,
               double gamma) {
  if (net.arch().kind != model::Kind::maddrqn) throw std::invalid_argument("maddrqn_loss: architecture is independent");
  num::Tape<T> tape;
  auto p = num::bind(tape, params, false);
  return bellman_loss(net.arch(), replay_outputs(net, p, tape, recs), recs, gamma).value().item();
}

}  // namespace lila::train
