#pragma once

#include <array>
#include <random>
#include <stdexcept>
#include <vector>

#include "lila/env/observe.hpp"
#include "lila/models/network.hpp"

namespace lila::train {

using Rng = std::mt19937_64;

/// With probability 1-eps the lowest-index argmax, else uniform over actions.
template <class T>
int epsilon_greedy(const T* values, int n, double eps, Rng& rng) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw std::invalid_argument("epsilon_greedy: epsilon must lie in [0,1]");
  if (eps > 0.0) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) < eps) return std::uniform_int_distribution<int>(0, n - 1)(rng);
  }
  return model::argmax(values, n);
}

template <class T>
int epsilon_greedy(const num::Tensor<T>& values, double eps, Rng& rng) {
  return epsilon_greedy(values.data(), static_cast<int>(values.size()), eps, rng);
}

/// One played episode: what each agent saw before acting, the joint actions
/// and the environment's reward bookkeeping.
struct EpisodeRecord {
  env::TaskSpec task;
  std::vector<env::Observations> obs;                    // obs[t]: seen before acting at t
  std::vector<std::array<int, 2>> actions;               // actions[t]: {principal, assistant}
  std::vector<env::Transition> steps;                    // steps[t]: result of actions[t]
  std::vector<std::array<env::Cell, 2>> positions;       // positions[t]: before actions[t]; one extra final entry

  int length() const { return static_cast<int>(actions.size()); }
  double joint() const {
    double r = 0;
    for (const auto& s : steps) r += s.reward;
    return r;
  }
  double due(int agent) const {
    double r = 0;
    for (const auto& s : steps) r += s.attributed[agent];
    return r;
  }
};

/// Lockstep episodes over a batch of tasks, run on one tape. The per-step
/// network outputs are kept so a loss can be built on top without a second
/// forward pass.
template <class T>
struct BatchRollout {
  std::vector<EpisodeRecord> records;
  std::vector<model::StepOutput<T>> outputs;  // outputs[t]: heads on obs[t]
};

template <class T>
num::Var<T> stack_obs(num::Tape<T>& tape, const std::vector<const env::Obs*>& obs) {
  num::Shape s = obs.front()->shape();
  s.insert(s.begin(), static_cast<int>(obs.size()));
  num::Tensor<T> out(s);
  T* dst = out.data();
  for (const auto* o : obs) {
    for (float v : o->values()) *dst++ = static_cast<T>(v);
  }
  return tape.constant(std::move(out));
}

template <class T>
num::Var<T> stack_tasks(num::Tape<T>& tape, const std::vector<EpisodeRecord>& recs) {
  num::Tensor<T> t({static_cast<int>(recs.size()), 2});
  for (std::size_t b = 0; b < recs.size(); ++b) t[b * 2 + recs[b].task.target] = T(1);
  return tape.constant(std::move(t));
}

/// Step inputs for time t of every record, as tape constants.
template <class T>
std::array<num::Var<T>, 2> step_inputs(num::Tape<T>& tape, const std::vector<EpisodeRecord>& recs, int t, int agents) {
  std::array<num::Var<T>, 2> in{};
  for (int i = 0; i < agents; ++i) {
    std::vector<const env::Obs*> o;
    for (const auto& r : recs) o.push_back(&r.obs[t].agent[i]);
    in[i] = stack_obs(tape, o);
  }
  return in;
}

/// Plays one episode per task in lockstep with epsilon-greedy actions from
/// the heads. Recurrent state starts at zero. The assistant of a solo game
/// is recorded as staying put.
template <class T>
BatchRollout<T> rollout_on_tape(const model::AgentPair<T>& net, const num::BoundParams<T>& params, num::Tape<T>& tape,
                                const std::vector<env::TaskSpec>& tasks, double eps, Rng& rng) {
  if (tasks.empty()) throw std::invalid_argument("rollout: empty task batch");
  const int batch = static_cast<int>(tasks.size());
  const int horizon = tasks.front().spec.horizon;
  const int agents = net.arch().agents();
  for (const auto& t : tasks)
    if (t.spec.horizon != horizon) throw std::invalid_argument("rollout: tasks in a batch must share the horizon");

  BatchRollout<T> out;
  std::vector<env::WorldState> states;
  for (const auto& task : tasks) {
    auto [s, o] = env::env_init(task);
    EpisodeRecord r;
    r.task = task;
    r.obs.push_back(std::move(o));
    r.positions.push_back(s.pos);
    out.records.push_back(std::move(r));
    states.push_back(std::move(s));
  }
  auto state = net.bind_state(tape, model::RecurrentState<T>::zeros(net.arch(), batch));
  const num::Var<T> task_in = stack_tasks(tape, out.records);
  const int n = net.arch().actions;

  for (int t = 0; t < horizon; ++t) {
    auto step = net.step(params, step_inputs(tape, out.records, t, agents), task_in, state);
    state = step.next;
    for (int b = 0; b < batch; ++b) {
      auto& rec = out.records[b];
      std::array<int, 2> a{0, 0};
      for (int i = 0; i < agents; ++i) a[i] = epsilon_greedy(step.head[i].value().data() + b * n, n, eps, rng);
      auto res = env::env_step(states[b], rec.task, env::action_from_index(a[0]), env::action_from_index(a[1]));
      rec.actions.push_back(a);
      rec.steps.push_back(std::move(res.transition));
      rec.positions.push_back(states[b].pos);
      if (t + 1 < horizon) rec.obs.push_back(std::move(res.obs));
    }
    out.outputs.push_back(std::move(step));
  }
  return out;
}

/// Rollouts without gradient tracking.
template <class T>
std::vector<EpisodeRecord> rollout_batch(const model::AgentPair<T>& net, const num::ParamSet<T>& params,
                                         const std::vector<env::TaskSpec>& tasks, double eps, Rng& rng) {
  num::Tape<T> tape;
  auto p = num::bind(tape, params, false);
  return rollout_on_tape(net, p, tape, tasks, eps, rng).records;
}

template <class T>
EpisodeRecord rollout(const model::AgentPair<T>& net, const num::ParamSet<T>& params, const env::TaskSpec& task,
                      double eps, Rng& rng) {
  return rollout_batch(net, params, std::vector<env::TaskSpec>{task}, eps, rng).front();
}

/// Recomputes the per-step network outputs of recorded episodes from their
/// stored observations (zero initial state, same parameters).
template <class T>
std::vector<model::StepOutput<T>> replay_outputs(const model::AgentPair<T>& net, const num::BoundParams<T>& params,
                                                 num::Tape<T>& tape, const std::vector<EpisodeRecord>& recs) {
  if (recs.empty()) throw std::invalid_argument("replay: no records");
  const int horizon = recs.front().length();
  for (const auto& r : recs)
    if (r.length() != horizon || static_cast<int>(r.obs.size()) != horizon)
      throw std::invalid_argument("replay: records must be complete and of equal length");
  auto state = net.bind_state(tape, model::RecurrentState<T>::zeros(net.arch(), static_cast<int>(recs.size())));
  const num::Var<T> task_in = stack_tasks(tape, recs);
  std::vector<model::StepOutput<T>> out;
  for (int t = 0; t < horizon; ++t) {
    out.push_back(net.step(params, step_inputs(tape, recs, t, net.arch().agents()), task_in, state));
    state = out.back().next;
  }
  return out;
}

}  // namespace lila::train
