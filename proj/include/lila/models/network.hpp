#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>

#include "lila/models/architecture.hpp"
#include "lila/numerics/ops.hpp"
#include "lila/numerics/params.hpp"

namespace lila::model {

using num::Tensor;
using num::Var;

/// Per-agent hidden and cell vectors, [batch, hidden] each.
template <class T>
struct RecurrentState {
  std::array<Tensor<T>, 2> h;
  std::array<Tensor<T>, 2> c;

  static RecurrentState zeros(const Architecture& arch, int batch) {
    RecurrentState s;
    for (int i = 0; i < 2; ++i) {
      s.h[i] = Tensor<T>({batch, arch.hidden});
      s.c[i] = Tensor<T>({batch, arch.hidden});
    }
    return s;
  }
  bool operator==(const RecurrentState&) const = default;
};

/// Recurrent state as tape variables.
template <class T>
struct StateVars {
  std::array<Var<T>, 2> h;
  std::array<Var<T>, 2> c;
};

template <class T>
struct StepOutput {
  std::array<Var<T>, 2> logits;  // raw head outputs
  std::array<Var<T>, 2> head;    // Q values (maidrqn) or advantages (maddrqn)
  Var<T> value;                  // [batch, 1]; invalid without a value head
  StateVars<T> next;
};

inline std::string agent_prefix(int agent) { return agent == env::kPrincipal ? "P/" : "A/"; }

/// Forward pass of an agent pair, batched over episodes.
template <class T>
class AgentPair {
 public:
  explicit AgentPair(Architecture arch) : arch_(std::move(arch)) { arch_.conv_features(); }

  const Architecture& arch() const { return arch_; }

  std::string trunk_prefix(int agent) const { return arch_.shared_trunk ? "trunk/" : agent_prefix(agent) + "trunk/"; }

  /// Weights ~ U(+-sqrt(1/fan_in)); biases zero except LSTM forget gates (1).
  num::ParamSet<T> init_params(std::uint64_t seed) const {
    num::ParamSet<T> p;
    std::mt19937_64 rng(seed);
    auto weight = [&](const std::string& name, num::Shape shape, int fan_in) {
      const double bound = std::sqrt(1.0 / fan_in);
      std::uniform_real_distribution<double> u(-bound, bound);
      Tensor<T> t(std::move(shape));
      for (auto& v : t.values()) v = static_cast<T>(u(rng));
      p.add(name, std::move(t));
    };
    auto bias = [&](const std::string& name, int n) { p.add(name, Tensor<T>({n})); };

    for (int agent = 0; agent < arch_.agents(); ++agent) {
      if (arch_.shared_trunk && agent > 0) break;
      const std::string pre = trunk_prefix(agent);
      int channels = arch_.input[2];
      for (std::size_t l = 0; l < arch_.convs.size(); ++l) {
        const auto& c = arch_.convs[l];
        const std::string n = pre + "conv" + std::to_string(l + 1);
        weight(n + "/w", {c.kernel, c.kernel, channels, c.filters}, c.kernel * c.kernel * channels);
        bias(n + "/b", c.filters);
        channels = c.filters;
      }
      if (arch_.dense_units > 0) {
        weight(pre + "dense/w", {arch_.conv_features(), arch_.dense_units}, arch_.conv_features());
        bias(pre + "dense/b", arch_.dense_units);
      }
    }
    for (int agent = 0; agent < arch_.agents(); ++agent) {
      const std::string pre = agent_prefix(agent);
      const int in = arch_.core_input(agent);
      const int hd = arch_.hidden;
      if (arch_.core(agent) == Core::recurrent) {
        weight(pre + "lstm/w", {in + hd, 4 * hd}, in + hd);
        Tensor<T> b({4 * hd});
        for (int j = hd; j < 2 * hd; ++j) b[j] = T(1);
        p.add(pre + "lstm/b", std::move(b));
      } else {
        weight(pre + "ff/w", {in, hd}, in);
        bias(pre + "ff/b", hd);
      }
      weight(pre + "head/w", {hd, arch_.actions}, hd);
      bias(pre + "head/b", arch_.actions);
    }
    if (arch_.value_head) {
      weight("value/w", {hd_total(), 1}, hd_total());
      bias("value/b", 1);
    }
    return p;
  }

  StateVars<T> bind_state(num::Tape<T>& tape, const RecurrentState<T>& s) const {
    StateVars<T> v;
    for (int i = 0; i < 2; ++i) {
      v.h[i] = tape.constant(s.h[i]);
      v.c[i] = tape.constant(s.c[i]);
    }
    return v;
  }

  static RecurrentState<T> read_state(const StateVars<T>& v) {
    RecurrentState<T> s;
    for (int i = 0; i < 2; ++i) {
      s.h[i] = v.h[i].value();
      s.c[i] = v.c[i].value();
    }
    return s;
  }

  /// Trunk features for one agent: obs [B,H,W,C] -> [B, trunk_features].
  Var<T> trunk(const num::BoundParams<T>& p, int agent, Var<T> obs) const {
    const std::string pre = trunk_prefix(agent);
    Var<T> x = obs;
    for (std::size_t l = 0; l < arch_.convs.size(); ++l) {
      const std::string n = pre + "conv" + std::to_string(l + 1);
      x = num::relu(num::add_bias(num::conv2d(x, p[n + "/w"], arch_.convs[l].stride, arch_.padding), p[n + "/b"]));
    }
    x = num::reshape(x, {x.shape()[0], arch_.conv_features()});
    if (arch_.dense_units > 0) x = num::relu(num::add_bias(num::matmul(x, p[pre + "dense/w"]), p[pre + "dense/b"]));
    return x;
  }

  struct AgentStep {
    Var<T> logits;
    Var<T> core;  // core output fed to the heads
    Var<T> h, c;  // next recurrent state (passed through for feedforward cores)
  };

  /// Trunk, core and head for one agent.
  AgentStep agent_forward(const num::BoundParams<T>& p, int agent, Var<T> obs, Var<T> task, Var<T> h,
                          Var<T> c) const {
    const std::string pre = agent_prefix(agent);
    Var<T> x = trunk(p, agent, obs);
    if (agent == env::kPrincipal && arch_.task_dim > 0) x = num::concat(x, task);
    AgentStep s{{}, {}, h, c};
    if (arch_.core(agent) == Core::recurrent) {
      auto [h2, c2] = num::lstm_cell(x, h, c, p[pre + "lstm/w"], p[pre + "lstm/b"]);
      s.h = h2;
      s.c = c2;
      s.core = h2;
    } else {
      s.core = num::relu(num::add_bias(num::matmul(x, p[pre + "ff/w"]), p[pre + "ff/b"]));
    }
    s.logits = num::add_bias(num::matmul(s.core, p[pre + "head/w"]), p[pre + "head/b"]);
    return s;
  }

  /// One time step for both agents. `obs[i]` is [B,H,W,C]; `task` is [B,2]
  /// (ignored when the architecture has no task input).
  StepOutput<T> step(const num::BoundParams<T>& p, const std::array<Var<T>, 2>& obs, Var<T> task,
                     const StateVars<T>& state) const {
    StepOutput<T> out;
    out.next = state;
    std::array<Var<T>, 2> core_out{};
    for (int agent = 0; agent < arch_.agents(); ++agent) {
      auto s = agent_forward(p, agent, obs[agent], task, state.h[agent], state.c[agent]);
      out.logits[agent] = s.logits;
      out.next.h[agent] = s.h;
      out.next.c[agent] = s.c;
      out.head[agent] = advantage(s.logits);
      core_out[agent] = s.core;
    }
    if (arch_.value_head) {
      Var<T> joint = arch_.solo ? core_out[0] : num::concat(core_out[0], core_out[1]);
      out.value = num::add_bias(num::matmul(joint, p["value/w"]), p["value/b"]);
    }
    return out;
  }

  Var<T> advantage(Var<T> logits) const {
    switch (arch_.advantage) {
      case AdvantageMode::softmax: return num::sub(logits, num::softmax(logits));
      case AdvantageMode::mean: return num::center_rows(logits);
      case AdvantageMode::none: break;
    }
    return logits;
  }

 private:
  int hd_total() const { return arch_.hidden * arch_.agents(); }

  Architecture arch_;
};

template <class T>
Tensor<T> batch_of_one(const Tensor<T>& t) {
  num::Shape s = t.shape();
  s.insert(s.begin(), 1);
  return t.reshaped(std::move(s));
}

/// Single-agent forward of the independent model: Q values for 5 actions
/// and the agent's next recurrent state.
template <class T>
std::pair<Tensor<T>, std::pair<Tensor<T>, Tensor<T>>> maidrqn_forward(const AgentPair<T>& net,
                                                                     const num::ParamSet<T>& params, int agent,
                                                                     const Tensor<T>& obs, const Tensor<T>& h,
                                                                     const Tensor<T>& c,
                                                                     const Tensor<T>& task = Tensor<T>({1, 2})) {
  num::Tape<T> tape;
  auto p = num::bind(tape, params, false);
  auto s = net.agent_forward(p, agent, tape.constant(batch_of_one(obs)), tape.constant(task), tape.constant(h),
                             tape.constant(c));
  return {s.logits.value().reshaped({net.arch().actions}), {s.h.value(), s.c.value()}};
}

template <class T>
struct DuelingOutput {
  Tensor<T> adv_p;  // [5]
  Tensor<T> adv_a;  // [5]
  T value = 0;
  RecurrentState<T> next;
};

/// Joint forward of the dueling model for a single episode step.
template <class T>
DuelingOutput<T> maddrqn_forward(const AgentPair<T>& net, const num::ParamSet<T>& params, const Tensor<T>& obs_p,
                                 const Tensor<T>& obs_a, const Tensor<T>& task_one_hot,
                                 const RecurrentState<T>& state) {
  if (task_one_hot.size() != 2) throw std::invalid_argument("maddrqn_forward: task one-hot needs 2 entries");
  num::Tape<T> tape;
  auto p = num::bind(tape, params, false);
  auto out = net.step(p, {tape.constant(batch_of_one(obs_p)), tape.constant(batch_of_one(obs_a))},
                      tape.constant(task_one_hot.reshaped({1, 2})), net.bind_state(tape, state));
  DuelingOutput<T> d;
  const int n = net.arch().actions;
  d.adv_p = out.head[0].value().reshaped({n});
  d.adv_a = out.head[1].value().reshaped({n});
  d.value = out.value.valid() ? out.value.value()[0] : T(0);
  d.next = AgentPair<T>::read_state(out.next);
  return d;
}

/// Centralised action value: V + A^P[a_p] + A^A[a_a].
template <class T>
T joint_q(T value, const Tensor<T>& adv_p, const Tensor<T>& adv_a, int a_p, int a_a) {
  if (a_p < 0 || a_a < 0 || a_p >= static_cast<int>(adv_p.size()) || a_a >= static_cast<int>(adv_a.size()))
    throw std::out_of_range("joint_q: action index");
  return value + adv_p[a_p] + adv_a[a_a];
}

/// Lowest index of the maximum.
template <class T>
int argmax(const T* v, int n) {
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

template <class T>
int argmax(const Tensor<T>& v) {
  return argmax(v.data(), static_cast<int>(v.size()));
}

}  // namespace lila::model
