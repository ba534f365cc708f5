#pragma once

#include <memory>
#include <stdexcept>

#include "lila/io/run.hpp"

namespace lila::play {

/// A trained agent pair loaded read-only; shared by every session.
struct Model {
  model::AgentPair<float> net;
  num::ParamSet<float> params;
  env::GameSpec game;

  static std::shared_ptr<const Model> from_checkpoint(const io::Checkpoint& k) {
    auto c = io::run_config_from_json(k.config);
    auto m = std::make_shared<Model>(Model{model::AgentPair<float>(k.arch), k.params, c.effective_game()});
    auto fresh = m->net.init_params(0);
    if (fresh.size() != m->params.size()) throw std::invalid_argument("Model: checkpoint parameters do not fit its architecture");
    for (int i = 0; i < static_cast<int>(fresh.size()); ++i)
      if (fresh.name(i) != m->params.name(i) || fresh[i].shape() != m->params[i].shape())
        throw std::invalid_argument("Model: parameter " + fresh.name(i) + " does not fit its architecture");
    return m;
  }
};

/// Steps one agent of a shared model greedily, carrying its own recurrent
/// state. Uses the same forward pass as the trainer's rollouts.
class AgentDriver {
 public:
  AgentDriver(std::shared_ptr<const Model> model, int agent) : model_(std::move(model)), agent_(agent) {
    if (agent_ != env::kPrincipal && agent_ != env::kAssistant) throw std::invalid_argument("AgentDriver: bad agent");
    reset();
  }

  void reset() {
    h_ = num::Tensor<float>({1, model_->net.arch().hidden});
    c_ = h_;
  }

  /// Greedy action for `obs`; advances the recurrent state.
  int act(const env::Obs& obs, int target_class) {
    num::Tape<float> tape;
    auto p = num::bind(tape, model_->params, false);
    num::Tensor<float> task({1, 2});
    task[target_class] = 1.0f;
    auto s = model_->net.agent_forward(p, agent_, tape.constant(model::batch_of_one(obs)), tape.constant(task),
                                       tape.constant(h_), tape.constant(c_));
    h_ = s.h.value();
    c_ = s.c.value();
    return model::argmax(model_->net.advantage(s.logits).value());
  }

  const num::Tensor<float>& hidden() const { return h_; }

 private:
  std::shared_ptr<const Model> model_;
  int agent_;
  num::Tensor<float> h_, c_;
};

}  // namespace lila::play
