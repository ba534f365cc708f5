#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lila/env/game.hpp"
#include "lila/env/observe.hpp"
#include "lila/numerics/ops.hpp"

namespace lila::model {

/// Which loss trains the pair: independent per-agent Q (MAIDRQN) or the
/// joint value-plus-advantages decomposition (MADDRQN).
enum class Kind { maidrqn, maddrqn };
enum class Core { recurrent, feedforward };
/// How head logits become advantages.
enum class AdvantageMode { softmax, mean, none };

NLOHMANN_JSON_SERIALIZE_ENUM(Kind, {{Kind::maidrqn, "maidrqn"}, {Kind::maddrqn, "maddrqn"}})
NLOHMANN_JSON_SERIALIZE_ENUM(AdvantageMode,
                             {{AdvantageMode::softmax, "softmax"}, {AdvantageMode::mean, "mean"}, {AdvantageMode::none, "none"}})

struct ConvLayer {
  int filters = 0;
  int kernel = 0;
  int stride = 1;
  bool operator==(const ConvLayer&) const = default;
};

struct Architecture {
  Kind kind = Kind::maidrqn;
  num::Shape input;  // [H, W, C] per agent
  std::vector<ConvLayer> convs;
  num::Padding padding = num::Padding::same;
  int dense_units = 0;        // fully connected layer between convs and core; 0 = none
  bool shared_trunk = false;  // conv and dense weights shared by both agents
  int task_dim = 0;           // one-hot task entries appended to the principal's core input
  int hidden = 50;
  int actions = env::kNumActions;
  Core principal_core = Core::recurrent;
  Core assistant_core = Core::recurrent;
  AdvantageMode advantage = AdvantageMode::none;
  bool value_head = false;
  bool solo = false;

  bool operator==(const Architecture&) const = default;

  int agents() const { return solo ? 1 : 2; }
  Core core(int agent) const { return agent == env::kPrincipal ? principal_core : assistant_core; }

  /// Spatial output of the conv stack, flattened.
  int conv_features() const {
    num::Shape s{1, input.at(0), input.at(1), input.at(2)};
    for (const auto& c : convs) {
      auto g = num::conv_geometry(s, {c.kernel, c.kernel, s[3], c.filters}, c.stride, padding);
      if (g.out_h < 1 || g.out_w < 1 || (padding == num::Padding::valid && (c.kernel > s[1] || c.kernel > s[2])))
        throw std::invalid_argument("Architecture: conv stack does not fit input " + num::shape_str(input));
      s = {1, g.out_h, g.out_w, c.filters};
    }
    return s[1] * s[2] * s[3];
  }
  int trunk_features() const { return dense_units > 0 ? dense_units : conv_features(); }
  int core_input(int agent) const { return trunk_features() + (agent == env::kPrincipal ? task_dim : 0); }

  nlohmann::json to_json() const {
    nlohmann::json convs_j = nlohmann::json::array();
    for (const auto& c : convs) convs_j.push_back({c.filters, c.kernel, c.stride});
    return {{"kind", kind == Kind::maidrqn ? "maidrqn" : "maddrqn"},
            {"input", input},
            {"convs", convs_j},
            {"padding", padding == num::Padding::same ? "same" : "valid"},
            {"dense_units", dense_units},
            {"shared_trunk", shared_trunk},
            {"task_dim", task_dim},
            {"hidden", hidden},
            {"actions", actions},
            {"principal_core", principal_core == Core::recurrent ? "lstm" : "feedforward"},
            {"assistant_core", assistant_core == Core::recurrent ? "lstm" : "feedforward"},
            {"advantage", advantage == AdvantageMode::softmax ? "softmax"
                          : advantage == AdvantageMode::mean  ? "mean"
                                                              : "none"},
            {"value_head", value_head},
            {"solo", solo}};
  }

  /// Canonical single-line descriptor stored in checkpoints.
  std::string descriptor() const { return to_json().dump(); }

  static Architecture from_json(const nlohmann::json& j) {
    Architecture a;
    a.kind = j.at("kind") == "maidrqn" ? Kind::maidrqn : Kind::maddrqn;
    a.input = j.at("input").get<num::Shape>();
    for (const auto& c : j.at("convs")) a.convs.push_back({c[0].get<int>(), c[1].get<int>(), c[2].get<int>()});
    a.padding = j.at("padding") == "same" ? num::Padding::same : num::Padding::valid;
    a.dense_units = j.at("dense_units");
    a.shared_trunk = j.at("shared_trunk");
    a.task_dim = j.at("task_dim");
    a.hidden = j.at("hidden");
    a.actions = j.at("actions");
    a.principal_core = j.at("principal_core") == "lstm" ? Core::recurrent : Core::feedforward;
    a.assistant_core = j.at("assistant_core") == "lstm" ? Core::recurrent : Core::feedforward;
    const std::string adv = j.at("advantage");
    a.advantage = adv == "softmax" ? AdvantageMode::softmax : adv == "mean" ? AdvantageMode::mean : AdvantageMode::none;
    a.value_head = j.at("value_head");
    a.solo = j.at("solo");
    return a;
  }
};

/// Independent per-agent conv-LSTM Q networks over bit-vector grids:
/// two 10-filter 3x3 stride-1 conv layers, a 50-unit LSTM and a 5-way head.
inline Architecture maidrqn_bits(const env::GameSpec& spec) {
  Architecture a;
  a.kind = Kind::maidrqn;
  a.input = env::observation_shape(spec);
  a.convs = {{10, 3, 1}, {10, 3, 1}};
  a.padding = num::Padding::same;
  a.solo = spec.solo;
  return a;
}

/// Shared pixel trunk (16 8x8/4, 32 8x8/2, 256 dense at full render), per-agent LSTM and
/// advantage heads, joint value head.
inline Architecture maddrqn_pixels(const env::GameSpec& spec) {
  Architecture a;
  a.kind = Kind::maddrqn;
  a.input = env::observation_shape(spec);
  // A reduced render shrinks the first kernel and stride with it, so the
  // later layers see the same 15x15 map.
  const int f = spec.observation == env::ObservationMode::pixels ? spec.render_scale : 1;
  a.convs = {{16, 8 / f, 4 / f}, {32, 8, 2}};
  a.padding = num::Padding::valid;
  a.dense_units = 256;
  a.shared_trunk = true;
  a.task_dim = 2;
  a.advantage = AdvantageMode::softmax;
  a.value_head = true;
  a.solo = spec.solo;
  return a;
}

/// The dueling pixel model without its value head and without advantage
/// subtraction, trained with the independent loss.
inline Architecture maidrqn_pixels(const env::GameSpec& spec) {
  Architecture a = maddrqn_pixels(spec);
  a.kind = Kind::maidrqn;
  a.advantage = AdvantageMode::none;
  a.value_head = false;
  return a;
}

}  // namespace lila::model
