#pragma once

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lila/env/presets.hpp"
#include "lila/env/serialize.hpp"
#include "lila/eval/baselines.hpp"
#include "lila/models/architecture.hpp"
#include "lila/trainer/train.hpp"

namespace lila::io {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

enum class Scale { desk, paper };

inline Scale parse_scale(const std::string& s) {
  if (s == "desk") return Scale::desk;
  if (s == "paper") return Scale::paper;
  throw ConfigError("unknown scale '" + s + "' (expected desk or paper)");
}

inline const char* scale_name(Scale s) { return s == Scale::desk ? "desk" : "paper"; }

/// A fully resolved run: preset, scale, game, model choice and training
/// settings. Every field of the game and the training config can be
/// overridden by key.
struct RunConfig {
  std::string preset = "1a";
  Scale scale = Scale::desk;
  env::GameSpec game;
  train::TrainConfig train;
  model::Kind model = model::Kind::maidrqn;
  model::AdvantageMode advantage = model::AdvantageMode::softmax;  // dueling models only
  int hidden = 50;
  eval::Baseline baseline = eval::Baseline::none;

  /// Network for this run, with the baseline's variant applied.
  model::Architecture architecture() const {
    model::Architecture a;
    if (game.observation == env::ObservationMode::pixels) {
      a = model == model::Kind::maddrqn ? model::maddrqn_pixels(game) : model::maidrqn_pixels(game);
    } else {
      a = model::maidrqn_bits(game);
      if (model == model::Kind::maddrqn) {
        a.kind = model::Kind::maddrqn;
        a.value_head = true;
      }
    }
    if (a.kind == model::Kind::maddrqn) a.advantage = advantage;
    a.hidden = hidden;
    return eval::baseline_setup(baseline, game, a).second;
  }

  /// Game with the baseline's variant applied.
  env::GameSpec effective_game() const { return eval::baseline_setup(baseline, game, model::Architecture{}).first; }
};

/// Training scale for a preset: desk runs fit a laptop, paper runs match the
/// published budget (batch 100; 150k steps, or 40k for the pixel game). The
/// pixel game observes a 32x32 reduced render at desk scale.
inline void apply_scale(RunConfig& c) {
  const bool pixels = c.preset == "4";
  if (c.scale == Scale::desk) {
    c.train.batch = pixels ? 16 : 32;
    c.train.steps = pixels ? 2000 : 20000;
    c.train.eval_every = pixels ? 200 : 1000;
    if (pixels) c.game.render_scale = 2;
  } else {
    c.train.batch = 100;
    c.train.steps = pixels ? 40000 : 150000;
    c.train.eval_every = pixels ? 1000 : 5000;
    if (pixels) c.game.render_scale = 1;
  }
}

inline RunConfig preset_config(const std::string& preset, Scale scale = Scale::desk) {
  RunConfig c;
  c.preset = preset;
  c.scale = scale;
  c.game = env::preset_game(preset);
  c.model = preset == "4" ? model::Kind::maddrqn : model::Kind::maidrqn;
  apply_scale(c);
  c.train.gamma = c.game.gamma;
  return c;
}

namespace detail {

template <class N>
N parse_number(const std::string& key, const std::string& v) {
  N out{};
  if constexpr (std::is_floating_point_v<N>) {
    std::size_t used = 0;
    try {
      out = static_cast<N>(std::stod(v, &used));
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != v.size()) throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  } else {
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
      throw ConfigError("config: '" + key + "' expects an integer, got '" + v + "'");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: '" + key + "' expects true or false, got '" + v + "'");
}

template <class E>
E parse_enum(const std::string& key, const std::string& v) {
  E e = static_cast<E>(-1);
  nlohmann::json j = v;
  try {
    e = j.get<E>();
  } catch (const nlohmann::json::exception&) {
  }
  if (nlohmann::json(e) != j) throw ConfigError("config: bad value '" + v + "' for '" + key + "'");
  return e;
}

inline env::Cell parse_cell(const std::string& key, const std::string& v) {
  const auto comma = v.find(',');
  if (comma == std::string::npos) throw ConfigError("config: '" + key + "' expects x,y");
  return {parse_number<int>(key, v.substr(0, comma)), parse_number<int>(key, v.substr(comma + 1))};
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
  using detail::parse_number;
  static const std::map<std::string, Setter> table = {
      {"scale", [](RunConfig& c, auto&, auto& v) { c.scale = parse_scale(v); apply_scale(c); }},
      {"model", [](RunConfig& c, auto& k, auto& v) { c.model = parse_enum<model::Kind>(k, v); }},
      {"advantage", [](RunConfig& c, auto& k, auto& v) { c.advantage = parse_enum<model::AdvantageMode>(k, v); }},
      {"hidden", [](RunConfig& c, auto& k, auto& v) { c.hidden = parse_number<int>(k, v); }},
      {"baseline", [](RunConfig& c, auto&, auto& v) { c.baseline = eval::parse_baseline(v); }},
      // game
      {"width", [](RunConfig& c, auto& k, auto& v) { c.game.width = parse_number<int>(k, v); }},
      {"height", [](RunConfig& c, auto& k, auto& v) { c.game.height = parse_number<int>(k, v); }},
      {"horizon", [](RunConfig& c, auto& k, auto& v) { c.game.horizon = parse_number<int>(k, v); }},
      {"num_objects", [](RunConfig& c, auto& k, auto& v) { c.game.num_objects = parse_number<int>(k, v); }},
      {"observation", [](RunConfig& c, auto& k, auto& v) { c.game.observation = parse_enum<env::ObservationMode>(k, v); }},
      {"window", [](RunConfig& c, auto& k, auto& v) { c.game.window = parse_enum<env::Window>(k, v); }},
      {"principal_penalty", [](RunConfig& c, auto& k, auto& v) { c.game.principal_penalty = parse_number<double>(k, v); }},
      {"assistant_sees_target",
       [](RunConfig& c, auto& k, auto& v) { c.game.assistant_sees_target = parse_enum<env::TargetVisibility>(k, v); }},
      {"collision", [](RunConfig& c, auto& k, auto& v) { c.game.collision = parse_enum<env::Collision>(k, v); }},
      {"placement", [](RunConfig& c, auto& k, auto& v) { c.game.placement = parse_enum<env::Placement>(k, v); }},
      {"principal_start", [](RunConfig& c, auto& k, auto& v) { c.game.principal_start = parse_cell(k, v); }},
      {"assistant_start", [](RunConfig& c, auto& k, auto& v) { c.game.assistant_start = parse_cell(k, v); }},
      {"ensure_target_present", [](RunConfig& c, auto& k, auto& v) { c.game.ensure_target_present = parse_bool(k, v); }},
      {"solo", [](RunConfig& c, auto& k, auto& v) { c.game.solo = parse_bool(k, v); }},
      {"render_scale",
       [](RunConfig& c, auto& k, auto& v) {
         const int f = parse_number<int>(k, v);
         if (f != 1 && f != 2 && f != 4) throw ConfigError("config: '" + k + "' must be 1, 2 or 4, got '" + v + "'");
         c.game.render_scale = f;
       }},
      // training; gamma is shared by the game and the learner
      {"gamma", [](RunConfig& c, auto& k, auto& v) { c.train.gamma = c.game.gamma = parse_number<double>(k, v); }},
      {"batch", [](RunConfig& c, auto& k, auto& v) { c.train.batch = parse_number<int>(k, v); }},
      {"steps", [](RunConfig& c, auto& k, auto& v) { c.train.steps = parse_number<int>(k, v); }},
      {"epsilon", [](RunConfig& c, auto& k, auto& v) { c.train.epsilon = parse_number<double>(k, v); }},
      {"seed", [](RunConfig& c, auto& k, auto& v) { c.train.seed = parse_number<std::uint64_t>(k, v); }},
      {"eval_every", [](RunConfig& c, auto& k, auto& v) { c.train.eval_every = parse_number<int>(k, v); }},
      {"eval_tasks", [](RunConfig& c, auto& k, auto& v) { c.train.eval_tasks = parse_number<int>(k, v); }},
      {"checkpoint_every", [](RunConfig& c, auto& k, auto& v) { c.train.checkpoint_every = parse_number<int>(k, v); }},
      {"lr", [](RunConfig& c, auto& k, auto& v) { c.train.adam.lr = parse_number<double>(k, v); }},
  };
  return table;
}

}  // namespace detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> out{"preset"};
  for (const auto& [k, _] : detail::setters()) out.push_back(k);
  return out;
}

/// Applies one override. "preset" resets everything to that preset (at the
/// current scale), so it belongs before other keys.
inline void apply_override(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "preset") {
    c = preset_config(value, c.scale);
    return;
  }
  const auto& table = detail::setters();
  auto it = table.find(key);
  if (it == table.end()) throw ConfigError("config: unknown key '" + key + "'");
  it->second(c, key, value);
}

/// Parses "key = value" lines; '#' starts a comment. A "preset" line
/// selects the base configuration that later lines override.
inline RunConfig parse_config(const std::string& text, RunConfig base = {}) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    try {
      apply_override(base, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const std::invalid_argument& e) {
      throw ConfigError("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return base;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

inline nlohmann::json to_json(const RunConfig& c) {
  const auto& t = c.train;
  return {{"preset", c.preset},
          {"scale", scale_name(c.scale)},
          {"game", c.game},
          {"model", c.model},
          {"advantage", c.advantage},
          {"hidden", c.hidden},
          {"baseline", eval::baseline_name(c.baseline)},
          {"train",
           {{"batch", t.batch},
            {"steps", t.steps},
            {"epsilon", t.epsilon},
            {"gamma", t.gamma},
            {"seed", t.seed},
            {"eval_every", t.eval_every},
            {"eval_tasks", t.eval_tasks},
            {"checkpoint_every", t.checkpoint_every},
            {"lr", t.adam.lr},
            {"beta1", t.adam.beta1},
            {"beta2", t.adam.beta2},
            {"adam_eps", t.adam.eps}}}};
}

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig c;
  c.preset = j.at("preset").get<std::string>();
  c.scale = parse_scale(j.at("scale").get<std::string>());
  c.game = j.at("game").get<env::GameSpec>();
  c.model = j.at("model").get<model::Kind>();
  c.advantage = j.at("advantage").get<model::AdvantageMode>();
  c.hidden = j.at("hidden").get<int>();
  c.baseline = eval::parse_baseline(j.at("baseline").get<std::string>());
  const auto& t = j.at("train");
  c.train.batch = t.at("batch");
  c.train.steps = t.at("steps");
  c.train.epsilon = t.at("epsilon");
  c.train.gamma = t.at("gamma");
  c.train.seed = t.at("seed");
  c.train.eval_every = t.at("eval_every");
  c.train.eval_tasks = t.at("eval_tasks");
  c.train.checkpoint_every = t.at("checkpoint_every");
  c.train.adam.lr = t.at("lr");
  c.train.adam.beta1 = t.at("beta1");
  c.train.adam.beta2 = t.at("beta2");
  c.train.adam.eps = t.at("adam_eps");
  return c;
}

}  // namespace lila::io
