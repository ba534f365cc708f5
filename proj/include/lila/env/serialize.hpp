#pragma once

#include <nlohmann/json.hpp>

#include "lila/env/game.hpp"

namespace lila::env {

NLOHMANN_JSON_SERIALIZE_ENUM(ObservationMode, {{ObservationMode::bits, "bits"}, {ObservationMode::pixels, "pixels"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Window, {{Window::full, "full"}, {Window::one_cell, "one_cell"}, {Window::camera, "camera"}})
NLOHMANN_JSON_SERIALIZE_ENUM(TargetVisibility, {{TargetVisibility::never, "never"},
                                                {TargetVisibility::always, "always"},
                                                {TargetVisibility::coin_flip, "coin_flip"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Collision, {{Collision::co_occupancy, "co_occupancy"}, {Collision::exclusive, "exclusive"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Placement, {{Placement::anywhere, "anywhere"}, {Placement::exterior, "exterior"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Collector, {{Collector::principal, "P"}, {Collector::assistant, "A"}, {Collector::both, "both"}})

inline void to_json(nlohmann::json& j, const Cell& c) { j = nlohmann::json::array({c.x, c.y}); }
inline void from_json(const nlohmann::json& j, Cell& c) {
  if (!j.is_array() || j.size() != 2) throw std::invalid_argument("cell must be [x, y], got " + j.dump());
  c = {j[0].get<int>(), j[1].get<int>()};
}

inline void to_json(nlohmann::json& j, const GameSpec& g) {
  j = {{"width", g.width},
       {"height", g.height},
       {"cells", g.cells},
       {"horizon", g.horizon},
       {"gamma", g.gamma},
       {"num_objects", g.num_objects},
       {"observation", g.observation},
       {"window", g.window},
       {"principal_penalty", g.principal_penalty},
       {"assistant_sees_target", g.assistant_sees_target},
       {"collision", g.collision},
       {"placement", g.placement},
       {"fixed_object", g.fixed_object ? nlohmann::json(*g.fixed_object) : nlohmann::json(nullptr)},
       {"principal_start", g.principal_start},
       {"assistant_start", g.assistant_start},
       {"ensure_target_present", g.ensure_target_present},
       {"solo", g.solo},
       {"render_scale", g.render_scale}};
}

inline void from_json(const nlohmann::json& j, GameSpec& g) {
  g = GameSpec{};
  j.at("width").get_to(g.width);
  j.at("height").get_to(g.height);
  j.at("cells").get_to(g.cells);
  j.at("horizon").get_to(g.horizon);
  j.at("gamma").get_to(g.gamma);
  j.at("num_objects").get_to(g.num_objects);
  j.at("observation").get_to(g.observation);
  j.at("window").get_to(g.window);
  j.at("principal_penalty").get_to(g.principal_penalty);
  j.at("assistant_sees_target").get_to(g.assistant_sees_target);
  j.at("collision").get_to(g.collision);
  j.at("placement").get_to(g.placement);
  if (!j.at("fixed_object").is_null()) g.fixed_object = j.at("fixed_object").get<Cell>();
  j.at("principal_start").get_to(g.principal_start);
  j.at("assistant_start").get_to(g.assistant_start);
  j.at("ensure_target_present").get_to(g.ensure_target_present);
  j.at("solo").get_to(g.solo);
  j.at("render_scale").get_to(g.render_scale);
}

inline void to_json(nlohmann::json& j, const Object& o) { j = {{"cell", o.cell}, {"class", o.cls}}; }
inline void from_json(const nlohmann::json& j, Object& o) {
  j.at("cell").get_to(o.cell);
  j.at("class").get_to(o.cls);
}

inline void to_json(nlohmann::json& j, const TaskSpec& t) {
  j = {{"spec", t.spec},
       {"objects", t.objects},
       {"target", t.target},
       {"assistant_observes_target", t.assistant_observes_target}};
}
inline void from_json(const nlohmann::json& j, TaskSpec& t) {
  j.at("spec").get_to(t.spec);
  j.at("objects").get_to(t.objects);
  j.at("target").get_to(t.target);
  j.at("assistant_observes_target").get_to(t.assistant_observes_target);
}

inline void to_json(nlohmann::json& j, const Collection& c) {
  j = {{"cell", c.cell}, {"class", c.cls}, {"by", c.by}};
}
inline void from_json(const nlohmann::json& j, Collection& c) {
  j.at("cell").get_to(c.cell);
  j.at("class").get_to(c.cls);
  j.at("by").get_to(c.by);
}

}  // namespace lila::env
