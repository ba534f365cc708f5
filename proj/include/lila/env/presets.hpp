#pragma once

#include <stdexcept>
#include <string>

#include "lila/env/game.hpp"

namespace lila::env {

/// Game configurations of the five experiment presets.
inline GameSpec preset_game(const std::string& name) {
  GameSpec g;  // 5x5, 10 objects, bit vectors, full view, both agents start at the centre
  if (name == "1a") return g;
  if (name == "1b") {
    g.principal_penalty = -0.4;
    return g;
  }
  if (name == "2") {
    g.window = Window::one_cell;
    g.placement = Placement::exterior;
    return g;
  }
  if (name == "3") {
    // Three-cell "L": (0,0)-(1,0) arm with (1,1) below its end.
    g.width = 2;
    g.height = 2;
    g.cells = {{0, 0}, {1, 0}, {1, 1}};
    g.num_objects = 1;
    g.fixed_object = Cell{1, 1};
    g.principal_penalty = -0.1;
    g.window = Window::one_cell;
    g.assistant_sees_target = TargetVisibility::coin_flip;
    g.principal_start = {0, 0};
    g.assistant_start = {1, 0};
    g.ensure_target_present = false;
    return g;
  }
  if (name == "4") {
    g.observation = ObservationMode::pixels;
    g.window = Window::camera;
    g.collision = Collision::exclusive;
    g.principal_start = {2, 1};
    g.assistant_start = {2, 3};
    return g;
  }
  throw std::invalid_argument("unknown preset '" + name + "' (expected 1a, 1b, 2, 3 or 4)");
}

}  // namespace lila::env
