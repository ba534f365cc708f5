#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lila::env {

enum class Action : int { stay = 0, left = 1, right = 2, up = 3, down = 4 };
inline constexpr int kNumActions = 5;
inline constexpr int kNumAgents = 2;
inline constexpr int kPrincipal = 0;
inline constexpr int kAssistant = 1;

inline const char* action_name(Action a) {
  static constexpr const char* names[] = {"stay", "left", "right", "up", "down"};
  return names[static_cast<int>(a)];
}

inline Action action_from_name(const std::string& name) {
  for (int i = 0; i < kNumActions; ++i)
    if (name == action_name(static_cast<Action>(i))) return static_cast<Action>(i);
  throw std::invalid_argument("unknown action '" + name + "'");
}

inline Action action_from_index(int i) {
  if (i < 0 || i >= kNumActions) throw std::out_of_range("action index " + std::to_string(i));
  return static_cast<Action>(i);
}

/// Grid coordinate; y grows downwards (row index), x is the column.
struct Cell {
  int x = 0;
  int y = 0;
  auto operator<=>(const Cell&) const = default;
};

inline Cell moved(Cell c, Action a) {
  switch (a) {
    case Action::left: return {c.x - 1, c.y};
    case Action::right: return {c.x + 1, c.y};
    case Action::up: return {c.x, c.y - 1};
    case Action::down: return {c.x, c.y + 1};
    case Action::stay: break;
  }
  return c;
}

inline int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

enum class ObservationMode { bits, pixels };
enum class Window { full, one_cell, camera };
enum class TargetVisibility { never, always, coin_flip };
enum class Collision { co_occupancy, exclusive };
enum class Placement { anywhere, exterior };

/// Static description of a cooperative two-agent grid game.
struct GameSpec {
  int width = 5;
  int height = 5;
  std::vector<Cell> cells;  // explicit world cells; empty means the full rectangle
  int horizon = 10;
  double gamma = 0.9;
  int num_objects = 10;
  ObservationMode observation = ObservationMode::bits;
  Window window = Window::full;
  double principal_penalty = 0.0;
  TargetVisibility assistant_sees_target = TargetVisibility::never;
  Collision collision = Collision::co_occupancy;
  Placement placement = Placement::anywhere;
  std::optional<Cell> fixed_object;
  Cell principal_start{2, 2};
  Cell assistant_start{2, 2};
  bool ensure_target_present = true;
  bool solo = false;  // principal acts alone; the assistant is absent from the world
  int render_scale = 1;  // pixel games: the camera image is box-averaged by this factor (1, 2 or 4)

  bool contains(Cell c) const {
    if (c.x < 0 || c.y < 0 || c.x >= width || c.y >= height) return false;
    return cells.empty() || std::find(cells.begin(), cells.end(), c) != cells.end();
  }

  std::vector<Cell> world_cells() const {
    if (!cells.empty()) return cells;
    std::vector<Cell> out;
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out.push_back({x, y});
    return out;
  }

  /// Cells eligible for object placement.
  std::vector<Cell> free_cells() const {
    std::vector<Cell> out;
    for (Cell c : world_cells()) {
      if (c == principal_start || (!solo && c == assistant_start)) continue;
      if (placement == Placement::exterior && !(c.x == 0 || c.y == 0 || c.x == width - 1 || c.y == height - 1))
        continue;
      out.push_back(c);
    }
    return out;
  }

  void validate() const {
    if (width < 1 || height < 1) throw std::invalid_argument("GameSpec: empty grid");
    if (horizon < 1) throw std::invalid_argument("GameSpec: horizon must be >= 1");
    if (principal_penalty > 0) throw std::invalid_argument("GameSpec: principal penalty must be <= 0");
    if (gamma < 0 || gamma > 1) throw std::invalid_argument("GameSpec: gamma must lie in [0,1]");
    if (num_objects < 0) throw std::invalid_argument("GameSpec: negative object count");
    for (Cell c : cells)
      if (c.x < 0 || c.y < 0 || c.x >= width || c.y >= height)
        throw std::invalid_argument("GameSpec: explicit cell outside bounding box");
    if (!contains(principal_start) || (!solo && !contains(assistant_start)))
      throw std::invalid_argument("GameSpec: start cell outside the world");
    if (collision == Collision::exclusive && !solo && principal_start == assistant_start)
      throw std::invalid_argument("GameSpec: exclusive collision needs distinct start cells");
    if (fixed_object) {
      if (num_objects != 1) throw std::invalid_argument("GameSpec: fixed object requires exactly one object");
      if (!contains(*fixed_object)) throw std::invalid_argument("GameSpec: fixed object outside the world");
    } else if (num_objects > static_cast<int>(free_cells().size())) {
      throw std::invalid_argument("GameSpec: " + std::to_string(num_objects) + " objects do not fit in " +
                                  std::to_string(free_cells().size()) + " free cells");
    }
  }
};

struct Object {
  Cell cell;
  int cls = 0;  // 0 or 1
  bool operator==(const Object&) const = default;
};

/// One sampled task: object layout, target class and what the assistant sees.
struct TaskSpec {
  GameSpec spec;
  std::vector<Object> objects;
  int target = 0;
  bool assistant_observes_target = false;

  Cell start(int agent) const { return agent == kPrincipal ? spec.principal_start : spec.assistant_start; }

  bool same_layout(const TaskSpec& o) const {
    return objects == o.objects && target == o.target && assistant_observes_target == o.assistant_observes_target;
  }
};

inline TaskSpec sample_task(const GameSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> coin(0, 1);
  TaskSpec task;
  task.spec = spec;
  task.target = coin(rng);

  std::vector<Cell> cells;
  if (spec.fixed_object) {
    cells.push_back(*spec.fixed_object);
  } else {
    cells = spec.free_cells();
    for (int i = 0; i < spec.num_objects; ++i) {
      std::uniform_int_distribution<int> pick(i, static_cast<int>(cells.size()) - 1);
      std::swap(cells[i], cells[pick(rng)]);
    }
    cells.resize(spec.num_objects);
  }
  for (;;) {
    task.objects.clear();
    bool has_target = false;
    for (Cell c : cells) {
      const int cls = coin(rng);
      has_target = has_target || cls == task.target;
      task.objects.push_back({c, cls});
    }
    if (has_target || !spec.ensure_target_present || cells.empty()) break;
  }
  switch (spec.assistant_sees_target) {
    case TargetVisibility::never: task.assistant_observes_target = false; break;
    case TargetVisibility::always: task.assistant_observes_target = true; break;
    case TargetVisibility::coin_flip: task.assistant_observes_target = coin(rng) == 1; break;
  }
  return task;
}

/// Mutable episode state.
struct WorldState {
  std::array<Cell, kNumAgents> pos{};
  std::vector<std::int8_t> grid;  // per cell: -1 empty, else object class
  int t = 0;
  int width = 0;

  int object_at(Cell c) const { return grid[c.y * width + c.x]; }
  void remove_object(Cell c) { grid[c.y * width + c.x] = -1; }
  int remaining() const { return static_cast<int>(std::count_if(grid.begin(), grid.end(), [](auto v) { return v >= 0; })); }
  bool operator==(const WorldState&) const = default;
};

inline WorldState initial_state(const TaskSpec& task) {
  WorldState s;
  s.width = task.spec.width;
  s.grid.assign(task.spec.width * task.spec.height, -1);
  for (const auto& o : task.objects) s.grid[o.cell.y * s.width + o.cell.x] = static_cast<std::int8_t>(o.cls);
  s.pos = {task.spec.principal_start, task.spec.assistant_start};
  s.t = 0;
  return s;
}

enum class Collector { principal, assistant, both };

struct Collection {
  Cell cell;
  int cls = 0;
  Collector by = Collector::principal;
  bool operator==(const Collection&) const = default;
};

/// Reward bookkeeping for one step, without observations.
struct Transition {
  double reward = 0.0;
  std::array<double, kNumAgents> attributed{0.0, 0.0};
  std::vector<Collection> collected;
  bool done = false;
};

/// Applies simultaneous moves and collection rules in place.
inline Transition advance(WorldState& s, const TaskSpec& task, Action ap, Action aa) {
  const GameSpec& spec = task.spec;
  if (s.t >= spec.horizon) throw std::logic_error("env_step: episode already finished at t=" + std::to_string(s.t));
  const Cell old_p = s.pos[kPrincipal], old_a = s.pos[kAssistant];
  Cell np = moved(old_p, ap);
  if (!spec.contains(np)) np = old_p;
  Cell na = old_a;
  if (!spec.solo) {
    na = moved(old_a, aa);
    if (!spec.contains(na)) na = old_a;
    if (spec.collision == Collision::exclusive) {
      // Principal wins a contested cell; a mover blocked by the other agent stays.
      if (na == np) na = old_a;
      if (np == na) np = old_p;
    }
  }
  s.pos = {np, na};

  Transition tr;
  auto value = [&](int cls) { return cls == task.target ? 1.0 : -1.0; };
  if (int cls = s.object_at(np); cls >= 0) {
    const double v = value(cls);
    const bool shared = !spec.solo && na == np;
    tr.collected.push_back({np, cls, shared ? Collector::both : Collector::principal});
    tr.reward += v;
    tr.attributed[kPrincipal] += shared ? 0.5 * v : v;
    if (shared) tr.attributed[kAssistant] += 0.5 * v;
    s.remove_object(np);
  }
  if (!spec.solo) {
    if (int cls = s.object_at(na); cls >= 0) {
      const double v = value(cls);
      tr.collected.push_back({na, cls, Collector::assistant});
      tr.reward += v;
      tr.attributed[kAssistant] += v;
      s.remove_object(na);
    }
  }
  if (np != old_p && spec.principal_penalty != 0.0) {
    tr.reward += spec.principal_penalty;
    tr.attributed[kPrincipal] += spec.principal_penalty;
  }
  ++s.t;
  tr.done = s.t == spec.horizon;
  return tr;
}

}  // namespace lila::env
