#pragma once

// Hand-written observation fixtures shared by the unit and acceptance suites.

#include <array>
#include <string>
#include <vector>

#include "lila/env/observe.hpp"
#include "lila/env/presets.hpp"

namespace lila::testing {

struct BitCase {
  std::string name;
  env::TaskSpec task;
  env::WorldState state;
  int agent;
  env::Cell cell;
  std::array<float, 8> expected;
};

inline env::TaskSpec golden_task(env::GameSpec spec) {
  env::TaskSpec t;
  t.spec = spec;
  t.objects = {{{0, 0}, 0}, {{1, 0}, 1}, {{4, 4}, 1}};
  t.target = 1;
  t.assistant_observes_target = false;
  return t;
}

inline std::vector<BitCase> golden_bit_cases() {
  using env::kAssistant;
  using env::kPrincipal;
  std::vector<BitCase> cases;
  auto full = golden_task(env::preset_game("1a"));
  auto s = env::initial_state(full);
  s.pos = {env::Cell{2, 2}, env::Cell{3, 2}};
  cases.push_back({"principal alone in its cell", full, s, kPrincipal, {2, 2}, {1, 1, 0, 0, 0, 0, 0, 0}});
  cases.push_back({"target-class object, principal view", full, s, kPrincipal, {1, 0}, {1, 0, 0, 1, 0, 1, 0, 1}});
  cases.push_back({"wrong-class object, principal view", full, s, kPrincipal, {0, 0}, {1, 0, 0, 1, 1, 0, 1, 0}});
  cases.push_back({"target-class object, assistant view", full, s, kAssistant, {1, 0}, {1, 0, 0, 1, 0, 1, 0, 0}});
  cases.push_back({"assistant alone in its cell", full, s, kAssistant, {3, 2}, {1, 0, 1, 0, 0, 0, 0, 0}});
  cases.push_back({"empty visible cell", full, s, kPrincipal, {4, 0}, {1, 0, 0, 0, 0, 0, 0, 0}});

  auto oracle = full;
  oracle.assistant_observes_target = true;
  cases.push_back({"assistant told the target", oracle, s, kAssistant, {0, 0}, {1, 0, 0, 1, 1, 0, 1, 0}});

  auto windowed = golden_task(env::preset_game("2"));
  auto sw = env::initial_state(windowed);
  sw.pos = {env::Cell{2, 2}, env::Cell{3, 2}};
  cases.push_back({"cell beyond the 1-cell window", windowed, sw, kPrincipal, {0, 0}, {0, 0, 0, 0, 0, 0, 0, 0}});
  cases.push_back({"diagonal cell beyond the window", windowed, sw, kPrincipal, {3, 3}, {0, 0, 0, 0, 0, 0, 0, 0}});
  cases.push_back({"neighbour inside the window", windowed, sw, kPrincipal, {3, 2}, {1, 0, 1, 0, 0, 0, 0, 0}});

  auto shared = full;
  auto ss = env::initial_state(shared);
  cases.push_back({"both agents share the start cell", shared, ss, kAssistant, {2, 2}, {1, 1, 1, 0, 0, 0, 0, 0}});

  env::TaskSpec l;
  l.spec = env::preset_game("3");
  l.objects = {{{1, 1}, 0}};
  l.target = 0;
  auto sl = env::initial_state(l);
  cases.push_back({"hole in the L-shaped world", l, sl, kAssistant, {0, 1}, {0, 0, 0, 0, 0, 0, 0, 0}});
  cases.push_back({"L object seen by the assistant", l, sl, kAssistant, {1, 1}, {1, 0, 0, 1, 1, 0, 0, 0}});
  cases.push_back({"L object outside principal window", l, sl, kPrincipal, {1, 1}, {0, 0, 0, 0, 0, 0, 0, 0}});
  return cases;
}

inline std::array<float, 8> bits_at(const env::Obs& o, env::Cell c) {
  std::array<float, 8> out{};
  const int w = o.dim(1);
  for (int k = 0; k < 8; ++k) out[k] = o[(static_cast<std::size_t>(c.y) * w + c.x) * 8 + k];
  return out;
}

struct RenderCase {
  std::string name;
  env::TaskSpec task;
  env::WorldState state;
  int agent;
};

inline std::vector<RenderCase> golden_render_cases() {
  auto spec = env::preset_game("4");
  env::TaskSpec t;
  t.spec = spec;
  t.objects = {{{0, 0}, 0}, {{4, 0}, 1}, {{0, 4}, 1}, {{4, 4}, 0}, {{1, 2}, 1}};
  t.target = 0;
  std::vector<RenderCase> out;
  auto s = env::initial_state(t);
  s.pos = {env::Cell{2, 2}, env::Cell{3, 3}};
  out.push_back({"principal at centre", t, s, env::kPrincipal});
  out.push_back({"assistant off centre", t, s, env::kAssistant});
  auto corner = s;
  corner.pos = {env::Cell{0, 1}, env::Cell{4, 4}};
  corner.remove_object({4, 4});
  out.push_back({"principal near corner", t, corner, env::kPrincipal});
  return out;
}

}  // namespace lila::testing
