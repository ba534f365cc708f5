#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "lila/env/observe.hpp"
#include "lila/env/presets.hpp"
#include "support/golden.hpp"
#include "support/reference_render.hpp"

namespace {

using namespace lila::env;
using lila::testing::bits_at;

TEST(SampleTask, TenDistinctCellsWithATarget) {
  auto spec = preset_game("1a");
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    auto t = sample_task(spec, seed);
    ASSERT_EQ(t.objects.size(), 10u);
    std::set<Cell> cells;
    bool target = false;
    for (const auto& o : t.objects) {
      cells.insert(o.cell);
      target = target || o.cls == t.target;
      EXPECT_NE(o.cell, (Cell{2, 2}));
    }
    EXPECT_EQ(cells.size(), 10u);
    EXPECT_TRUE(target);
    EXPECT_FALSE(t.assistant_observes_target);
  }
}

TEST(SampleTask, DeterministicPerSeed) {
  auto spec = preset_game("4");
  EXPECT_TRUE(sample_task(spec, 17).same_layout(sample_task(spec, 17)));
  EXPECT_FALSE(sample_task(spec, 17).same_layout(sample_task(spec, 18)));
}

TEST(SampleTask, ExperimentThreeHasEightTasks) {
  auto spec = preset_game("3");
  std::set<std::tuple<int, int, bool>> seen;
  for (std::uint64_t seed = 0; seed < 500; ++seed) {
    auto t = sample_task(spec, seed);
    ASSERT_EQ(t.objects.size(), 1u);
    EXPECT_EQ(t.objects[0].cell, (Cell{1, 1}));
    seen.insert({t.objects[0].cls, t.target, t.assistant_observes_target});
  }
  EXPECT_EQ(seen.size(), 8u);
}

TEST(SampleTask, ExperimentTwoUsesExteriorRing) {
  auto spec = preset_game("2");
  for (std::uint64_t seed = 0; seed < 50; ++seed)
    for (const auto& o : sample_task(spec, seed).objects)
      EXPECT_TRUE(o.cell.x == 0 || o.cell.y == 0 || o.cell.x == 4 || o.cell.y == 4);
}

TEST(SampleTask, TooManyObjectsFails) {
  auto spec = preset_game("1a");
  spec.num_objects = 25;
  EXPECT_THROW(sample_task(spec, 0), std::invalid_argument);
  spec = preset_game("2");
  spec.num_objects = 17;
  EXPECT_THROW(sample_task(spec, 0), std::invalid_argument);
}

TEST(EnvInit, StartCells) {
  auto [s1, o1] = env_init(sample_task(preset_game("1a"), 3));
  EXPECT_EQ(s1.pos[kPrincipal], (Cell{2, 2}));
  EXPECT_EQ(s1.pos[kAssistant], (Cell{2, 2}));
  EXPECT_EQ(s1.t, 0);
  auto [s4, o4] = env_init(sample_task(preset_game("4"), 3));
  EXPECT_NE(s4.pos[kPrincipal], s4.pos[kAssistant]);
  EXPECT_EQ(o4.agent[kPrincipal].shape(), (lila::num::Shape{64, 64, 3}));
  auto task = sample_task(preset_game("2"), 9);
  auto a = env_init(task);
  auto b = env_init(task);
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second.agent[0], b.second.agent[0]);
  EXPECT_EQ(a.second.agent[1], b.second.agent[1]);
}

TaskSpec hand_task(GameSpec spec, std::vector<Object> objects, int target) {
  TaskSpec t;
  t.spec = std::move(spec);
  t.objects = std::move(objects);
  t.target = target;
  return t;
}

TEST(EnvStep, PrincipalCollectsTarget) {
  auto task = hand_task(preset_game("1a"), {{{1, 2}, 1}}, 1);
  auto [s, o] = env_init(task);
  auto out = env_step(s, task, Action::left, Action::stay);
  EXPECT_DOUBLE_EQ(out.reward(), 1.0);
  EXPECT_DOUBLE_EQ(out.transition.attributed[kPrincipal], 1.0);
  EXPECT_DOUBLE_EQ(out.transition.attributed[kAssistant], 0.0);
  EXPECT_EQ(s.remaining(), 0);
}

TEST(EnvStep, WrongClassCostsOne) {
  auto task = hand_task(preset_game("1a"), {{{2, 1}, 0}}, 1);
  auto [s, o] = env_init(task);
  auto out = env_step(s, task, Action::stay, Action::up);
  EXPECT_DOUBLE_EQ(out.reward(), -1.0);
  EXPECT_DOUBLE_EQ(out.transition.attributed[kAssistant], -1.0);
}

TEST(EnvStep, MotionPenaltyOnEmptyCell) {
  auto task = hand_task(preset_game("1b"), {{{0, 0}, 1}}, 1);
  auto [s, o] = env_init(task);
  auto out = env_step(s, task, Action::right, Action::stay);
  EXPECT_DOUBLE_EQ(out.reward(), -0.4);
  EXPECT_DOUBLE_EQ(out.transition.attributed[kPrincipal], -0.4);
  // Blocked moves are free.
  s.pos[kPrincipal] = {4, 2};
  out = env_step(s, task, Action::right, Action::stay);
  EXPECT_DOUBLE_EQ(out.reward(), 0.0);
  EXPECT_EQ(s.pos[kPrincipal], (Cell{4, 2}));
}

TEST(EnvStep, SimultaneousCollectionSplitsCredit) {
  auto task = hand_task(preset_game("1a"), {{{2, 3}, 1}}, 1);
  auto [s, o] = env_init(task);
  auto out = env_step(s, task, Action::down, Action::down);
  EXPECT_DOUBLE_EQ(out.reward(), 1.0);
  EXPECT_DOUBLE_EQ(out.transition.attributed[kPrincipal], 0.5);
  EXPECT_DOUBLE_EQ(out.transition.attributed[kAssistant], 0.5);
  ASSERT_EQ(out.transition.collected.size(), 1u);
  EXPECT_EQ(out.transition.collected[0].by, Collector::both);
}

TEST(EnvStep, ExclusiveModeGivesPrincipalPriority) {
  auto task = hand_task(preset_game("4"), {}, 0);  // P (2,1), A (2,3)
  auto [s, o] = env_init(task);
  env_step(s, task, Action::down, Action::up);  // both want (2,2)
  EXPECT_EQ(s.pos[kPrincipal], (Cell{2, 2}));
  EXPECT_EQ(s.pos[kAssistant], (Cell{2, 3}));
  env_step(s, task, Action::down, Action::stay);  // P walks into a standing assistant
  EXPECT_EQ(s.pos[kPrincipal], (Cell{2, 2}));
  env_step(s, task, Action::stay, Action::up);  // A walks into a standing principal
  EXPECT_EQ(s.pos[kAssistant], (Cell{2, 3}));
}

TEST(EnvStep, StepAfterDoneFails) {
  auto task = sample_task(preset_game("1a"), 1);
  auto [s, o] = env_init(task);
  for (int t = 0; t < 10; ++t) EXPECT_EQ(env_step(s, task, Action::stay, Action::stay).done(), t == 9);
  EXPECT_THROW(env_step(s, task, Action::stay, Action::stay), std::logic_error);
}

TEST(EnvStep, SoloPrincipalIgnoresAssistant) {
  auto spec = preset_game("1a");
  spec.solo = true;
  auto task = hand_task(spec, {{{2, 3}, 1}}, 1);
  auto [s, o] = env_init(task);
  auto out = env_step(s, task, Action::stay, Action::down);
  EXPECT_DOUBLE_EQ(out.reward(), 0.0);
  EXPECT_EQ(s.pos[kAssistant], (Cell{2, 2}));
  EXPECT_EQ(bits_at(out.obs.agent[kPrincipal], {2, 2})[kAssistantHere], 0.0f);
}

TEST(EncodeBits, GoldenCells) {
  for (const auto& c : lila::testing::golden_bit_cases()) {
    auto obs = encode_bits(c.state, c.task, c.agent);
    EXPECT_EQ(bits_at(obs, c.cell), c.expected) << c.name;
  }
}

// Random-episode properties over every preset.
class RandomEpisodes : public ::testing::TestWithParam<std::string> {};

TEST_P(RandomEpisodes, ConservationBoundsAndBitRules) {
  auto spec = preset_game(GetParam());
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> act(0, 4);
  for (int ep = 0; ep < 300; ++ep) {
    auto task = sample_task(spec, rng());
    auto [s, o] = env_init(task);
    double ret = 0;
    int remaining = s.remaining();
    std::set<Cell> collected;
    for (int t = 0; t < spec.horizon; ++t) {
      const Cell before = s.pos[kPrincipal];
      auto out = env_step(s, task, action_from_index(act(rng)), action_from_index(act(rng)));
      const auto& tr = out.transition;
      EXPECT_NEAR(tr.attributed[0] + tr.attributed[1], tr.reward, 1e-12);
      double expected = 0;
      for (const auto& c : tr.collected) {
        expected += c.cls == task.target ? 1.0 : -1.0;
        EXPECT_TRUE(collected.insert(c.cell).second);
      }
      EXPECT_LE(s.remaining(), remaining);
      EXPECT_EQ(remaining - s.remaining(), static_cast<int>(tr.collected.size()));
      remaining = s.remaining();
      ret += tr.reward;
      if (spec.collision == Collision::exclusive) EXPECT_NE(s.pos[0], s.pos[1]);
      if (spec.observation == ObservationMode::bits) {
        for (int agent = 0; agent < 2; ++agent) {
          const auto& ob = out.obs.agent[agent];
          for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x) {
              auto b = bits_at(ob, {x, y});
              if (b[kVisible] == 0)
                for (float v : b) EXPECT_EQ(v, 0.0f);
              if (b[kObjectHere] == 0)
                for (int k = 4; k < 8; ++k) EXPECT_EQ(b[k], 0.0f);
              const bool collect_bits = b[kCollect] + b[kDiscard] > 0;
              if (b[kObjectHere] == 1) EXPECT_EQ(collect_bits, sees_target(task, agent));
            }
        }
      }
      if (s.pos[kPrincipal] != before) expected += spec.principal_penalty;
      EXPECT_NEAR(tr.reward, expected, 1e-12);
    }
    const double n = static_cast<double>(task.objects.size());
    EXPECT_GE(ret, -n + spec.horizon * spec.principal_penalty - 1e-9);
    EXPECT_LE(ret, n + 1e-9);
  }
}

INSTANTIATE_TEST_SUITE_P(Presets, RandomEpisodes, ::testing::Values("1a", "1b", "2", "3", "4"));

TEST(EnvStep, SwappingAgentLabelsSwapsPositions) {
  auto spec = preset_game("1a");
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> act(0, 4), coord(0, 4);
  for (int trial = 0; trial < 500; ++trial) {
    auto task = sample_task(spec, rng());
    auto s = initial_state(task);
    s.pos = {Cell{coord(rng), coord(rng)}, Cell{coord(rng), coord(rng)}};
    auto swapped = s;
    std::swap(swapped.pos[0], swapped.pos[1]);
    const auto a = action_from_index(act(rng)), b = action_from_index(act(rng));
    auto r1 = advance(s, task, a, b);
    auto r2 = advance(swapped, task, b, a);
    EXPECT_EQ(s.pos[0], swapped.pos[1]);
    EXPECT_EQ(s.pos[1], swapped.pos[0]);
    EXPECT_DOUBLE_EQ(r1.reward, r2.reward);
    EXPECT_DOUBLE_EQ(r1.attributed[0], r2.attributed[1]);
  }
}

TEST(RenderPixels, MatchesReferenceRasteriser) {
  for (const auto& c : lila::testing::golden_render_cases())
    EXPECT_EQ(render_rgb8(c.state, c.task, c.agent), lila::testing::reference_render(c.state, c.task, c.agent))
        << c.name;
}

TEST(RenderPixels, CentredAgentSeesEveryObject) {
  auto spec = preset_game("4");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto task = sample_task(spec, seed);
    auto s = initial_state(task);
    s.pos[kPrincipal] = {2, 2};
    s.pos[kAssistant] = {0, 0};
    auto img = render_rgb8(s, task, kPrincipal);
    for (const auto& o : task.objects) {
      if (o.cell == s.pos[0] || o.cell == s.pos[1]) continue;
      // Fruit centre pixel of the object's cell in camera coordinates.
      const int px = (o.cell.x - 2) * kCellPixels + 32, py = (o.cell.y - 2) * kCellPixels + 32;
      ASSERT_TRUE(px >= 0 && px < 64 && py >= 0 && py < 64);
      const auto* p = &img[(py * 64 + px) * 3];
      const Rgb want = o.cls == 0 ? palette::lemon : palette::plum;
      EXPECT_EQ(p[0], want.r);
      EXPECT_EQ(p[2], want.b);
    }
  }
}

TEST(RenderPixels, EmptyWorldHasNoSprites) {
  auto spec = preset_game("4");
  spec.solo = true;
  TaskSpec task;
  task.spec = spec;
  auto s = initial_state(task);
  s.pos[kPrincipal] = {4, 4};
  auto obs = render_pixels(s, task, kPrincipal);
  auto img = render_rgb8(s, task, kPrincipal);
  for (std::size_t i = 0; i < img.size(); i += 3) {
    const int px = (i / 3) % 64, py = (i / 3) / 64;
    const bool own_sprite = px >= 28 && px <= 35 && py >= 28 && py <= 35;
    if (own_sprite) continue;
    const bool bg = img[i] == palette::background.r;
    const bool fl = img[i] == palette::floor.r || img[i] == palette::grid_line.r;
    EXPECT_TRUE(bg || fl);
  }
  // Bottom-right quadrant lies outside the world.
  EXPECT_EQ(img[(60 * 64 + 60) * 3], palette::background.r);
  for (float v : obs.values()) EXPECT_TRUE(v >= 0.0f && v <= 1.0f);
  EXPECT_EQ(render_pixels(s, task, kPrincipal), obs);
}

TEST(RenderPixels, ReducedRenderAveragesBlocks) {
  auto spec = preset_game("4");
  for (int factor : {2, 4}) {
    spec.render_scale = factor;
    auto task = sample_task(spec, 9);
    auto s = initial_state(task);
    const auto full = render_rgb8(s, task, kPrincipal);
    const auto small = view_rgb8(s, task, kPrincipal);
    const int n = 64 / factor;
    ASSERT_EQ(small.size(), static_cast<std::size_t>(n * n * 3));
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x)
        for (int ch = 0; ch < 3; ++ch) {
          double mean = 0;
          for (int dy = 0; dy < factor; ++dy)
            for (int dx = 0; dx < factor; ++dx) mean += full[((y * factor + dy) * 64 + x * factor + dx) * 3 + ch];
          mean /= factor * factor;
          EXPECT_LE(std::abs(small[(y * n + x) * 3 + ch] - mean), 0.5) << factor << " " << x << "," << y;
        }
    auto obs = render_pixels(s, task, kPrincipal);
    EXPECT_EQ(obs.shape(), (lila::num::Shape{n, n, 3}));
    EXPECT_EQ(observation_shape(spec), obs.shape());
  }
  spec.render_scale = 3;
  EXPECT_THROW(observation_shape(spec), std::invalid_argument);
}

}  // namespace
