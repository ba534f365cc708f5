#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lila/env/game.hpp"
#include "lila/numerics/tensor.hpp"

namespace lila::env {

using Obs = num::Tensor<float>;

// Per-cell bit layout of the shape-environment observation.
enum Bit : int {
  kVisible = 0,
  kPrincipalHere = 1,
  kAssistantHere = 2,
  kObjectHere = 3,
  kClass0 = 4,
  kClass1 = 5,
  kDiscard = 6,  // object is not of the target class
  kCollect = 7,  // object is of the target class
  kBitsPerCell = 8,
};

inline bool cell_visible(const GameSpec& spec, Cell cell, Cell viewer) {
  if (!spec.contains(cell)) return false;
  if (spec.window == Window::one_cell) return manhattan(cell, viewer) <= 1;
  return true;
}

inline bool sees_target(const TaskSpec& task, int agent) {
  return agent == kPrincipal || task.assistant_observes_target;
}

/// [height, width, 8] binary encoding of the world from `agent`'s view.
inline Obs encode_bits(const WorldState& s, const TaskSpec& task, int agent) {
  const GameSpec& spec = task.spec;
  Obs out({spec.height, spec.width, kBitsPerCell});
  const Cell viewer = s.pos[agent];
  for (int y = 0; y < spec.height; ++y)
    for (int x = 0; x < spec.width; ++x) {
      const Cell c{x, y};
      if (!cell_visible(spec, c, viewer)) continue;
      float* bits = out.data() + (static_cast<std::size_t>(y) * spec.width + x) * kBitsPerCell;
      bits[kVisible] = 1;
      bits[kPrincipalHere] = s.pos[kPrincipal] == c ? 1.0f : 0.0f;
      bits[kAssistantHere] = !spec.solo && s.pos[kAssistant] == c ? 1.0f : 0.0f;
      const int cls = s.object_at(c);
      if (cls < 0) continue;
      bits[kObjectHere] = 1;
      bits[cls == 0 ? kClass0 : kClass1] = 1;
      if (sees_target(task, agent)) bits[cls == task.target ? kCollect : kDiscard] = 1;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Pixel renderer for the fruit environment.

inline constexpr int kImageSize = 64;
inline constexpr int kCellPixels = 12;

struct Rgb {
  std::uint8_t r, g, b;
};

/// Fixed palette; class 0 is drawn as a lemon and class 1 as a plum.
namespace palette {
inline constexpr Rgb background{24, 24, 24};
inline constexpr Rgb floor{200, 200, 200};
inline constexpr Rgb grid_line{150, 150, 150};
inline constexpr Rgb principal{255, 105, 180};
inline constexpr Rgb assistant{30, 144, 255};
inline constexpr Rgb lemon{255, 221, 0};
inline constexpr Rgb plum{128, 0, 128};
}  // namespace palette

inline const char* fruit_name(int cls) { return cls == 0 ? "lemons" : "plums"; }

// Sprite masks in cell-local pixel coordinates [0, kCellPixels).
inline bool agent_mask(int lx, int ly) { return lx >= 2 && lx <= 9 && ly >= 2 && ly <= 9; }
inline bool fruit_mask(int lx, int ly) {
  const int dx = 2 * lx - 11, dy = 2 * ly - 11;  // offsets from the cell centre, doubled
  return dx * dx + dy * dy <= 64;                 // radius 4 px
}

/// 64x64 RGB bytes centred on `agent`'s cell, row-major, 3 bytes per pixel.
inline std::vector<std::uint8_t> render_rgb8(const WorldState& s, const TaskSpec& task, int agent) {
  const GameSpec& spec = task.spec;
  std::vector<std::uint8_t> img(kImageSize * kImageSize * 3);
  const Cell a = s.pos[agent];
  const int origin_x = a.x * kCellPixels + kCellPixels / 2 - kImageSize / 2;
  const int origin_y = a.y * kCellPixels + kCellPixels / 2 - kImageSize / 2;
  for (int py = 0; py < kImageSize; ++py)
    for (int px = 0; px < kImageSize; ++px) {
      const int wx = origin_x + px, wy = origin_y + py;
      Rgb color = palette::background;
      if (wx >= 0 && wy >= 0) {
        const Cell c{wx / kCellPixels, wy / kCellPixels};
        const int lx = wx % kCellPixels, ly = wy % kCellPixels;
        if (spec.contains(c)) {
          color = (lx == 0 || ly == 0) ? palette::grid_line : palette::floor;
          if (int cls = s.object_at(c); cls >= 0 && fruit_mask(lx, ly)) color = cls == 0 ? palette::lemon : palette::plum;
          if (agent_mask(lx, ly)) {
            if (!spec.solo && s.pos[kAssistant] == c) color = palette::assistant;
            if (s.pos[kPrincipal] == c) color = palette::principal;
          }
        }
      }
      std::uint8_t* p = img.data() + (py * kImageSize + px) * 3;
      p[0] = color.r;
      p[1] = color.g;
      p[2] = color.b;
    }
  return img;
}

/// Side of the observed image: the camera render reduced by render_scale.
inline int view_size(const GameSpec& spec) {
  if (spec.render_scale != 1 && spec.render_scale != 2 && spec.render_scale != 4)
    throw std::invalid_argument("render_scale must be 1, 2 or 4, got " + std::to_string(spec.render_scale));
  return kImageSize / spec.render_scale;
}

/// Box average over factor x factor pixel blocks, rounded to nearest.
inline std::vector<std::uint8_t> downsample_rgb8(const std::vector<std::uint8_t>& img, int factor) {
  if (factor == 1) return img;
  const int n = kImageSize / factor, area = factor * factor;
  std::vector<std::uint8_t> out(static_cast<std::size_t>(n) * n * 3);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        int total = 0;
        for (int dy = 0; dy < factor; ++dy)
          for (int dx = 0; dx < factor; ++dx) total += img[((y * factor + dy) * kImageSize + x * factor + dx) * 3 + ch];
        out[(y * n + x) * 3 + ch] = static_cast<std::uint8_t>((total + area / 2) / area);
      }
  return out;
}

/// The image an agent observes, as RGB bytes.
inline std::vector<std::uint8_t> view_rgb8(const WorldState& s, const TaskSpec& task, int agent) {
  view_size(task.spec);
  return downsample_rgb8(render_rgb8(s, task, agent), task.spec.render_scale);
}

/// Square RGB bytes to a [side, side, 3] tensor with values in [0, 1].
inline Obs rgb8_to_obs(const std::vector<std::uint8_t>& bytes) {
  const int side = static_cast<int>(std::lround(std::sqrt(bytes.size() / 3.0)));
  if (static_cast<std::size_t>(side) * side * 3 != bytes.size())
    throw std::invalid_argument("rgb8_to_obs: " + std::to_string(bytes.size()) + " bytes is not a square RGB image");
  Obs out({side, side, 3});
  for (std::size_t i = 0; i < bytes.size(); ++i) out[i] = static_cast<float>(bytes[i]) / 255.0f;
  return out;
}

inline Obs render_pixels(const WorldState& s, const TaskSpec& task, int agent) {
  return rgb8_to_obs(view_rgb8(s, task, agent));
}

inline Obs observe(const WorldState& s, const TaskSpec& task, int agent) {
  return task.spec.observation == ObservationMode::bits ? encode_bits(s, task, agent) : render_pixels(s, task, agent);
}

inline num::Shape observation_shape(const GameSpec& spec) {
  if (spec.observation == ObservationMode::bits) return {spec.height, spec.width, kBitsPerCell};
  const int n = view_size(spec);
  return {n, n, 3};
}

/// Two-entry one-hot of the target class, given to the principal.
inline Obs task_one_hot(int target_class) {
  if (target_class < 0 || target_class > 1) throw std::out_of_range("task_one_hot: class " + std::to_string(target_class));
  Obs v({2});
  v[target_class] = 1;
  return v;
}
inline Obs task_one_hot(const TaskSpec& task) { return task_one_hot(task.target); }

struct Observations {
  std::array<Obs, kNumAgents> agent;
};

inline Observations observe_all(const WorldState& s, const TaskSpec& task) {
  Observations o;
  o.agent[kPrincipal] = observe(s, task, kPrincipal);
  if (!task.spec.solo) o.agent[kAssistant] = observe(s, task, kAssistant);
  return o;
}

struct StepOutcome {
  Transition transition;
  Observations obs;

  double reward() const { return transition.reward; }
  bool done() const { return transition.done; }
};

inline std::pair<WorldState, Observations> env_init(const TaskSpec& task) {
  task.spec.validate();
  WorldState s = initial_state(task);
  Observations o = observe_all(s, task);
  return {std::move(s), std::move(o)};
}

inline StepOutcome env_step(WorldState& s, const TaskSpec& task, Action ap, Action aa) {
  StepOutcome out;
  out.transition = advance(s, task, ap, aa);
  out.obs = observe_all(s, task);
  return out;
}

}  // namespace lila::env
