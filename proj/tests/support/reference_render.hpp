#pragma once

// Painter's-algorithm rasteriser used as an independent oracle for the
// production renderer: it draws the world into a large canvas layer by layer
// and then crops the camera window, instead of classifying each output pixel.

#include <cstdint>
#include <vector>

#include "lila/env/observe.hpp"

namespace lila::testing {

inline std::vector<std::uint8_t> reference_render(const env::WorldState& s, const env::TaskSpec& task, int agent) {
  using namespace lila::env;
  const auto& spec = task.spec;
  const int cw = spec.width * kCellPixels, ch = spec.height * kCellPixels;
  std::vector<Rgb> canvas(cw * ch, palette::background);
  auto put = [&](int x, int y, Rgb c) { canvas[y * cw + x] = c; };

  for (Cell c : spec.world_cells()) {
    for (int y = 0; y < kCellPixels; ++y)
      for (int x = 0; x < kCellPixels; ++x) put(c.x * kCellPixels + x, c.y * kCellPixels + y, palette::floor);
    for (int k = 0; k < kCellPixels; ++k) {
      put(c.x * kCellPixels + k, c.y * kCellPixels, palette::grid_line);
      put(c.x * kCellPixels, c.y * kCellPixels + k, palette::grid_line);
    }
  }
  // Fruit: a radius-4 disc centred between pixels 5 and 6.
  for (Cell c : spec.world_cells()) {
    const int cls = s.object_at(c);
    if (cls < 0) continue;
    for (int y = 0; y < kCellPixels; ++y)
      for (int x = 0; x < kCellPixels; ++x) {
        const double dx = x - 5.5, dy = y - 5.5;
        if (dx * dx + dy * dy <= 16.0)
          put(c.x * kCellPixels + x, c.y * kCellPixels + y, cls == 0 ? palette::lemon : palette::plum);
      }
  }
  auto square = [&](Cell c, Rgb col) {
    for (int y = 2; y < 10; ++y)
      for (int x = 2; x < 10; ++x) put(c.x * kCellPixels + x, c.y * kCellPixels + y, col);
  };
  if (!spec.solo) square(s.pos[kAssistant], palette::assistant);
  square(s.pos[kPrincipal], palette::principal);

  std::vector<std::uint8_t> out;
  const int cx = s.pos[agent].x * kCellPixels + 6, cy = s.pos[agent].y * kCellPixels + 6;
  for (int py = 0; py < kImageSize; ++py)
    for (int px = 0; px < kImageSize; ++px) {
      const int wx = cx - 32 + px, wy = cy - 32 + py;
      Rgb c = (wx >= 0 && wy >= 0 && wx < cw && wy < ch) ? canvas[wy * cw + wx] : palette::background;
      out.push_back(c.r);
      out.push_back(c.g);
      out.push_back(c.b);
    }
  return out;
}

inline std::uint64_t fnv1a(const std::vector<std::uint8_t>& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (auto b : bytes) {
    h ^= b;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace lila::testing
