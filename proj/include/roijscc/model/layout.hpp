#pragma once

#include <algorithm>
#include <vector>

#include "roijscc/geometry.hpp"

namespace roijscc::model {

// Per-stage view of the ROI geometry at one feature resolution: the
// importance mask, the self-attention windows covering heavy patches, and
// the positions handled by the spatial gate.
struct StageLayout {
  int h = 0;
  int w = 0;
  std::vector<double> mask;       // gamma_m, row-major
  std::vector<int> heavy_order;   // heavy positions, grouped window by window
  int window_tokens = 0;
  std::vector<int> light_positions;
  std::vector<unsigned char> is_light;

  int positions() const { return h * w; }
  int windows() const { return window_tokens == 0 ? 0 : static_cast<int>(heavy_order.size()) / window_tokens; }
};

inline StageLayout make_stage_layout(const RegionMap& map, const AttentionRouting& routing, int h, int w,
                                     int window) {
  if (window < 1) throw DomainError("window must be >= 1");
  const BlockShape b = block_shape(map.grid(), h, w);
  const int wh = std::min(window, b.bh);
  const int ww = std::min(window, b.bw);
  if (b.bh % wh != 0 || b.bw % ww != 0) {
    throw DomainError("attention window " + std::to_string(window) + " does not tile patch block " +
                      std::to_string(b.bh) + "x" + std::to_string(b.bw));
  }

  StageLayout out;
  out.h = h;
  out.w = w;
  out.window_tokens = wh * ww;
  const ImportanceMask m = make_importance_mask(map, h, w);
  out.mask = m.values();
  out.is_light.assign(static_cast<std::size_t>(h * w), 0);

  const GridSpec& g = map.grid();
  for (int pr = 0; pr < g.n_h; ++pr) {
    for (int pc = 0; pc < g.n_w; ++pc) {
      if (!routing.is_heavy(pr, pc)) continue;
      for (int wy = 0; wy < b.bh; wy += wh) {
        for (int wx = 0; wx < b.bw; wx += ww) {
          for (int dy = 0; dy < wh; ++dy) {
            for (int dx = 0; dx < ww; ++dx) {
              out.heavy_order.push_back((pr * b.bh + wy + dy) * w + pc * b.bw + wx + dx);
            }
          }
        }
      }
    }
  }
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!routing.is_heavy(y / b.bh, x / b.bw)) {
        out.light_positions.push_back(y * w + x);
        out.is_light[static_cast<std::size_t>(y * w + x)] = 1;
      }
    }
  }
  return out;
}

}  // namespace roijscc::model
