#pragma once

// Patch-grid geometry: region labels around a single ROI, the importance
// embedding and its nearest-neighbour upsampling, and the heavy/light
// attention routing rule.

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "roijscc/errors.hpp"

namespace roijscc {

enum class Region : unsigned char { Roi = 0, Rop = 1, Roni = 2 };

inline const char* region_name(Region r) {
  switch (r) {
    case Region::Roi: return "ROI";
    case Region::Rop: return "ROP";
    case Region::Roni: return "RONI";
  }
  return "?";
}

// Value written into the ROI embedding for each region.
inline double importance_value(Region r) {
  switch (r) {
    case Region::Roi: return 1.0;
    case Region::Rop: return 0.5;
    case Region::Roni: return 0.0;
  }
  return 0.0;
}

struct GridSpec {
  int n_h = 4;
  int n_w = 4;

  int cells() const { return n_h * n_w; }
  void validate() const {
    if (n_h < 1 || n_w < 1) throw DomainError("patch grid must be at least 1x1");
  }
  bool operator==(const GridSpec&) const = default;
};

// 1-based row/column of the ROI patch, as used in configs and on the CLI.
struct RoiPosition {
  int h = 1;
  int w = 1;

  int row() const { return h - 1; }
  int col() const { return w - 1; }
  bool operator==(const RoiPosition&) const = default;
  std::string str() const { return std::to_string(h) + "," + std::to_string(w); }
};

inline void check_in_grid(const RoiPosition& g, const GridSpec& grid) {
  grid.validate();
  if (g.h < 1 || g.h > grid.n_h || g.w < 1 || g.w > grid.n_w) {
    throw DomainError("ROI position (" + g.str() + ") outside " + std::to_string(grid.n_h) + "x" +
                      std::to_string(grid.n_w) + " grid");
  }
}

class RegionMap {
 public:
  RegionMap() = default;
  RegionMap(GridSpec grid, RoiPosition roi, std::vector<Region> labels)
      : grid_(grid), roi_(roi), labels_(std::move(labels)) {}

  const GridSpec& grid() const { return grid_; }
  const RoiPosition& roi() const { return roi_; }
  int n_h() const { return grid_.n_h; }
  int n_w() const { return grid_.n_w; }

  // 0-based patch coordinates.
  Region at(int r, int c) const { return labels_[static_cast<std::size_t>(r * grid_.n_w + c)]; }
  Region at_index(int patch) const { return labels_[static_cast<std::size_t>(patch)]; }
  const std::vector<Region>& labels() const { return labels_; }

  int count(Region r) const {
    return static_cast<int>(std::count(labels_.begin(), labels_.end(), r));
  }

  bool operator==(const RegionMap&) const = default;

 private:
  GridSpec grid_{};
  RoiPosition roi_{};
  std::vector<Region> labels_;
};

// ROI at gamma, its 8-neighbourhood is ROP, everything else RONI.
inline RegionMap classify_regions(const RoiPosition& gamma, const GridSpec& grid) {
  check_in_grid(gamma, grid);
  std::vector<Region> labels(static_cast<std::size_t>(grid.cells()), Region::Roni);
  const int r0 = gamma.row();
  const int c0 = gamma.col();
  for (int r = 0; r < grid.n_h; ++r) {
    for (int c = 0; c < grid.n_w; ++c) {
      const int dr = std::abs(r - r0);
      const int dc = std::abs(c - c0);
      Region& cell = labels[static_cast<std::size_t>(r * grid.n_w + c)];
      if (dr == 0 && dc == 0) {
        cell = Region::Roi;
      } else if (dr <= 1 && dc <= 1) {
        cell = Region::Rop;
      }
    }
  }
  return RegionMap(grid, gamma, std::move(labels));
}

// Per-patch block size at a feature resolution; throws unless it divides exactly.
struct BlockShape {
  int bh = 1;
  int bw = 1;
};

inline BlockShape block_shape(const GridSpec& grid, int feat_h, int feat_w) {
  grid.validate();
  if (feat_h < grid.n_h || feat_w < grid.n_w || feat_h % grid.n_h != 0 || feat_w % grid.n_w != 0) {
    throw DomainError("feature dims " + std::to_string(feat_h) + "x" + std::to_string(feat_w) +
                      " are not a positive multiple of grid " + std::to_string(grid.n_h) + "x" +
                      std::to_string(grid.n_w));
  }
  return {feat_h / grid.n_h, feat_w / grid.n_w};
}

// gamma_m: the ROI embedding replicated to feature resolution.
class ImportanceMask {
 public:
  ImportanceMask() = default;
  ImportanceMask(int h, int w, std::vector<double> values) : h_(h), w_(w), values_(std::move(values)) {}

  int height() const { return h_; }
  int width() const { return w_; }
  double at(int y, int x) const { return values_[static_cast<std::size_t>(y * w_ + x)]; }
  const std::vector<double>& values() const { return values_; }

 private:
  int h_ = 0;
  int w_ = 0;
  std::vector<double> values_;
};

inline ImportanceMask make_importance_mask(const RegionMap& map, int feat_h, int feat_w) {
  const BlockShape b = block_shape(map.grid(), feat_h, feat_w);
  std::vector<double> values(static_cast<std::size_t>(feat_h * feat_w));
  for (int y = 0; y < feat_h; ++y) {
    for (int x = 0; x < feat_w; ++x) {
      values[static_cast<std::size_t>(y * feat_w + x)] = importance_value(map.at(y / b.bh, x / b.bw));
    }
  }
  return ImportanceMask(feat_h, feat_w, std::move(values));
}

// Region of every feature position (row-major), inherited from its patch.
inline std::vector<Region> feature_labels(const RegionMap& map, int feat_h, int feat_w) {
  const BlockShape b = block_shape(map.grid(), feat_h, feat_w);
  std::vector<Region> out(static_cast<std::size_t>(feat_h * feat_w));
  for (int y = 0; y < feat_h; ++y) {
    for (int x = 0; x < feat_w; ++x) {
      out[static_cast<std::size_t>(y * feat_w + x)] = map.at(y / b.bh, x / b.bw);
    }
  }
  return out;
}

inline constexpr int kDefaultRoutingThreshold = 3;

// Patch-level split between the self-attention (heavy) and spatial-attention
// (light) paths.
struct AttentionRouting {
  GridSpec grid{};
  std::vector<bool> heavy_mask;  // per patch, row-major
  std::vector<int> heavy;        // patch indices
  std::vector<int> light;

  bool is_heavy(int patch) const { return heavy_mask[static_cast<std::size_t>(patch)]; }
  bool is_heavy(int r, int c) const { return is_heavy(r * grid.n_w + c); }
};

inline AttentionRouting make_routing(const GridSpec& grid, std::vector<bool> heavy_mask) {
  AttentionRouting out;
  out.grid = grid;
  out.heavy_mask = std::move(heavy_mask);
  for (int p = 0; p < grid.cells(); ++p) {
    (out.heavy_mask[static_cast<std::size_t>(p)] ? out.heavy : out.light).push_back(p);
  }
  return out;
}

// Number of 8-neighbours of (r, c) carrying the given label.
inline int neighbours_with(const RegionMap& map, int r, int c, Region label) {
  int n = 0;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc) {
      if (dr == 0 && dc == 0) continue;
      const int rr = r + dr;
      const int cc = c + dc;
      if (rr < 0 || cc < 0 || rr >= map.n_h() || cc >= map.n_w()) continue;
      if (map.at(rr, cc) == label) ++n;
    }
  }
  return n;
}

// ROI goes heavy, RONI goes light, and an ROP patch goes light once it
// touches at least `threshold` RONI patches.
inline AttentionRouting route_attention(const RegionMap& map, int threshold = kDefaultRoutingThreshold) {
  if (threshold < 1) throw DomainError("routing threshold must be >= 1");
  std::vector<bool> heavy(static_cast<std::size_t>(map.grid().cells()), false);
  for (int r = 0; r < map.n_h(); ++r) {
    for (int c = 0; c < map.n_w(); ++c) {
      const Region label = map.at(r, c);
      bool h = false;
      if (label == Region::Roi) {
        h = true;
      } else if (label == Region::Rop) {
        h = neighbours_with(map, r, c, Region::Roni) < threshold;
      }
      heavy[static_cast<std::size_t>(r * map.n_w() + c)] = h;
    }
  }
  return make_routing(map.grid(), std::move(heavy));
}

// Every patch on the self-attention path (split processing disabled).
inline AttentionRouting all_heavy_routing(const GridSpec& grid) {
  return make_routing(grid, std::vector<bool>(static_cast<std::size_t>(grid.cells()), true));
}

}  // namespace roijscc
