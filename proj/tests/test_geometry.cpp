#include <gtest/gtest.h>

#include <set>
#include <utility>

#include "roijscc/geometry.hpp"

using namespace roijscc;

namespace {

const GridSpec kGrid4{4, 4};

std::set<std::pair<int, int>> cells_with(const RegionMap& m, Region r) {
  std::set<std::pair<int, int>> out;
  for (int i = 0; i < m.n_h(); ++i) {
    for (int j = 0; j < m.n_w(); ++j) {
      if (m.at(i, j) == r) out.insert({i + 1, j + 1});
    }
  }
  return out;
}

std::set<std::pair<int, int>> rop_on_path(const RegionMap& m, const AttentionRouting& r, bool heavy) {
  std::set<std::pair<int, int>> out;
  for (int i = 0; i < m.n_h(); ++i) {
    for (int j = 0; j < m.n_w(); ++j) {
      if (m.at(i, j) == Region::Rop && r.is_heavy(i, j) == heavy) out.insert({i + 1, j + 1});
    }
  }
  return out;
}

}  // namespace

TEST(ClassifyRegions, InteriorRoiMatchesThreeByThreeBlock) {
  const RegionMap m = classify_regions({2, 2}, kGrid4);
  EXPECT_EQ(m.count(Region::Roi), 1);
  EXPECT_EQ(m.count(Region::Rop), 8);
  EXPECT_EQ(m.count(Region::Roni), 7);
  EXPECT_EQ(m.at(1, 1), Region::Roi);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i != 1 || j != 1) EXPECT_EQ(m.at(i, j), Region::Rop) << i << "," << j;
    }
  }
  for (int t = 0; t < 4; ++t) {
    EXPECT_EQ(m.at(3, t), Region::Roni);
    EXPECT_EQ(m.at(t, 3), Region::Roni);
  }
}

TEST(ClassifyRegions, CornerRoi) {
  const RegionMap m = classify_regions({1, 1}, kGrid4);
  EXPECT_EQ(cells_with(m, Region::Roi), (std::set<std::pair<int, int>>{{1, 1}}));
  EXPECT_EQ(cells_with(m, Region::Rop), (std::set<std::pair<int, int>>{{1, 2}, {2, 1}, {2, 2}}));
  EXPECT_EQ(m.count(Region::Roni), 12);
}

TEST(ClassifyRegions, SingleCellGrid) {
  const RegionMap m = classify_regions({1, 1}, {1, 1});
  EXPECT_EQ(m.count(Region::Roi), 1);
  EXPECT_EQ(m.count(Region::Rop), 0);
  EXPECT_EQ(m.count(Region::Roni), 0);
}

TEST(ClassifyRegions, OutOfGridIsDomainError) {
  EXPECT_THROW(classify_regions({0, 1}, kGrid4), DomainError);
  EXPECT_THROW(classify_regions({5, 1}, kGrid4), DomainError);
  EXPECT_THROW(classify_regions({1, 5}, kGrid4), DomainError);
  EXPECT_THROW(classify_regions({1, 1}, {0, 4}), DomainError);
}

TEST(ClassifyRegions, PartitionIdentityOnEveryPosition) {
  for (const GridSpec g : {GridSpec{4, 4}, GridSpec{3, 5}, GridSpec{6, 2}, GridSpec{1, 7}}) {
    for (int h = 1; h <= g.n_h; ++h) {
      for (int w = 1; w <= g.n_w; ++w) {
        const RegionMap m = classify_regions({h, w}, g);
        const int roi = m.count(Region::Roi);
        const int rop = m.count(Region::Rop);
        const int roni = m.count(Region::Roni);
        EXPECT_EQ(roi, 1);
        EXPECT_EQ(roi + rop + roni, g.cells());
        EXPECT_LE(rop, 8 * roi);
        EXPECT_GE(roni, g.cells() - 9 * roi);
        // Every ROP cell touches the ROI.
        for (int i = 0; i < g.n_h; ++i) {
          for (int j = 0; j < g.n_w; ++j) {
            const bool adjacent = std::abs(i - (h - 1)) <= 1 && std::abs(j - (w - 1)) <= 1;
            if (m.at(i, j) == Region::Rop) EXPECT_TRUE(adjacent);
            if (adjacent && m.at(i, j) != Region::Roi) EXPECT_EQ(m.at(i, j), Region::Rop);
          }
        }
      }
    }
  }
}

TEST(ClassifyRegions, TranslationEquivariance) {
  const GridSpec g{7, 7};
  const RegionMap a = classify_regions({3, 3}, g);
  const RegionMap b = classify_regions({4, 5}, g);
  for (int i = 0; i + 1 < g.n_h; ++i) {
    for (int j = 0; j + 2 < g.n_w; ++j) EXPECT_EQ(a.at(i, j), b.at(i + 1, j + 2));
  }
  const ImportanceMask ma = make_importance_mask(a, 14, 14);
  const ImportanceMask mb = make_importance_mask(b, 14, 14);
  for (int y = 0; y + 2 < 14; ++y) {
    for (int x = 0; x + 4 < 14; ++x) EXPECT_EQ(ma.at(y, x), mb.at(y + 2, x + 4));
  }
}

TEST(ImportanceMask, GridResolutionEqualsEmbedding) {
  const ImportanceMask m = make_importance_mask(classify_regions({2, 2}, kGrid4), 4, 4);
  const double expected[4][4] = {
      {0.5, 0.5, 0.5, 0.0}, {0.5, 1.0, 0.5, 0.0}, {0.5, 0.5, 0.5, 0.0}, {0.0, 0.0, 0.0, 0.0}};
  for (int y = 0; y < 4; ++y) {
    for (int x = 0; x < 4; ++x) EXPECT_EQ(m.at(y, x), expected[y][x]);
  }
}

TEST(ImportanceMask, BlockReplication) {
  const RegionMap map = classify_regions({2, 2}, kGrid4);
  const ImportanceMask base = make_importance_mask(map, 4, 4);
  const ImportanceMask up = make_importance_mask(map, 8, 8);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) {
      EXPECT_EQ(up.at(y, x), base.at(y / 2, x / 2));
      const double v = up.at(y, x);
      EXPECT_TRUE(v == 0.0 || v == 0.5 || v == 1.0);
    }
  }
}

TEST(ImportanceMask, SingleCellGridIsAllOnes) {
  const ImportanceMask m = make_importance_mask(classify_regions({1, 1}, {1, 1}), 4, 4);
  for (double v : m.values()) EXPECT_EQ(v, 1.0);
}

TEST(ImportanceMask, NonDivisibleDimsRejected) {
  const RegionMap map = classify_regions({2, 2}, kGrid4);
  EXPECT_THROW(make_importance_mask(map, 6, 8), DomainError);
  EXPECT_THROW(make_importance_mask(map, 2, 8), DomainError);
  EXPECT_THROW(feature_labels(map, 8, 10), DomainError);
}

TEST(RouteAttention, InteriorThresholdThree) {
  const RegionMap map = classify_regions({2, 2}, kGrid4);
  const AttentionRouting r = route_attention(map, 3);
  // RONI neighbour counts of the ROP ring: (1,3):2 (2,3):3 (3,1):2 (3,2):3 (3,3):5, the rest 0.
  EXPECT_EQ(rop_on_path(map, r, false), (std::set<std::pair<int, int>>{{2, 3}, {3, 2}, {3, 3}}));
  EXPECT_EQ(rop_on_path(map, r, true).size(), 5u);
  EXPECT_TRUE(r.is_heavy(1, 1));
}

TEST(RouteAttention, ThresholdFiveLeavesOnlyTheOuterCorner) {
  const RegionMap map = classify_regions({2, 2}, kGrid4);
  EXPECT_EQ(rop_on_path(map, route_attention(map, 5), false), (std::set<std::pair<int, int>>{{3, 3}}));
}

TEST(RouteAttention, UnreachableThresholdKeepsAllRopHeavy) {
  const RegionMap map = classify_regions({2, 2}, kGrid4);
  const AttentionRouting r = route_attention(map, 9);
  EXPECT_TRUE(rop_on_path(map, r, false).empty());
  EXPECT_EQ(r.heavy.size(), 9u);
  EXPECT_EQ(r.light.size(), 7u);
}

TEST(RouteAttention, CornerRoi) {
  const RegionMap map = classify_regions({1, 1}, kGrid4);
  const AttentionRouting r = route_attention(map, 3);
  EXPECT_EQ(rop_on_path(map, r, false), (std::set<std::pair<int, int>>{{2, 2}}));
  EXPECT_EQ(rop_on_path(map, r, true), (std::set<std::pair<int, int>>{{1, 2}, {2, 1}}));
}

TEST(RouteAttention, PartitionAndMajorityForEveryPosition) {
  for (int h = 1; h <= 4; ++h) {
    for (int w = 1; w <= 4; ++w) {
      const RegionMap map = classify_regions({h, w}, kGrid4);
      const AttentionRouting r = route_attention(map);
      EXPECT_EQ(r.heavy.size() + r.light.size(), 16u);
      for (int p = 0; p < 16; ++p) {
        if (map.at_index(p) == Region::Roi) EXPECT_TRUE(r.is_heavy(p));
        if (map.at_index(p) == Region::Roni) EXPECT_FALSE(r.is_heavy(p));
      }
      const auto heavy = rop_on_path(map, r, true).size();
      const auto light = rop_on_path(map, r, false).size();
      EXPECT_GE(heavy, light) << "gamma " << h << "," << w;
      EXPECT_FALSE(r.light.empty());
    }
  }
}

TEST(RouteAttention, ZeroThresholdRejected) {
  EXPECT_THROW(route_attention(classify_regions({2, 2}, kGrid4), 0), DomainError);
}

TEST(FeatureLabels, CountsScaleWithBlockArea) {
  const std::vector<Region> l = feature_labels(classify_regions({2, 2}, kGrid4), 8, 8);
  EXPECT_EQ(std::count(l.begin(), l.end(), Region::Roi), 4);
  EXPECT_EQ(std::count(l.begin(), l.end(), Region::Rop), 32);
  EXPECT_EQ(std::count(l.begin(), l.end(), Region::Roni), 28);
}

TEST(FeatureLabels, IdentityResolutionEqualsMap) {
  const RegionMap map = classify_regions({3, 2}, kGrid4);
  EXPECT_EQ(feature_labels(map, 4, 4), map.labels());
}

TEST(FeatureLabels, SingleCellGrid) {
  const std::vector<Region> l = feature_labels(classify_regions({1, 1}, {1, 1}), 4, 4);
  EXPECT_EQ(std::count(l.begin(), l.end(), Region::Roi), 16);
}
