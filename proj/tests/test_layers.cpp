#include <gtest/gtest.h>

#include <random>

#include "gradcheck.hpp"
#include "roijscc/model/roi_block.hpp"

using namespace roijscc;
using namespace roijscc::model;
using nn::Mat;
using nn::Tensor;

namespace {

Mat<double> random_mat(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Mat<double> m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
  return m;
}

double dot(const Mat<double>& a, const Mat<double>& b) { return (a.array() * b.array()).sum(); }

std::vector<double> flat(const Mat<double>& m) { return {m.data(), m.data() + m.size()}; }

// Checks input and parameter gradients of loss = <w, f(x)>.
template <class Forward, class Backward>
void check_layer(Mat<double>& x, nn::ParamList<double> params, Forward forward, Backward backward,
                 std::uint64_t seed, int samples = 40) {
  std::mt19937_64 rng(seed);
  const Mat<double> y0 = forward(x);
  const Mat<double> w = random_mat(y0.rows(), y0.cols(), rng);
  for (auto* p : params) p->zero_grad();
  const Mat<double> dx = backward(w);
  auto loss = [&] { return dot(forward(x), w); };

  const auto rx = test::check_entries(x.data(), static_cast<std::size_t>(x.size()), flat(dx), loss, samples, seed);
  EXPECT_LT(rx.max_rel_error, 1e-4) << "input gradient";
  for (auto* p : params) {
    const auto rp = test::check_entries(p->value.data(), static_cast<std::size_t>(p->value.size()), flat(p->grad),
                                           loss, samples, seed + 1);
    EXPECT_LT(rp.max_rel_error, 1e-4) << p->name;
  }
}

StageLayout layout_for_test(RoiPosition g, int h, int w, int window, bool split = true) {
  const RegionMap map = classify_regions(g, {4, 4});
  const AttentionRouting r = split ? route_attention(map) : all_heavy_routing(map.grid());
  return make_stage_layout(map, r, h, w, window);
}

}  // namespace

TEST(Layers, LinearGradient) {
  std::mt19937_64 rng(1);
  nn::Linear<double> lin("lin", 5, 7);
  lin.init(rng, 0.5);
  lin.bias().value = random_mat(1, 7, rng);
  Mat<double> x = random_mat(6, 5, rng);
  nn::ParamList<double> ps;
  lin.collect(ps);
  check_layer(x, ps, [&](const Mat<double>& in) { return lin.forward(in); },
              [&](const Mat<double>& g) { return lin.backward(g); }, 2);
}

TEST(Layers, LayerNormGradient) {
  std::mt19937_64 rng(3);
  nn::LayerNorm<double> ln("ln", 6);
  nn::ParamList<double> ps;
  ln.collect(ps);
  ps[0]->value = random_mat(1, 6, rng);
  ps[1]->value = random_mat(1, 6, rng);
  Mat<double> x = random_mat(5, 6, rng, 2.0);
  check_layer(x, ps, [&](const Mat<double>& in) { return ln.forward(in); },
              [&](const Mat<double>& g) { return ln.backward(g); }, 4);
}

TEST(Layers, DepthwiseConvGradient) {
  std::mt19937_64 rng(5);
  nn::DepthwiseConv3x3<double> dw("dw", 4);
  dw.init(rng);
  nn::ParamList<double> ps;
  dw.collect(ps);
  ps[1]->value = random_mat(1, 4, rng);
  Mat<double> x = random_mat(5 * 6, 4, rng);
  check_layer(x, ps, [&](const Mat<double>& in) { return dw.forward(Tensor<double>(5, 6, in)).m; },
              [&](const Mat<double>& g) { return dw.backward(Tensor<double>(5, 6, g)).m; }, 6);
}

TEST(Layers, DenseConvGradient) {
  std::mt19937_64 rng(7);
  nn::Conv3x3<double> conv("conv", 3, 4);
  conv.init(rng, 0.3);
  nn::ParamList<double> ps;
  conv.collect(ps);
  Mat<double> x = random_mat(4 * 5, 3, rng);
  check_layer(x, ps, [&](const Mat<double>& in) { return conv.forward(Tensor<double>(4, 5, in)).m; },
              [&](const Mat<double>& g) { return conv.backward(Tensor<double>(4, 5, g)).m; }, 8);
}

TEST(Layers, SpaceDepthRoundTrip) {
  std::mt19937_64 rng(9);
  const Tensor<double> x(6, 4, random_mat(24, 3, rng));
  const Tensor<double> s = nn::space_to_depth(x);
  EXPECT_EQ(s.h, 3);
  EXPECT_EQ(s.w, 2);
  EXPECT_EQ(s.channels(), 12);
  EXPECT_EQ(s.at(1, 1, 3 * 3 + 2), x.at(3, 3, 2));  // (dy, dx) = (1, 1)
  EXPECT_EQ(nn::depth_to_space(s).m, x.m);
  EXPECT_THROW(nn::space_to_depth(Tensor<double>(5, 4, 3)), DomainError);
}

TEST(Layers, WindowAttentionGradient) {
  std::mt19937_64 rng(11);
  WindowAttention<double> attn("attn", 8, 2);
  attn.init(rng, 0.3);
  nn::ParamList<double> ps;
  attn.collect(ps);
  Mat<double> x = random_mat(3 * 4, 8, rng);  // three windows of four tokens
  check_layer(x, ps, [&](const Mat<double>& in) { return attn.forward(in, 4); },
              [&](const Mat<double>& g) { return attn.backward(g); }, 12);
}

TEST(Layers, WindowAttentionIsWindowLocal) {
  std::mt19937_64 rng(13);
  WindowAttention<double> attn("attn", 8, 2);
  attn.init(rng, 0.3);
  Mat<double> x = random_mat(8, 8, rng);
  const Mat<double> a = attn.forward(x, 4);
  x.row(6) *= 3.0;
  const Mat<double> b = attn.forward(x, 4);
  EXPECT_EQ(a.topRows(4), b.topRows(4));
  EXPECT_NE(a.bottomRows(4), b.bottomRows(4));
}

TEST(Layers, SpatialGateGradient) {
  std::mt19937_64 rng(15);
  SpatialGate<double> gate("gate", 6, 3);
  gate.init(rng, 0.3);
  nn::ParamList<double> ps;
  gate.collect(ps);
  const StageLayout lay = layout_for_test({2, 2}, 8, 8, 2);
  ASSERT_FALSE(lay.light_positions.empty());
  Mat<double> x = random_mat(64, 6, rng);
  check_layer(x, ps, [&](const Mat<double>& in) { return gate.forward(Tensor<double>(8, 8, in), lay); },
              [&](const Mat<double>& g) {
                Tensor<double> dx(8, 8, 6);
                gate.backward(g, dx);
                return dx.m;
              },
              16, 60);
}

TEST(Layers, ConvChannelAttentionGradient) {
  std::mt19937_64 rng(17);
  ConvChannelAttention<double> ca("ca", 8);
  ca.init(rng, 0.3);
  nn::ParamList<double> ps;
  ca.collect(ps);
  Mat<double> x = random_mat(4 * 4, 8, rng);
  check_layer(x, ps, [&](const Mat<double>& in) { return ca.forward(Tensor<double>(4, 4, in)).m; },
              [&](const Mat<double>& g) { return ca.backward(Tensor<double>(4, 4, g)).m; }, 18);
}

TEST(Layers, GatedFeedForwardGradient) {
  std::mt19937_64 rng(19);
  GatedDwFeedForward<double> ffn("ffn", 6);
  ffn.init(rng, 0.3);
  nn::ParamList<double> ps;
  ffn.collect(ps);
  Mat<double> x = random_mat(4 * 4, 6, rng);
  check_layer(x, ps, [&](const Mat<double>& in) { return ffn.forward(Tensor<double>(4, 4, in)).m; },
              [&](const Mat<double>& g) { return ffn.backward(Tensor<double>(4, 4, g)).m; }, 20);
}

TEST(StageLayout, WindowsCoverHeavyPatchesOnly) {
  const StageLayout lay = layout_for_test({2, 2}, 32, 32, 4);
  EXPECT_EQ(lay.window_tokens, 16);
  // ROI + 5 heavy ROP patches of 8x8 features, 4 windows each.
  EXPECT_EQ(lay.heavy_order.size(), 6u * 64);
  EXPECT_EQ(lay.windows(), 24);
  EXPECT_EQ(lay.light_positions.size(), 10u * 64);
  std::vector<int> seen(32 * 32, 0);
  for (int p : lay.heavy_order) ++seen[static_cast<std::size_t>(p)];
  for (int p : lay.light_positions) ++seen[static_cast<std::size_t>(p)];
  for (int v : seen) EXPECT_EQ(v, 1);
  // Every window stays inside one patch.
  for (int w = 0; w < lay.windows(); ++w) {
    const int first = lay.heavy_order[static_cast<std::size_t>(w * 16)];
    for (int t = 0; t < 16; ++t) {
      const int p = lay.heavy_order[static_cast<std::size_t>(w * 16 + t)];
      EXPECT_EQ((p / 32) / 8, (first / 32) / 8);
      EXPECT_EQ((p % 32) / 8, (first % 32) / 8);
    }
  }
}

TEST(StageLayout, WindowShrinksToSmallPatchBlocks) {
  const StageLayout lay = layout_for_test({2, 2}, 8, 8, 4, false);
  EXPECT_EQ(lay.window_tokens, 4);
  EXPECT_EQ(lay.windows(), 16);
  EXPECT_THROW(layout_for_test({2, 2}, 24, 24, 4), DomainError);  // 6x6 blocks, window 4
}
