#pragma once

// The ROI block: importance-feature injection, split heavy/light attention,
// a joint depthwise-conv + channel-attention stage, and a gated depthwise
// feed-forward network, each wrapped in a residual connection.

#include <cmath>
#include <string>
#include <vector>

#include "roijscc/model/layout.hpp"
#include "roijscc/nn/layers.hpp"

namespace roijscc::model {

using nn::Linear;
using nn::Mat;
using nn::Param;
using nn::ParamList;
using nn::Rng;
using nn::Tensor;

// Multi-head self-attention inside fixed windows. Input rows are already
// grouped window by window (window_tokens consecutive rows per window).
template <class T>
class WindowAttention {
 public:
  WindowAttention() = default;
  WindowAttention(const std::string& name, int channels, int heads)
      : channels_(channels), heads_(heads), qkv_(name + ".qkv", channels, 3 * channels),
        proj_(name + ".proj", channels, channels) {
    if (heads < 1 || channels % heads != 0) throw DomainError("channels must be divisible by heads");
  }

  void init(Rng& rng, double out_std) {
    qkv_.init_default(rng);
    proj_.init(rng, out_std);
  }

  Mat<T> forward(const Mat<T>& x, int window_tokens) {
    tokens_ = window_tokens;
    if (x.rows() == 0) {
      out_ = Mat<T>(0, channels_);
      return Mat<T>(0, channels_);
    }
    qkv_out_ = qkv_.forward(x);
    const int d = channels_ / heads_;
    const T scale = T(1) / std::sqrt(static_cast<T>(d));
    const int nwin = static_cast<int>(x.rows()) / tokens_;
    probs_.assign(static_cast<std::size_t>(nwin * heads_), Mat<T>());
    out_ = Mat<T>(x.rows(), channels_);
    for (int win = 0; win < nwin; ++win) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(win) * tokens_;
      for (int a = 0; a < heads_; ++a) {
        const auto q = qkv_out_.block(r0, a * d, tokens_, d);
        const auto k = qkv_out_.block(r0, channels_ + a * d, tokens_, d);
        const auto v = qkv_out_.block(r0, 2 * channels_ + a * d, tokens_, d);
        Mat<T> s = (q * k.transpose()) * scale;
        for (Eigen::Index i = 0; i < s.rows(); ++i) {
          const T mx = s.row(i).maxCoeff();
          s.row(i) = (s.row(i).array() - mx).exp();
          s.row(i) /= s.row(i).sum();
        }
        out_.block(r0, a * d, tokens_, d).noalias() = s * v;
        probs_[static_cast<std::size_t>(win * heads_ + a)] = std::move(s);
      }
    }
    return proj_.forward(out_);
  }

  Mat<T> backward(const Mat<T>& dy) {
    if (dy.rows() == 0) return Mat<T>(0, channels_);
    const Mat<T> dout = proj_.backward(dy);
    const int d = channels_ / heads_;
    const T scale = T(1) / std::sqrt(static_cast<T>(d));
    const int nwin = static_cast<int>(dy.rows()) / tokens_;
    Mat<T> dqkv(dy.rows(), 3 * channels_);
    for (int win = 0; win < nwin; ++win) {
      const Eigen::Index r0 = static_cast<Eigen::Index>(win) * tokens_;
      for (int a = 0; a < heads_; ++a) {
        const Mat<T>& p = probs_[static_cast<std::size_t>(win * heads_ + a)];
        const auto q = qkv_out_.block(r0, a * d, tokens_, d);
        const auto k = qkv_out_.block(r0, channels_ + a * d, tokens_, d);
        const auto v = qkv_out_.block(r0, 2 * channels_ + a * d, tokens_, d);
        const auto dO = dout.block(r0, a * d, tokens_, d);
        Mat<T> dp = dO * v.transpose();
        dqkv.block(r0, 2 * channels_ + a * d, tokens_, d).noalias() = p.transpose() * dO;
        Mat<T> ds(tokens_, tokens_);
        for (int i = 0; i < tokens_; ++i) {
          const T dot = (dp.row(i).array() * p.row(i).array()).sum();
          ds.row(i) = p.row(i).array() * (dp.row(i).array() - dot);
        }
        ds *= scale;
        dqkv.block(r0, a * d, tokens_, d).noalias() = ds * k;
        dqkv.block(r0, channels_ + a * d, tokens_, d).noalias() = ds.transpose() * q;
      }
    }
    return qkv_.backward(dqkv);
  }

  void collect(ParamList<T>& out) {
    qkv_.collect(out);
    proj_.collect(out);
  }
  Linear<T>& output_projection() { return proj_; }

 private:
  int channels_ = 0;
  int heads_ = 1;
  int tokens_ = 1;
  Linear<T> qkv_;
  Linear<T> proj_;
  Mat<T> qkv_out_;
  Mat<T> out_;
  std::vector<Mat<T>> probs_;
};

// Lightweight spatial attention gate: channel mean/max pooled map, a k x k
// convolution restricted to the gated positions, and a sigmoid gate.
template <class T>
class SpatialGate {
 public:
  static constexpr int kDefaultKernel = 7;

  SpatialGate() = default;
  SpatialGate(const std::string& name, int channels, int kernel = kDefaultKernel)
      : channels_(channels), kernel_size_(kernel), conv_(name + ".conv", kernel * kernel, 2),
        conv_bias_(name + ".conv_bias", 1, 1), proj_(name + ".proj", channels, channels) {}

  void init(Rng& rng, double out_std) {
    nn::init_normal(conv_, rng, 1.0 / kernel_size_);
    proj_.init(rng, out_std);
  }

  // Returns one output row per entry of layout.light_positions.
  Mat<T> forward(const Tensor<T>& x, const StageLayout& layout) {
    layout_ = &layout;
    const auto& light = layout.light_positions;
    const Eigen::Index n = static_cast<Eigen::Index>(light.size());
    input_rows_ = Mat<T>(n, channels_);
    pooled_ = Mat<T>::Zero(x.positions(), 2);
    argmax_.assign(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const int p = light[static_cast<std::size_t>(i)];
      input_rows_.row(i) = x.m.row(p);
      Eigen::Index am = 0;
      const T mx = input_rows_.row(i).maxCoeff(&am);
      argmax_[static_cast<std::size_t>(i)] = static_cast<int>(am);
      pooled_(p, 0) = input_rows_.row(i).mean();
      pooled_(p, 1) = mx;
    }
    gate_.assign(static_cast<std::size_t>(n), T(0));
    const int half = kernel_size_ / 2;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int p = light[static_cast<std::size_t>(i)];
      const int py = p / layout.w;
      const int px = p % layout.w;
      T z = conv_bias_.value(0, 0);
      for (int ky = 0; ky < kernel_size_; ++ky) {
        const int sy = py + ky - half;
        if (sy < 0 || sy >= layout.h) continue;
        for (int kx = 0; kx < kernel_size_; ++kx) {
          const int sx = px + kx - half;
          if (sx < 0 || sx >= layout.w) continue;
          const int q = sy * layout.w + sx;
          z += conv_.value(ky * kernel_size_ + kx, 0) * pooled_(q, 0) +
               conv_.value(ky * kernel_size_ + kx, 1) * pooled_(q, 1);
        }
      }
      gate_[static_cast<std::size_t>(i)] = nn::sigmoid(z);
    }
    Mat<T> gated(n, channels_);
    for (Eigen::Index i = 0; i < n; ++i) gated.row(i) = input_rows_.row(i) * gate_[static_cast<std::size_t>(i)];
    if (n == 0) return Mat<T>(0, channels_);
    return proj_.forward(gated);
  }

  // Accumulates into dx (full-resolution gradient of the gate's input).
  void backward(const Mat<T>& dy, Tensor<T>& dx) {
    const StageLayout& layout = *layout_;
    const auto& light = layout.light_positions;
    const Eigen::Index n = static_cast<Eigen::Index>(light.size());
    if (n == 0) return;
    const Mat<T> dgated = proj_.backward(dy);
    Mat<T> dpooled = Mat<T>::Zero(layout.positions(), 2);
    const int half = kernel_size_ / 2;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int p = light[static_cast<std::size_t>(i)];
      const T g = gate_[static_cast<std::size_t>(i)];
      dx.m.row(p) += dgated.row(i) * g;
      const T dg = (dgated.row(i).array() * input_rows_.row(i).array()).sum();
      const T dz = dg * g * (T(1) - g);
      conv_bias_.grad(0, 0) += dz;
      const int py = p / layout.w;
      const int px = p % layout.w;
      for (int ky = 0; ky < kernel_size_; ++ky) {
        const int sy = py + ky - half;
        if (sy < 0 || sy >= layout.h) continue;
        for (int kx = 0; kx < kernel_size_; ++kx) {
          const int sx = px + kx - half;
          if (sx < 0 || sx >= layout.w) continue;
          const int q = sy * layout.w + sx;
          const int k = ky * kernel_size_ + kx;
          conv_.grad(k, 0) += dz * pooled_(q, 0);
          conv_.grad(k, 1) += dz * pooled_(q, 1);
          dpooled(q, 0) += dz * conv_.value(k, 0);
          dpooled(q, 1) += dz * conv_.value(k, 1);
        }
      }
    }
    // Pooled values outside the gated set are constant zeros.
    for (Eigen::Index i = 0; i < n; ++i) {
      const int p = light[static_cast<std::size_t>(i)];
      dx.m.row(p).array() += dpooled(p, 0) / static_cast<T>(channels_);
      dx.m(p, argmax_[static_cast<std::size_t>(i)]) += dpooled(p, 1);
    }
  }

  void collect(ParamList<T>& out) {
    out.push_back(&conv_);
    out.push_back(&conv_bias_);
    proj_.collect(out);
  }
  Linear<T>& output_projection() { return proj_; }
  int kernel_size() const { return kernel_size_; }

 private:
  int channels_ = 0;
  int kernel_size_ = kDefaultKernel;
  Param<T> conv_;
  Param<T> conv_bias_;
  Linear<T> proj_;
  const StageLayout* layout_ = nullptr;
  Mat<T> input_rows_;
  Mat<T> pooled_;
  std::vector<int> argmax_;
  std::vector<T> gate_;
};

// Depthwise 3x3 convolution followed by squeeze-excite channel attention,
// applied jointly to every position.
template <class T>
class ConvChannelAttention {
 public:
  ConvChannelAttention() = default;
  ConvChannelAttention(const std::string& name, int channels, int reduction = 4)
      : norm_(name + ".norm", channels), dw_(name + ".dw", channels),
        squeeze_(name + ".squeeze", channels, std::max(1, channels / reduction)),
        excite_(name + ".excite", std::max(1, channels / reduction), channels),
        proj_(name + ".proj", channels, channels) {}

  void init(Rng& rng, double out_std) {
    dw_.init(rng);
    squeeze_.init_default(rng);
    excite_.init_default(rng);
    proj_.init(rng, out_std);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    const Tensor<T> u = norm_.forward(x);
    conv_ = dw_.forward(u);
    Mat<T> mean = conv_.m.colwise().mean();
    hidden_pre_ = squeeze_.forward(mean);
    const Mat<T> hidden = hidden_pre_.cwiseMax(T(0));
    const Mat<T> logits = excite_.forward(hidden);
    gate_ = logits.unaryExpr([](T v) { return nn::sigmoid(v); });
    Mat<T> gated = conv_.m.array().rowwise() * gate_.row(0).array();
    return Tensor<T>(x.h, x.w, proj_.forward(gated));
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Mat<T> dgated = proj_.backward(dy.m);
    Mat<T> dconv = dgated.array().rowwise() * gate_.row(0).array();
    const Mat<T> dgate = (dgated.array() * conv_.m.array()).colwise().sum().matrix();
    const Mat<T> dlogits = dgate.array() * gate_.array() * (T(1) - gate_.array());
    Mat<T> dhidden = excite_.backward(dlogits);
    dhidden = dhidden.array() * (hidden_pre_.array() > T(0)).template cast<T>();
    const Mat<T> dmean = squeeze_.backward(dhidden);
    dconv.rowwise() += dmean.row(0) / static_cast<T>(dconv.rows());
    const Tensor<T> du = dw_.backward(Tensor<T>(dy.h, dy.w, std::move(dconv)));
    return norm_.backward(du);
  }

  void collect(ParamList<T>& out) {
    norm_.collect(out);
    dw_.collect(out);
    squeeze_.collect(out);
    excite_.collect(out);
    proj_.collect(out);
  }
  Linear<T>& output_projection() { return proj_; }

 private:
  nn::LayerNorm<T> norm_;
  nn::DepthwiseConv3x3<T> dw_;
  Linear<T> squeeze_;
  Linear<T> excite_;
  Linear<T> proj_;
  Tensor<T> conv_;
  Mat<T> hidden_pre_;
  Mat<T> gate_;
};

// Gated depthwise-convolution feed-forward network: pointwise expansion,
// depthwise 3x3 over both halves, GELU(first) * second, pointwise reduction.
template <class T>
class GatedDwFeedForward {
 public:
  GatedDwFeedForward() = default;
  GatedDwFeedForward(const std::string& name, int channels, int expansion = 2)
      : hidden_(channels * expansion), norm_(name + ".norm", channels),
        expand_(name + ".expand", channels, 2 * hidden_), dw_(name + ".dw", 2 * hidden_),
        reduce_(name + ".reduce", hidden_, channels) {}

  void init(Rng& rng, double out_std) {
    expand_.init_default(rng);
    dw_.init(rng);
    reduce_.init(rng, out_std);
  }

  Tensor<T> forward(const Tensor<T>& x) {
    const Tensor<T> u = norm_.forward(x);
    conv_ = dw_.forward(expand_.forward(u));
    const auto a = conv_.m.leftCols(hidden_);
    const auto b = conv_.m.rightCols(hidden_);
    Mat<T> g = a.unaryExpr([](T v) { return nn::gelu(v); }).array() * b.array();
    return Tensor<T>(x.h, x.w, reduce_.forward(g));
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Mat<T> dg = reduce_.backward(dy.m);
    const auto a = conv_.m.leftCols(hidden_);
    const auto b = conv_.m.rightCols(hidden_);
    Tensor<T> dconv(dy.h, dy.w, 2 * hidden_);
    dconv.m.leftCols(hidden_) = dg.array() * b.array() * a.unaryExpr([](T v) { return nn::gelu_grad(v); }).array();
    dconv.m.rightCols(hidden_) = dg.array() * a.unaryExpr([](T v) { return nn::gelu(v); }).array();
    return norm_.backward(expand_.backward(dw_.backward(dconv)));
  }

  void collect(ParamList<T>& out) {
    norm_.collect(out);
    expand_.collect(out);
    dw_.collect(out);
    reduce_.collect(out);
  }
  Linear<T>& output_projection() { return reduce_; }

 private:
  int hidden_ = 0;
  nn::LayerNorm<T> norm_;
  Linear<T> expand_;
  nn::DepthwiseConv3x3<T> dw_;
  Linear<T> reduce_;
  Tensor<T> conv_;
};

struct BlockOptions {
  bool mask_injection = true;
  bool joint_tail = true;  // depthwise conv + channel attention + GDF
};

template <class T>
class RoiBlock {
 public:
  RoiBlock() = default;
  RoiBlock(const std::string& name, int channels, int heads, int gate_kernel = SpatialGate<T>::kDefaultKernel)
      : channels_(channels), mask_weight_(name + ".mask.weight", 1, channels),
        mask_bias_(name + ".mask.bias", 1, channels), norm_(name + ".norm", channels),
        attn_(name + ".attn", channels, heads), gate_(name + ".gate", channels, gate_kernel),
        tail_(name + ".tail", channels), ffn_(name + ".ffn", channels) {}

  // gamma_f projection starts at zero; residual outputs start small.
  void init(Rng& rng, double out_std = 0.02) {
    mask_weight_.value.setZero();
    mask_bias_.value.setZero();
    attn_.init(rng, out_std);
    gate_.init(rng, out_std);
    tail_.init(rng, out_std);
    ffn_.init(rng, out_std);
  }

  Tensor<T> forward(const Tensor<T>& x, const StageLayout& layout, BlockOptions opt = {}) {
    require_shape(x, layout.h, layout.w, channels_, "roi_block input");
    opt_ = opt;
    layout_ = &layout;
    Tensor<T> y = x;
    if (opt.mask_injection) y.m += importance_feature(layout);

    const Tensor<T> hn = norm_.forward(y);
    const auto& heavy = layout.heavy_order;
    Mat<T> hrows(static_cast<Eigen::Index>(heavy.size()), channels_);
    for (std::size_t i = 0; i < heavy.size(); ++i) hrows.row(static_cast<Eigen::Index>(i)) = hn.m.row(heavy[i]);
    const Mat<T> hout = attn_.forward(hrows, layout.window_tokens);
    for (std::size_t i = 0; i < heavy.size(); ++i) y.m.row(heavy[i]) += hout.row(static_cast<Eigen::Index>(i));
    const Mat<T> lout = gate_.forward(hn, layout);
    const auto& light = layout.light_positions;
    for (std::size_t i = 0; i < light.size(); ++i) y.m.row(light[i]) += lout.row(static_cast<Eigen::Index>(i));

    if (opt.joint_tail) {
      y.m += tail_.forward(y).m;
      y.m += ffn_.forward(y).m;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy_out) {
    const StageLayout& layout = *layout_;
    Tensor<T> dy = dy_out;
    if (opt_.joint_tail) {
      dy.m += ffn_.backward(dy).m;
      dy.m += tail_.backward(dy).m;
    }
    const auto& heavy = layout.heavy_order;
    Mat<T> dh(static_cast<Eigen::Index>(heavy.size()), channels_);
    for (std::size_t i = 0; i < heavy.size(); ++i) dh.row(static_cast<Eigen::Index>(i)) = dy.m.row(heavy[i]);
    const Mat<T> dhrows = attn_.backward(dh);
    Tensor<T> dhn(dy.h, dy.w, channels_);
    for (std::size_t i = 0; i < heavy.size(); ++i) dhn.m.row(heavy[i]) += dhrows.row(static_cast<Eigen::Index>(i));
    const auto& light = layout.light_positions;
    Mat<T> dl(static_cast<Eigen::Index>(light.size()), channels_);
    for (std::size_t i = 0; i < light.size(); ++i) dl.row(static_cast<Eigen::Index>(i)) = dy.m.row(light[i]);
    gate_.backward(dl, dhn);
    dy.m += norm_.backward(dhn.m);

    if (opt_.mask_injection) {
      for (int p = 0; p < layout.positions(); ++p) {
        const T mv = static_cast<T>(layout.mask[static_cast<std::size_t>(p)]);
        mask_weight_.grad.row(0) += dy.m.row(p) * mv;
      }
      mask_bias_.grad.row(0) += dy.m.colwise().sum();
    }
    return dy;
  }

  // gamma_f: pointwise affine lift of the 1-channel mask to the block width.
  Mat<T> importance_feature(const StageLayout& layout) const {
    Mat<T> f(layout.positions(), channels_);
    for (int p = 0; p < layout.positions(); ++p) {
      f.row(p) = mask_weight_.value.row(0) * static_cast<T>(layout.mask[static_cast<std::size_t>(p)]) +
                 mask_bias_.value.row(0);
    }
    return f;
  }

  // Zero every residual output projection (and gamma_f) so the block is the identity.
  void zero_output_projections() {
    for (Linear<T>* l : {&attn_.output_projection(), &gate_.output_projection(), &tail_.output_projection(),
                         &ffn_.output_projection()}) {
      l->weight().value.setZero();
      l->bias().value.setZero();
    }
    mask_weight_.value.setZero();
    mask_bias_.value.setZero();
  }

  void collect(ParamList<T>& out) {
    out.push_back(&mask_weight_);
    out.push_back(&mask_bias_);
    norm_.collect(out);
    attn_.collect(out);
    gate_.collect(out);
    tail_.collect(out);
    ffn_.collect(out);
  }

  Param<T>& mask_weight() { return mask_weight_; }
  Param<T>& mask_bias() { return mask_bias_; }
  WindowAttention<T>& attention() { return attn_; }
  SpatialGate<T>& gate() { return gate_; }
  int channels() const { return channels_; }

 private:
  int channels_ = 0;
  Param<T> mask_weight_;
  Param<T> mask_bias_;
  nn::LayerNorm<T> norm_;
  WindowAttention<T> attn_;
  SpatialGate<T> gate_;
  ConvChannelAttention<T> tail_;
  GatedDwFeedForward<T> ffn_;
  BlockOptions opt_{};
  const StageLayout* layout_ = nullptr;
};

}  // namespace roijscc::model
