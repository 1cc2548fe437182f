#pragma once

// Differentiable building blocks. Each layer caches what its backward pass
// needs from the most recent forward call, so a forward/backward pair must
// not be interleaved with another forward on the same instance.

#include <cmath>
#include <string>

#include "roijscc/nn/tensor.hpp"

namespace roijscc::nn {

template <class T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <class T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(M_SQRT1_2)));
}

template <class T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * T(M_SQRT1_2)));
  const T pdf = std::exp(T(-0.5) * x * x) * T(0.3989422804014327);
  return cdf + x * pdf;
}

// Pointwise affine map over channels: y = x W^T + b.
template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, int in, int out)
      : in_(in), out_(out), weight_(name + ".weight", out, in), bias_(name + ".bias", 1, out) {}

  void init(Rng& rng, double stddev) {
    init_normal(weight_, rng, stddev);
    bias_.value.setZero();
  }
  void init_default(Rng& rng) { init(rng, 1.0 / std::sqrt(static_cast<double>(in_))); }

  Mat<T> forward(const Mat<T>& x) {
    ROIJSCC_ASSERT(x.cols() == in_, "linear input width");
    input_ = x;
    Mat<T> y = x * weight_.value.transpose();
    y.rowwise() += bias_.value.row(0);
    return y;
  }
  Tensor<T> forward(const Tensor<T>& x) { return Tensor<T>(x.h, x.w, forward(x.m)); }

  Mat<T> backward(const Mat<T>& dy) {
    weight_.grad.noalias() += dy.transpose() * input_;
    bias_.grad.row(0) += dy.colwise().sum();
    return dy * weight_.value;
  }
  Tensor<T> backward(const Tensor<T>& dy) { return Tensor<T>(dy.h, dy.w, backward(dy.m)); }

  void collect(ParamList<T>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  Param<T>& weight() { return weight_; }
  Param<T>& bias() { return bias_; }
  int in_features() const { return in_; }
  int out_features() const { return out_; }

 private:
  int in_ = 0;
  int out_ = 0;
  Param<T> weight_;
  Param<T> bias_;
  Mat<T> input_;
};

// Per-position normalization over channels.
template <class T>
class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, int channels)
      : gain_(name + ".gain", 1, channels), shift_(name + ".shift", 1, channels) {
    gain_.value.setOnes();
  }

  Mat<T> forward(const Mat<T>& x) {
    const Eigen::Index n = x.rows();
    const Eigen::Index c = x.cols();
    xhat_.resize(n, c);
    rstd_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const T mu = x.row(i).mean();
      const T var = (x.row(i).array() - mu).square().mean();
      const T r = T(1) / std::sqrt(var + T(kEps));
      rstd_[static_cast<std::size_t>(i)] = r;
      xhat_.row(i) = (x.row(i).array() - mu) * r;
    }
    Mat<T> y = xhat_.array().rowwise() * gain_.value.row(0).array();
    y.rowwise() += shift_.value.row(0);
    return y;
  }
  Tensor<T> forward(const Tensor<T>& x) { return Tensor<T>(x.h, x.w, forward(x.m)); }

  Mat<T> backward(const Mat<T>& dy) {
    gain_.grad.row(0) += (dy.array() * xhat_.array()).colwise().sum().matrix();
    shift_.grad.row(0) += dy.colwise().sum();
    Mat<T> dxhat = dy.array().rowwise() * gain_.value.row(0).array();
    Mat<T> dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
      const T m1 = dxhat.row(i).mean();
      const T m2 = (dxhat.row(i).array() * xhat_.row(i).array()).mean();
      dx.row(i) = (dxhat.row(i).array() - m1 - xhat_.row(i).array() * m2) * rstd_[static_cast<std::size_t>(i)];
    }
    return dx;
  }
  Tensor<T> backward(const Tensor<T>& dy) { return Tensor<T>(dy.h, dy.w, backward(dy.m)); }

  void collect(ParamList<T>& out) {
    out.push_back(&gain_);
    out.push_back(&shift_);
  }

 private:
  static constexpr double kEps = 1e-5;
  Param<T> gain_;
  Param<T> shift_;
  Mat<T> xhat_;
  std::vector<T> rstd_;
};

// 3x3 per-channel convolution, stride 1, zero padding.
template <class T>
class DepthwiseConv3x3 {
 public:
  DepthwiseConv3x3() = default;
  DepthwiseConv3x3(const std::string& name, int channels)
      : kernel_(name + ".kernel", 9, channels), bias_(name + ".bias", 1, channels) {}

  void init(Rng& rng) {
    init_normal(kernel_, rng, 1.0 / 3.0);
    bias_.value.setZero();
  }

  Tensor<T> forward(const Tensor<T>& x) {
    input_ = x;
    const int c = x.channels();
    Tensor<T> y(x.h, x.w, c);
    for (int yy = 0; yy < x.h; ++yy) {
      for (int xx = 0; xx < x.w; ++xx) {
        auto out = y.m.row(static_cast<Eigen::Index>(yy) * x.w + xx);
        out = bias_.value.row(0);
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = yy + ky - 1;
          if (sy < 0 || sy >= x.h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= x.w) continue;
            out.array() += kernel_.value.row(ky * 3 + kx).array() *
                           x.m.row(static_cast<Eigen::Index>(sy) * x.w + sx).array();
          }
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Tensor<T>& x = input_;
    Tensor<T> dx(x.h, x.w, x.channels());
    bias_.grad.row(0) += dy.m.colwise().sum();
    for (int yy = 0; yy < x.h; ++yy) {
      for (int xx = 0; xx < x.w; ++xx) {
        const auto g = dy.m.row(static_cast<Eigen::Index>(yy) * x.w + xx);
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = yy + ky - 1;
          if (sy < 0 || sy >= x.h) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = xx + kx - 1;
            if (sx < 0 || sx >= x.w) continue;
            const Eigen::Index src = static_cast<Eigen::Index>(sy) * x.w + sx;
            kernel_.grad.row(ky * 3 + kx).array() += g.array() * x.m.row(src).array();
            dx.m.row(src).array() += g.array() * kernel_.value.row(ky * 3 + kx).array();
          }
        }
      }
    }
    return dx;
  }

  void collect(ParamList<T>& out) {
    out.push_back(&kernel_);
    out.push_back(&bias_);
  }

 private:
  Param<T> kernel_;
  Param<T> bias_;
  Tensor<T> input_;
};

// Dense 3x3 convolution (stride 1, zero padding) via im2col.
template <class T>
class Conv3x3 {
 public:
  Conv3x3() = default;
  Conv3x3(const std::string& name, int in, int out) : in_(in), proj_(name, 9 * in, out) {}

  void init(Rng& rng, double stddev) { proj_.init(rng, stddev); }
  void init_default(Rng& rng) { proj_.init_default(rng); }

  Tensor<T> forward(const Tensor<T>& x) {
    ROIJSCC_ASSERT(x.channels() == in_, "conv input width");
    h_ = x.h;
    w_ = x.w;
    Mat<T> cols = Mat<T>::Zero(static_cast<Eigen::Index>(x.h) * x.w, 9 * in_);
    for (int yy = 0; yy < x.h; ++yy) {
      for (int xx = 0; xx < x.w; ++xx) {
        auto row = cols.row(static_cast<Eigen::Index>(yy) * x.w + xx);
        for (int k = 0; k < 9; ++k) {
          const int sy = yy + k / 3 - 1;
          const int sx = xx + k % 3 - 1;
          if (sy < 0 || sy >= x.h || sx < 0 || sx >= x.w) continue;
          row.segment(k * in_, in_) = x.m.row(static_cast<Eigen::Index>(sy) * x.w + sx);
        }
      }
    }
    return Tensor<T>(x.h, x.w, proj_.forward(cols));
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const Mat<T> dcols = proj_.backward(dy.m);
    Tensor<T> dx(h_, w_, in_);
    for (int yy = 0; yy < h_; ++yy) {
      for (int xx = 0; xx < w_; ++xx) {
        const auto row = dcols.row(static_cast<Eigen::Index>(yy) * w_ + xx);
        for (int k = 0; k < 9; ++k) {
          const int sy = yy + k / 3 - 1;
          const int sx = xx + k % 3 - 1;
          if (sy < 0 || sy >= h_ || sx < 0 || sx >= w_) continue;
          dx.m.row(static_cast<Eigen::Index>(sy) * w_ + sx) += row.segment(k * in_, in_);
        }
      }
    }
    return dx;
  }

  void collect(ParamList<T>& out) { proj_.collect(out); }
  Linear<T>& projection() { return proj_; }

 private:
  int in_ = 0;
  int h_ = 0;
  int w_ = 0;
  Linear<T> proj_;
};

}  // namespace roijscc::nn
