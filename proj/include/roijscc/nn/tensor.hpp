#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "roijscc/errors.hpp"

namespace roijscc::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

// Channels-last feature map: one matrix row per spatial position (row-major
// over y, x), one column per channel.
template <class T>
struct Tensor {
  int h = 0;
  int w = 0;
  Mat<T> m;

  Tensor() = default;
  Tensor(int h_, int w_, int c) : h(h_), w(w_), m(Mat<T>::Zero(static_cast<Eigen::Index>(h_) * w_, c)) {}
  Tensor(int h_, int w_, Mat<T> values) : h(h_), w(w_), m(std::move(values)) {
    ROIJSCC_ASSERT(m.rows() == static_cast<Eigen::Index>(h) * w, "tensor row count");
  }

  int channels() const { return static_cast<int>(m.cols()); }
  int positions() const { return h * w; }
  T& at(int y, int x, int c) { return m(static_cast<Eigen::Index>(y) * w + x, c); }
  T at(int y, int x, int c) const { return m(static_cast<Eigen::Index>(y) * w + x, c); }

  template <class U>
  Tensor<U> cast() const {
    return Tensor<U>(h, w, m.template cast<U>().eval());
  }
};

template <class T>
void require_shape(const Tensor<T>& t, int h, int w, int c, const char* what) {
  if (t.h != h || t.w != w || t.channels() != c) {
    throw DomainError(std::string(what) + ": expected " + std::to_string(h) + "x" + std::to_string(w) + "x" +
                      std::to_string(c) + ", got " + std::to_string(t.h) + "x" + std::to_string(t.w) + "x" +
                      std::to_string(t.channels()));
  }
}

// (h, w, c) -> (h/f, w/f, f*f*c); output channel index is (dy*f + dx)*c + ch.
template <class T>
Tensor<T> space_to_depth(const Tensor<T>& x, int f = 2) {
  if (x.h % f != 0 || x.w % f != 0) throw DomainError("space_to_depth: dims not divisible");
  const int c = x.channels();
  Tensor<T> out(x.h / f, x.w / f, f * f * c);
  for (int y = 0; y < x.h; ++y) {
    for (int xx = 0; xx < x.w; ++xx) {
      const Eigen::Index dst = static_cast<Eigen::Index>(y / f) * out.w + xx / f;
      const int off = ((y % f) * f + (xx % f)) * c;
      out.m.row(dst).segment(off, c) = x.m.row(static_cast<Eigen::Index>(y) * x.w + xx);
    }
  }
  return out;
}

template <class T>
Tensor<T> depth_to_space(const Tensor<T>& x, int f = 2) {
  if (x.channels() % (f * f) != 0) throw DomainError("depth_to_space: channels not divisible");
  const int c = x.channels() / (f * f);
  Tensor<T> out(x.h * f, x.w * f, c);
  for (int y = 0; y < out.h; ++y) {
    for (int xx = 0; xx < out.w; ++xx) {
      const Eigen::Index src = static_cast<Eigen::Index>(y / f) * x.w + xx / f;
      const int off = ((y % f) * f + (xx % f)) * c;
      out.m.row(static_cast<Eigen::Index>(y) * out.w + xx) = x.m.row(src).segment(off, c);
    }
  }
  return out;
}

// Named trainable array with its gradient accumulator.
template <class T>
struct Param {
  std::string name;
  std::vector<int> shape;
  Mat<T> value;
  Mat<T> grad;

  Param() = default;
  Param(std::string n, int rows, int cols) : name(std::move(n)), shape{rows, cols} {
    value = Mat<T>::Zero(rows, cols);
    grad = Mat<T>::Zero(rows, cols);
  }

  Eigen::Index size() const { return value.size(); }
  void zero_grad() { grad.setZero(); }
};

template <class T>
using ParamList = std::vector<Param<T>*>;

using Rng = std::mt19937_64;

template <class T>
void init_normal(Param<T>& p, Rng& rng, double stddev) {
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = static_cast<T>(dist(rng));
}

template <class T>
void init_constant(Param<T>& p, double v) {
  p.value.setConstant(static_cast<T>(v));
}

template <class T>
std::size_t parameter_count(const ParamList<T>& params) {
  std::size_t n = 0;
  for (const auto* p : params) n += static_cast<std::size_t>(p->size());
  return n;
}

}  // namespace roijscc::nn
