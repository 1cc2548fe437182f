#pragma once

#include <cmath>
#include <vector>

#include "roijscc/nn/tensor.hpp"

namespace roijscc::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // 0 disables global-norm clipping
};

template <class T>
double global_grad_norm(const ParamList<T>& params) {
  double s = 0;
  for (const auto* p : params) s += p->grad.template cast<double>().squaredNorm();
  return std::sqrt(s);
}

template <class T>
class Adam {
 public:
  Adam(const ParamList<T>& params, AdamConfig cfg) : params_(params), cfg_(cfg) {
    for (const auto* p : params_) {
      m_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
      v_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
    }
  }

  // Returns the pre-clipping gradient norm.
  double step() {
    const double norm = global_grad_norm(params_);
    const double clip = (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    const T lr = static_cast<T>(cfg_.learning_rate / bc1);
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T eps = static_cast<T>(cfg_.epsilon);
    const T sbc2 = static_cast<T>(std::sqrt(bc2));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Param<T>& p = *params_[i];
      const auto g = (p.grad.array() * static_cast<T>(clip)).eval();
      m_[i].array() = b1 * m_[i].array() + (T(1) - b1) * g;
      v_[i].array() = b2 * v_[i].array() + (T(1) - b2) * g.square();
      p.value.array() -= lr * m_[i].array() / (v_[i].array().sqrt() / sbc2 + eps);
    }
    return norm;
  }

  void set_learning_rate(double lr) { cfg_.learning_rate = lr; }
  long long steps() const { return t_; }
  void set_steps(long long t) { t_ = t; }
  std::vector<Mat<T>>& first_moments() { return m_; }
  std::vector<Mat<T>>& second_moments() { return v_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  ParamList<T> params_;
  AdamConfig cfg_;
  std::vector<Mat<T>> m_;
  std::vector<Mat<T>> v_;
  long long t_ = 0;
};

}  // namespace roijscc::nn
