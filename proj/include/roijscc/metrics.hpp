#pragma once

// ROI-weighted training loss and region-wise PSNR.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "roijscc/geometry.hpp"
#include "roijscc/nn/tensor.hpp"

namespace roijscc {

struct LossWeights {
  double alpha = 1.0;  // ROI term
  double beta = 0.5;   // ROP term

  void validate() const {
    if (!(beta > 0 && beta < alpha && alpha <= 1.0)) {
      throw ConfigError("loss weights need 0 < beta < alpha <= 1");
    }
  }
};

// Pixels of every patch carrying one label, one H/n_h x W/n_w x 3 block each.
template <class T>
struct RegionPixels {
  std::vector<nn::Tensor<T>> blocks;

  std::size_t values() const {
    std::size_t n = 0;
    for (const auto& b : blocks) n += static_cast<std::size_t>(b.m.size());
    return n;
  }
};

template <class T>
RegionPixels<T> extract_region(const nn::Tensor<T>& x, const RegionMap& map, Region label) {
  const BlockShape b = block_shape(map.grid(), x.h, x.w);
  RegionPixels<T> out;
  for (int pr = 0; pr < map.n_h(); ++pr) {
    for (int pc = 0; pc < map.n_w(); ++pc) {
      if (map.at(pr, pc) != label) continue;
      nn::Tensor<T> block(b.bh, b.bw, x.channels());
      for (int y = 0; y < b.bh; ++y) {
        for (int xx = 0; xx < b.bw; ++xx) {
          block.m.row(static_cast<Eigen::Index>(y) * b.bw + xx) =
              x.m.row(static_cast<Eigen::Index>(pr * b.bh + y) * x.w + pc * b.bw + xx);
        }
      }
      out.blocks.push_back(std::move(block));
    }
  }
  return out;
}

template <class T>
double mse(const nn::Tensor<T>& a, const nn::Tensor<T>& b) {
  if (a.h != b.h || a.w != b.w || a.channels() != b.channels()) throw DomainError("mse: shape mismatch");
  return (a.m.template cast<double>() - b.m.template cast<double>()).squaredNorm() / static_cast<double>(a.m.size());
}

// Mean squared error over one region's own pixels; 0 for an empty region.
template <class T>
double region_mse(const nn::Tensor<T>& x, const nn::Tensor<T>& xhat, const RegionMap& map, Region label) {
  const RegionPixels<T> a = extract_region(x, map, label);
  const RegionPixels<T> b = extract_region(xhat, map, label);
  if (a.blocks.empty()) return 0.0;
  double se = 0;
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    se += (a.blocks[i].m.template cast<double>() - b.blocks[i].m.template cast<double>()).squaredNorm();
  }
  return se / static_cast<double>(a.values());
}

// Per-entry weight w such that loss = sum w * (xhat - x)^2.
inline std::vector<double> loss_weight_map(const RegionMap& map, int h, int w, int channels, const LossWeights& lw,
                                           bool roi_terms = true) {
  const std::vector<Region> labels = feature_labels(map, h, w);
  const double per_patch = static_cast<double>(h) * w * channels / map.grid().cells();
  const double n_all = static_cast<double>(h) * w * channels;
  const double n_roi = per_patch * map.count(Region::Roi);
  const double n_rop = per_patch * map.count(Region::Rop);
  std::vector<double> weights(static_cast<std::size_t>(h * w));
  for (std::size_t p = 0; p < labels.size(); ++p) {
    double v = 1.0 / n_all;
    if (roi_terms && labels[p] == Region::Roi) v += lw.alpha / n_roi;
    if (roi_terms && labels[p] == Region::Rop && n_rop > 0) v += lw.beta / n_rop;
    weights[p] = v;
  }
  return weights;
}

// MSE(x, xhat) + alpha MSE_ROI + beta MSE_ROP.
template <class T>
double roi_loss(const nn::Tensor<T>& x, const nn::Tensor<T>& xhat, const RegionMap& map, const LossWeights& lw) {
  return mse(x, xhat) + lw.alpha * region_mse(x, xhat, map, Region::Roi) +
         lw.beta * region_mse(x, xhat, map, Region::Rop);
}

// Loss value and its gradient with respect to xhat; roi_terms=false gives plain MSE.
template <class T>
double weighted_loss_and_grad(const nn::Tensor<T>& x, const nn::Tensor<T>& xhat, const RegionMap& map,
                              const LossWeights& lw, bool roi_terms, nn::Tensor<T>& grad) {
  if (x.h != xhat.h || x.w != xhat.w || x.channels() != xhat.channels()) throw DomainError("loss: shape mismatch");
  const std::vector<double> w = loss_weight_map(map, x.h, x.w, x.channels(), lw, roi_terms);
  grad = nn::Tensor<T>(x.h, x.w, x.channels());
  double loss = 0;
  for (int p = 0; p < x.positions(); ++p) {
    const double wp = w[static_cast<std::size_t>(p)];
    for (int c = 0; c < x.channels(); ++c) {
      const double d = static_cast<double>(xhat.m(p, c)) - static_cast<double>(x.m(p, c));
      loss += wp * d * d;
      grad.m(p, c) = static_cast<T>(2.0 * wp * d);
    }
  }
  return loss;
}

inline constexpr double kPeak = 255.0;

// MSE measured on the 0..255 scale.
inline double psnr_from_mse255(double mse255) {
  if (mse255 <= 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(kPeak * kPeak / mse255);
}

template <class T>
nn::Tensor<T> clamp_unit(const nn::Tensor<T>& x) {
  return nn::Tensor<T>(x.h, x.w, x.m.cwiseMax(T(0)).cwiseMin(T(1)).eval());
}

// Images in [0,1]; xhat is clamped, both are scaled by 255 before the MSE.
template <class T>
double psnr(const nn::Tensor<T>& x, const nn::Tensor<T>& xhat) {
  return psnr_from_mse255(mse(x, clamp_unit(xhat)) * kPeak * kPeak);
}

struct RegionPsnr {
  double roi = 0;
  double avg = 0;
};

template <class T>
RegionPsnr region_psnr(const nn::Tensor<T>& x, const nn::Tensor<T>& xhat, const RegionMap& map) {
  const nn::Tensor<T> c = clamp_unit(xhat);
  return {psnr_from_mse255(region_mse(x, c, map, Region::Roi) * kPeak * kPeak),
          psnr_from_mse255(mse(x, c) * kPeak * kPeak)};
}

struct RegionReport {
  std::string image_id;
  RoiPosition gamma{};
  double snr_db = 0;
  double cpp = 0;
  double psnr_roi = 0;
  double psnr_avg = 0;
};

inline std::string format_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline void write_report_header(std::ostream& os) {
  os << "image_id,h_gamma,w_gamma,snr_db,cpp,psnr_roi,psnr_avg\n";
}

inline void write_report_row(std::ostream& os, const RegionReport& r) {
  os << r.image_id << ',' << r.gamma.h << ',' << r.gamma.w << ',' << format_number(r.snr_db) << ','
     << format_number(r.cpp) << ',' << format_number(r.psnr_roi) << ',' << format_number(r.psnr_avg) << '\n';
}

}  // namespace roijscc
