#pragma once

// Power normalization, complex AWGN, and the SNR / CPP arithmetic.

#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "roijscc/errors.hpp"

namespace roijscc {

struct ChannelSpec {
  double snr_db = 10.0;  // +inf selects the noiseless channel
  double power = 1.0;
  std::uint64_t seed = 0;

  bool noiseless() const { return std::isinf(snr_db) && snr_db > 0; }
  double noise_variance() const { return noiseless() ? 0.0 : std::pow(10.0, -snr_db / 10.0); }
};

inline double noise_variance(double snr_db) { return ChannelSpec{snr_db}.noise_variance(); }

inline double cpp(long long k, int height, int width) {
  if (k <= 0 || height <= 0 || width <= 0) throw DomainError("cpp needs positive k and image dims");
  return static_cast<double>(k) / (3.0 * height * width);
}

// k realizing a CPP on an H x W image; throws unless it is an integer.
inline int bandwidth_for_cpp(double ratio, int height, int width) {
  const double k = ratio * 3.0 * height * width;
  const double r = std::round(k);
  if (r < 1 || std::abs(k - r) > 1e-6) throw ConfigError("CPP does not give an integral channel budget");
  return static_cast<int>(r);
}

// Scales z so that (1/k)||z||^2 = P. Keeps the scale for the backward pass.
template <class T>
class PowerNormalizer {
 public:
  std::vector<std::complex<T>> forward(const std::vector<std::complex<T>>& z, double power = 1.0) {
    if (!(power > 0)) throw DomainError("power budget must be positive");
    T sq = 0;
    for (const auto& s : z) sq += std::norm(s);
    norm_ = std::sqrt(sq);
    target_ = std::sqrt(static_cast<T>(z.size()) * static_cast<T>(power));
    if (z.empty() || norm_ == T(0)) {
      passthrough_ = true;
      return z;
    }
    passthrough_ = false;
    const T scale = target_ / norm_;
    out_.resize(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out_[i] = z[i] * scale;
    return out_;
  }

  // d/dz of c z/||z||: (c/||z||) (g - u <u, g>), u = z/||z|| in R^{2k}.
  std::vector<std::complex<T>> backward(const std::vector<std::complex<T>>& grad) const {
    if (passthrough_) return grad;
    T dot = 0;
    for (std::size_t i = 0; i < grad.size(); ++i) {
      dot += out_[i].real() * grad[i].real() + out_[i].imag() * grad[i].imag();
    }
    const T inv = T(1) / norm_;
    const T c = target_ * inv;
    // out = target * u, so u <u, g> = out <out, g> / target^2.
    const T k = dot / (target_ * target_);
    std::vector<std::complex<T>> dz(grad.size());
    for (std::size_t i = 0; i < grad.size(); ++i) dz[i] = c * (grad[i] - out_[i] * k);
    return dz;
  }

 private:
  T norm_ = 0;
  T target_ = 0;
  bool passthrough_ = true;
  std::vector<std::complex<T>> out_;
};

template <class T>
std::vector<std::complex<T>> power_normalize(const std::vector<std::complex<T>>& z, double power = 1.0) {
  PowerNormalizer<T> n;
  return n.forward(z, power);
}

// Adds CN(0, sigma^2) noise, sigma^2/2 per real component.
template <class T, class Rng>
std::vector<std::complex<T>> awgn(const std::vector<std::complex<T>>& z, double snr_db, Rng& rng) {
  const ChannelSpec spec{snr_db};
  if (spec.noiseless()) return z;
  const double sd = std::sqrt(spec.noise_variance() / 2.0);
  std::normal_distribution<double> dist(0.0, sd);
  std::vector<std::complex<T>> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double re = dist(rng);
    const double im = dist(rng);
    out[i] = z[i] + std::complex<T>(static_cast<T>(re), static_cast<T>(im));
  }
  return out;
}

template <class T>
std::vector<std::complex<T>> awgn(const std::vector<std::complex<T>>& z, const ChannelSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  return awgn(z, spec.snr_db, rng);
}

}  // namespace roijscc
