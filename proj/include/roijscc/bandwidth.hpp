#pragma once

// ROI-adaptive bandwidth allocation, packing of the complex feature matrix
// into the channel vector, and the receiver's zero-padded reconstruction.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "roijscc/geometry.hpp"
#include "roijscc/nn/tensor.hpp"

namespace roijscc {

// B complex feature vectors of width C_m, row-major.
template <class T>
struct FeatureMatrix {
  int rows = 0;
  int width = 0;
  std::vector<std::complex<T>> values;

  FeatureMatrix() = default;
  FeatureMatrix(int b, int c) : rows(b), width(c), values(static_cast<std::size_t>(b) * c) {}

  std::complex<T>& at(int i, int j) { return values[static_cast<std::size_t>(i) * width + j]; }
  const std::complex<T>& at(int i, int j) const { return values[static_cast<std::size_t>(i) * width + j]; }

  // Real B x 2C layout with (re, im) interleaved.
  static FeatureMatrix from_real(const nn::Mat<T>& m) {
    if (m.cols() % 2 != 0) throw DomainError("real feature width must be even");
    FeatureMatrix out(static_cast<int>(m.rows()), static_cast<int>(m.cols() / 2));
    for (int i = 0; i < out.rows; ++i) {
      for (int j = 0; j < out.width; ++j) out.at(i, j) = {m(i, 2 * j), m(i, 2 * j + 1)};
    }
    return out;
  }
  nn::Mat<T> to_real() const {
    nn::Mat<T> m(rows, 2 * width);
    for (int i = 0; i < rows; ++i) {
      for (int j = 0; j < width; ++j) {
        m(i, 2 * j) = at(i, j).real();
        m(i, 2 * j + 1) = at(i, j).imag();
      }
    }
    return m;
  }
};

struct Allocation {
  int k = 0;          // complex channel uses available
  int c_avg = 0;
  int c_roi = 0;
  int c_rop = 0;
  int c_roni = 0;
  int symbol_width = 0;  // C_m
  double tau = 0.0;
  double eta = 0.0;
  std::vector<int> per_feature_dims;

  int total() const {
    int s = 0;
    for (int d : per_feature_dims) s += d;
    return s;
  }
  bool operator==(const Allocation&) const = default;
};

inline int average_dims(int k, int features, int symbol_width) {
  if (features <= 0) throw ConfigError("feature count must be positive");
  if (k <= 0 || k % features != 0) {
    throw ConfigError("channel budget k=" + std::to_string(k) + " is not a positive multiple of B=" +
                      std::to_string(features));
  }
  const int c_avg = k / features;
  if (c_avg < 1) throw ConfigError("average dimension per feature below 1");
  if (c_avg > symbol_width) {
    throw ConfigError("average dimension " + std::to_string(c_avg) + " exceeds symbol width " +
                      std::to_string(symbol_width));
  }
  return c_avg;
}

// eta for a single ROI patch; negative on grids smaller than 3x3.
inline double amplification_ratio(const GridSpec& grid, int n_roi = 1) {
  return static_cast<double>(grid.cells() - 9 * n_roi) / n_roi;
}

namespace detail {
// Products such as 0.9 * 10 land a hair below the integer in binary.
inline int floor_dims(double v) { return static_cast<int>(std::floor(v + 1e-9)); }
}  // namespace detail

inline Allocation allocate(int k, int features, const std::vector<Region>& labels, double tau, int symbol_width,
                           const GridSpec& grid) {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must lie in (0, 1)");
  if (static_cast<int>(labels.size()) != features) throw DomainError("label count differs from B");
  Allocation a;
  a.k = k;
  a.symbol_width = symbol_width;
  a.tau = tau;
  a.c_avg = average_dims(k, features, symbol_width);
  a.eta = amplification_ratio(grid);
  a.c_rop = a.c_avg;
  a.c_roi = std::clamp(detail::floor_dims((1.0 + a.eta * tau) * a.c_avg), a.c_avg, symbol_width);
  a.c_roni = std::max(1, detail::floor_dims((1.0 - tau) * a.c_avg));
  a.per_feature_dims.reserve(labels.size());
  for (Region r : labels) {
    a.per_feature_dims.push_back(r == Region::Roi ? a.c_roi : r == Region::Rop ? a.c_rop : a.c_roni);
  }
  ROIJSCC_ASSERT(a.total() <= k, "allocation exceeds channel budget");
  return a;
}

// Every feature keeps C_Avg dimensions.
inline Allocation uniform_allocation(int k, int features, int symbol_width) {
  Allocation a;
  a.k = k;
  a.symbol_width = symbol_width;
  a.c_avg = average_dims(k, features, symbol_width);
  a.c_roi = a.c_rop = a.c_roni = a.c_avg;
  a.per_feature_dims.assign(static_cast<std::size_t>(features), a.c_avg);
  return a;
}

// Everything both ends need to rebuild the symbol layout from gamma alone.
struct BandwidthConfig {
  GridSpec grid{};
  int k = 0;
  double tau = 0.1;
  int symbol_width = 16;
  int feat_h = 0;  // coarsest feature resolution
  int feat_w = 0;
  bool roi_adaptive = true;
};

inline Allocation layout_for(const RoiPosition& gamma, const BandwidthConfig& cfg) {
  const int features = cfg.feat_h * cfg.feat_w;
  if (!cfg.roi_adaptive) return uniform_allocation(cfg.k, features, cfg.symbol_width);
  const RegionMap map = classify_regions(gamma, cfg.grid);
  return allocate(cfg.k, features, feature_labels(map, cfg.feat_h, cfg.feat_w), cfg.tau, cfg.symbol_width,
                  cfg.grid);
}

// Keeps the first per_feature_dims[i] components of each feature vector.
template <class T>
std::vector<std::complex<T>> pack(const FeatureMatrix<T>& z, const Allocation& alloc) {
  if (static_cast<int>(alloc.per_feature_dims.size()) != z.rows || alloc.symbol_width != z.width) {
    throw DomainError("allocation does not match feature matrix");
  }
  std::vector<std::complex<T>> out;
  out.reserve(static_cast<std::size_t>(alloc.total()));
  for (int i = 0; i < z.rows; ++i) {
    const int d = alloc.per_feature_dims[static_cast<std::size_t>(i)];
    ROIJSCC_ASSERT(d >= 0 && d <= z.width, "kept dims exceed symbol width");
    for (int j = 0; j < d; ++j) out.push_back(z.at(i, j));
  }
  return out;
}

template <class T>
FeatureMatrix<T> unpack_zero_pad(const std::vector<std::complex<T>>& received, const Allocation& alloc) {
  if (static_cast<int>(received.size()) != alloc.total()) {
    throw ProtocolError("received " + std::to_string(received.size()) + " symbols, layout expects " +
                        std::to_string(alloc.total()) + " (ROI position desynchronized?)");
  }
  FeatureMatrix<T> out(static_cast<int>(alloc.per_feature_dims.size()), alloc.symbol_width);
  std::size_t pos = 0;
  for (int i = 0; i < out.rows; ++i) {
    const int d = alloc.per_feature_dims[static_cast<std::size_t>(i)];
    for (int j = 0; j < d; ++j) out.at(i, j) = received[pos++];
  }
  return out;
}

template <class T>
FeatureMatrix<T> unpack_zero_pad(const std::vector<std::complex<T>>& received, const RoiPosition& gamma,
                                 const BandwidthConfig& cfg) {
  return unpack_zero_pad(received, layout_for(gamma, cfg));
}

// Debug dump of one transmission: header then little-endian float32 pairs.
struct SymbolTrace {
  RoiPosition gamma{};
  GridSpec grid{};
  int k = 0;
  double tau = 0.0;
  int symbol_width = 0;
  std::vector<int> layout;
  std::vector<std::complex<float>> payload;
};

namespace detail {
inline constexpr char kTraceMagic[4] = {'R', 'J', 'S', 'T'};
inline constexpr std::uint32_t kTraceVersion = 1;

template <class U>
void put_le(std::ostream& os, U v) {
  unsigned char b[sizeof(U)];
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof(U));
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <class U>
U get_le(std::istream& is) {
  unsigned char b[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(U))) throw IoError("truncated symbol trace");
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  U v;
  std::memcpy(&v, &bits, sizeof(U));
  return v;
}
}  // namespace detail

inline void write_symbol_trace(const std::string& path, const SymbolTrace& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open " + path);
  os.write(detail::kTraceMagic, 4);
  detail::put_le<std::uint32_t>(os, detail::kTraceVersion);
  for (std::int32_t v : {t.gamma.h, t.gamma.w, t.grid.n_h, t.grid.n_w, t.k}) detail::put_le<std::int32_t>(os, v);
  detail::put_le<double>(os, t.tau);
  detail::put_le<std::int32_t>(os, t.symbol_width);
  detail::put_le<std::int32_t>(os, static_cast<std::int32_t>(t.layout.size()));
  for (int d : t.layout) detail::put_le<std::int32_t>(os, d);
  detail::put_le<std::uint64_t>(os, t.payload.size());
  for (const auto& s : t.payload) {
    detail::put_le<float>(os, s.real());
    detail::put_le<float>(os, s.imag());
  }
  if (!os) throw IoError("write failed: " + path);
}

inline SymbolTrace read_symbol_trace(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || !std::equal(magic, magic + 4, detail::kTraceMagic)) throw IoError("not a symbol trace");
  if (detail::get_le<std::uint32_t>(is) != detail::kTraceVersion) throw IoError("unsupported trace version");
  SymbolTrace t;
  t.gamma.h = detail::get_le<std::int32_t>(is);
  t.gamma.w = detail::get_le<std::int32_t>(is);
  t.grid.n_h = detail::get_le<std::int32_t>(is);
  t.grid.n_w = detail::get_le<std::int32_t>(is);
  t.k = detail::get_le<std::int32_t>(is);
  t.tau = detail::get_le<double>(is);
  t.symbol_width = detail::get_le<std::int32_t>(is);
  const auto nlayout = detail::get_le<std::int32_t>(is);
  if (nlayout < 0) throw IoError("corrupt trace layout");
  t.layout.resize(static_cast<std::size_t>(nlayout));
  for (auto& d : t.layout) d = detail::get_le<std::int32_t>(is);
  const auto n = detail::get_le<std::uint64_t>(is);
  t.payload.resize(n);
  for (auto& s : t.payload) {
    const float re = detail::get_le<float>(is);
    const float im = detail::get_le<float>(is);
    s = {re, im};
  }
  return t;
}

}  // namespace roijscc
