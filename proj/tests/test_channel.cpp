#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "gradcheck.hpp"
#include "roijscc/channel.hpp"

using namespace roijscc;
using cplx = std::complex<double>;

namespace {

double average_power(const std::vector<std::complex<float>>& z) {
  double s = 0;
  for (const auto& v : z) s += std::norm(std::complex<double>(v));
  return s / static_cast<double>(z.size());
}

}  // namespace

TEST(PowerNormalize, UnitPowerIsFixedPoint) {
  const std::vector<cplx> z{{1, 0}, {1, 0}};
  const auto out = power_normalize(z);
  EXPECT_DOUBLE_EQ(out[0].real(), 1.0);
  EXPECT_DOUBLE_EQ(out[1].real(), 1.0);
}

TEST(PowerNormalize, ClosedFormScaling) {
  const auto out = power_normalize(std::vector<cplx>{{2, 0}, {0, 0}});
  EXPECT_NEAR(out[0].real(), std::sqrt(2.0), 1e-15);
  EXPECT_EQ(out[1], cplx(0, 0));
}

TEST(PowerNormalize, ZeroVectorPassesThrough) {
  const std::vector<cplx> z(5);
  EXPECT_EQ(power_normalize(z), z);
}

TEST(PowerNormalize, RespectsPowerBudget) {
  std::mt19937_64 rng(7);
  std::normal_distribution<float> d(0.0f, 3.0f);
  std::vector<std::complex<float>> z(300);
  for (auto& v : z) v = {d(rng), d(rng)};
  EXPECT_NEAR(average_power(power_normalize(z, 2.5)), 2.5, 2.5e-6);
  EXPECT_THROW(power_normalize(z, 0.0), DomainError);
}

TEST(PowerNormalize, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> d;
  std::vector<cplx> z(12);
  std::vector<cplx> w(12);
  for (auto& v : z) v = {d(rng), d(rng)};
  for (auto& v : w) v = {d(rng), d(rng)};
  // loss = <w, normalize(z)> + 0.5 ||normalize(z)||_4^4-ish nonlinearity.
  auto loss_of = [&](const std::vector<cplx>& out) {
    double s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      s += w[i].real() * out[i].real() + w[i].imag() * out[i].imag() + 0.25 * std::pow(std::norm(out[i]), 2);
    }
    return s;
  };
  PowerNormalizer<double> n;
  const auto out = n.forward(z);
  std::vector<cplx> g(out.size());
  for (std::size_t i = 0; i < out.size(); ++i) g[i] = w[i] + out[i] * std::norm(out[i]);
  const auto dz = n.backward(g);
  std::vector<double> analytic;
  for (const auto& v : dz) {
    analytic.push_back(v.real());
    analytic.push_back(v.imag());
  }
  auto* raw = reinterpret_cast<double*>(z.data());
  const auto r = test::check_entries(raw, 2 * z.size(), analytic,
                                        [&] { return loss_of(power_normalize(z)); }, 0, 1);
  EXPECT_LT(r.max_rel_error, 1e-4);
  EXPECT_EQ(r.checked, 24);
}

TEST(Awgn, NoiseVarianceFromSnr) {
  EXPECT_DOUBLE_EQ(noise_variance(0.0), 1.0);
  EXPECT_NEAR(noise_variance(10.0), 0.1, 1e-15);
  EXPECT_EQ(noise_variance(std::numeric_limits<double>::infinity()), 0.0);
}

TEST(Awgn, InfiniteSnrIsIdentity) {
  const std::vector<std::complex<float>> z{{0.3f, -1.0f}, {2.0f, 0.5f}};
  ChannelSpec spec;
  spec.snr_db = std::numeric_limits<double>::infinity();
  EXPECT_EQ(awgn(z, spec), z);
}

TEST(Awgn, EmpiricalStatisticsAtTenDb) {
  const std::size_t n = 1000000;
  const std::vector<std::complex<double>> zero(n);
  ChannelSpec spec;
  spec.snr_db = 10.0;
  spec.seed = 2024;
  const auto y = awgn(zero, spec);
  double sr = 0, si = 0, srr = 0, sii = 0, sri = 0;
  for (const auto& v : y) {
    sr += v.real();
    si += v.imag();
    srr += v.real() * v.real();
    sii += v.imag() * v.imag();
    sri += v.real() * v.imag();
  }
  const double mr = sr / n, mi = si / n;
  const double vr = srr / n - mr * mr;
  const double vi = sii / n - mi * mi;
  const double cov = sri / n - mr * mi;
  EXPECT_NEAR((vr + vi) / 0.1, 1.0, 0.01);
  EXPECT_NEAR(vr / 0.05, 1.0, 0.01);
  EXPECT_NEAR(vi / 0.05, 1.0, 0.01);
  EXPECT_LT(std::abs(cov / std::sqrt(vr * vi)), 0.01);
}

TEST(Awgn, SeededReproducibility) {
  const std::vector<std::complex<float>> z(64, {1.0f, 0.0f});
  ChannelSpec a;
  a.snr_db = 4;
  a.seed = 9;
  ChannelSpec b = a;
  b.seed = 10;
  EXPECT_EQ(awgn(z, a), awgn(z, a));
  EXPECT_NE(awgn(z, a), awgn(z, b));
}

TEST(Cpp, Ratios) {
  EXPECT_DOUBLE_EQ(cpp(16384, 256, 256), 1.0 / 12.0);
  EXPECT_DOUBLE_EQ(cpp(3 * 64 * 48, 64, 48), 1.0);
  EXPECT_DOUBLE_EQ(cpp(1024, 64, 64), 1.0 / 12.0);
  EXPECT_EQ(bandwidth_for_cpp(1.0 / 12.0, 64, 64), 1024);
  EXPECT_EQ(bandwidth_for_cpp(1.0 / 24.0, 256, 256), 8192);
  EXPECT_THROW(bandwidth_for_cpp(1.0 / 7.0, 64, 64), ConfigError);
  EXPECT_THROW(cpp(0, 64, 64), DomainError);
}
