#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qpbs/bath_core.hpp"

using namespace qpbs;

namespace {

double direct_sum(double J, std::size_t n, double w, int d) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double k = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
    s += std::cos(k * d) / (w - dispersion(J, k));
  }
  return s / static_cast<double>(n);
}

}  // namespace

TEST(Dispersion, BandEdgesAndMidpoint) {
  const auto b = BathSpec::infinite(1.0);
  EXPECT_DOUBLE_EQ(dispersion(b, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(dispersion(b, kPi), 4.0);
  EXPECT_NEAR(dispersion(b, kPi / 2), 2.0, 1e-15);
}

TEST(Dispersion, Parity) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
  for (int i = 0; i < 50; ++i) {
    const double k = u(rng);
    EXPECT_NEAR(dispersion(1.3, k), dispersion(1.3, 2.0 * kPi - k), 1e-13);
  }
}

TEST(BathSpec, RejectsBadInput) {
  EXPECT_THROW(BathSpec::ring(0.0, 8), Error);
  EXPECT_THROW(BathSpec::ring(1.0, 3), Error);
  EXPECT_THROW(BathSpec::ring(1.0, 8, 0), Error);
}

TEST(SelfEnergy, ZeroCoupling) {
  const auto v = self_energy_diag(BathSpec::infinite(1.0), {0.0, 0.0}, -1.0);
  EXPECT_EQ(v.value, cplx(0.0));
  EXPECT_EQ(v.branch, Branch::below_band);
  EXPECT_EQ(self_energy_offdiag(BathSpec::ring(1.0, 16), {0.0, 0.0}, -1.0, 3).value, cplx(0.0));
}

TEST(SelfEnergy, ContinuumClosedForm) {
  const auto v = self_energy_diag(BathSpec::infinite(1.0), {0.0, 1.0}, -1.0);
  EXPECT_NEAR(v.value.real(), -1.0 / std::sqrt(5.0), 1e-15);
  EXPECT_EQ(v.value.imag(), 0.0);
  const auto f = self_energy_diag(BathSpec::ring(1.0, 4096), {0.0, 1.0}, -1.0);
  EXPECT_NEAR(v.value.real(), f.value.real(), 1e-6);
}

TEST(SelfEnergy, EightTermSum) {
  // -47/105 from the explicit 8-term sum
  const auto v = self_energy_diag(BathSpec::ring(1.0, 8), {0.0, 1.0}, -1.0);
  EXPECT_NEAR(v.value.real(), -0.447619047619047619, 1e-15);
}

TEST(SelfEnergy, OffDiagonalDecayingRoot) {
  const auto b = BathSpec::infinite(1.0);
  const CouplingSpec c{0.0, 1.0};
  const auto o = self_energy_offdiag(b, c, -1.0, 3);
  EXPECT_NEAR(o.value.real(), -0.0249223594996214535, 1e-15);
  const double x = detail::decaying_root(1.0, -1.0);
  EXPECT_NEAR(o.value.real(), self_energy_diag(b, c, -1.0).value.real() * x * x * x, 1e-15);
  EXPECT_NEAR(o.value.real(), self_energy_offdiag(BathSpec::ring(1.0, 4096), c, -1.0, 3).value.real(), 1e-6);
  EXPECT_EQ(self_energy_offdiag(b, c, -1.0, 0).value, self_energy_diag(b, c, -1.0).value);
}

TEST(SelfEnergy, InBandNeedsBranch) {
  const auto b = BathSpec::infinite(1.0);
  try {
    self_energy_diag(b, {0.0, 1.0}, 1.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::in_band_without_branch);
  }
  const auto v = self_energy_diag(b, {0.0, 1.0}, 1.0, Branch::in_band_retarded);
  EXPECT_LE(v.value.imag(), 0.0);
  EXPECT_EQ(v.branch, Branch::in_band_retarded);
  const auto f = self_energy_diag(BathSpec::ring(1.0, 64), {0.0, 1.0}, 1.0, Branch::in_band_retarded);
  EXPECT_LE(f.value.imag(), 0.0);
}

TEST(SelfEnergy, RetardedContinuumMatchesRegulatedIntegral) {
  // omega = 2J (theta = pi/2): g_0 = -i / (2J)
  const auto g = lattice_resolvent(BathSpec::infinite(1.0), 2.0, 0, Branch::in_band_retarded);
  EXPECT_NEAR(g.value.real(), 0.0, 1e-15);
  EXPECT_NEAR(g.value.imag(), -0.5, 1e-15);
}

TEST(SelfEnergy, AboveBand) {
  const auto b = BathSpec::infinite(1.0);
  for (int d : {0, 1, 2, 5}) {
    const auto c = lattice_resolvent(b, 5.5, d);
    EXPECT_EQ(c.branch, Branch::above_band);
    EXPECT_NEAR(c.value.real(), direct_sum(1.0, 4096, 5.5, d), 1e-9);
  }
}

// Property: Sigma_d is negative and strictly decreasing on omega < 0, and the
// pole condition w - Delta - Sigma_d(w) is strictly increasing there.
TEST(SelfEnergyProperty, MonotoneBelowBand) {
  for (auto bath : {BathSpec::infinite(1.0), BathSpec::ring(1.0, 256)}) {
    const CouplingSpec c{0.0, 0.7};
    double prev = 0.0;
    double prev_f = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double w = -20.0 + 19.999 * i / 99.0;
      const double s = self_energy_diag(bath, c, w).value.real();
      EXPECT_LT(s, 0.0);
      if (i > 0) {
        EXPECT_LT(s, prev);
        EXPECT_GT(w - s, prev_f);
      }
      prev = s;
      prev_f = w - s;
    }
  }
}

TEST(SelfEnergyProperty, OffDiagonalBoundedByDiagonal) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> uw(-15.0, -1e-3);
  std::uniform_int_distribution<int> ud(0, 30);
  const CouplingSpec c{0.0, 1.1};
  for (auto bath : {BathSpec::infinite(1.0), BathSpec::ring(1.0, 128)}) {
    for (int i = 0; i < 200; ++i) {
      const double w = uw(rng);
      const int d = ud(rng);
      EXPECT_LE(std::abs(self_energy_offdiag(bath, c, w, d).value), std::abs(self_energy_diag(bath, c, w).value) + 1e-15);
    }
  }
}

TEST(SelfEnergyProperty, ContinuumMatchesLargeRing) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uw(-6.0, -0.05);
  std::uniform_int_distribution<int> ud(0, 12);
  const CouplingSpec c{0.0, 1.0};
  for (int i = 0; i < 20; ++i) {
    const double w = uw(rng);
    const int d = ud(rng);
    const double a = self_energy_offdiag(BathSpec::infinite(1.0), c, w, d).value.real();
    const double f = self_energy_offdiag(BathSpec::ring(1.0, 4096), c, w, d).value.real();
    EXPECT_NEAR(a, f, 1e-6) << "w=" << w << " d=" << d;
  }
}

TEST(Resolvent, DerivativeMatchesFiniteDifference) {
  for (auto bath : {BathSpec::infinite(1.0), BathSpec::ring(1.0, 64)}) {
    for (double w : {-3.0, -0.4, 4.7, 9.0}) {
      for (int d : {0, 1, 3}) {
        const double h = 1e-6;
        const double fd = (lattice_resolvent(bath, w + h, d).value.real() - lattice_resolvent(bath, w - h, d).value.real()) / (2 * h);
        EXPECT_NEAR(lattice_resolvent(bath, w, d).derivative.real(), fd, 1e-7 * (1.0 + std::abs(fd)));
      }
    }
  }
}

TEST(Resolvent, RingProfileMatchesDirectSum) {
  for (std::size_t n : {6u, 10u, 33u}) {
    for (double w : {-2.5, -1e-3, 0.37, 1.9, 3.99, 4.5}) {
      const auto g = ring_resolvent_profile(1.0, n, w);
      for (std::size_t r = 0; r < n; ++r) EXPECT_NEAR(g[r], direct_sum(1.0, n, w, static_cast<int>(r)), 1e-10 * (1 + std::abs(g[r])));
    }
  }
}

TEST(Markovian, ClosedFormValues) {
  EXPECT_NEAR(markovian_vdd(1.0, -10.0, 1.0, 1), -0.01, 1e-15);
  EXPECT_NEAR(markovian_vdd(1.0, -10.0, 1.0, 0), -0.1, 1e-15);
  EXPECT_THROW(markovian_vdd(1.0, 0.0, 1.0, 1), Error);
  EXPECT_THROW(markovian_vdd(1.0, 2.0, 1.0, 1), Error);
}

TEST(Markovian, QuadratureMatchesContourForm) {
  EXPECT_NEAR(vdd_quadrature(1.0, -5.0, 0.5, 2), -7.93291187417631093e-4, 1e-12);
  EXPECT_NEAR(vdd_quadrature(1.0, -5.0, 0.5, 2), vdd_exact(1.0, -5.0, 0.5, 2), 1e-12);
}

// The closed form is the |Delta| >> J limit of the exact exchange.
TEST(Markovian, AsymptoticAgreement) {
  for (int d : {0, 1, 2}) {
    double prev_err = 1.0;
    for (double delta : {-10.0, -100.0, -1000.0}) {
      const double exact = vdd_exact(1.0, delta, 0.5, d);
      const double err = std::abs(markovian_vdd(1.0, delta, 0.5, d) / exact - 1.0);
      EXPECT_LT(err, prev_err);
      prev_err = err;
    }
    EXPECT_LT(prev_err, 0.01);
  }
}
