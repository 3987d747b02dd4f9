#include <algorithm>
#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "qpbs/ed_oracle.hpp"
#include "qpbs/single_excitation.hpp"

using namespace qpbs;

namespace {

double channel_residual(const TwoQeBoundStates& s, int sigma, double e) {
  const auto so = self_energy_offdiag(s.bath, s.coupling, e, s.d).value.real();
  const auto sd = self_energy_diag(s.bath, s.coupling, e).value.real();
  return e - s.coupling.delta - sd - sigma * so;
}

std::vector<double> ed_levels(std::size_t n, std::size_t d, const CouplingSpec& cp) {
  const auto b = ed::build_sector(ed::Geometry::pair(n, d), 1, 1);
  return ed::sector_spectrum(b, 1.0, cp, static_cast<int>(b.dim())).eigenvalues;
}

}  // namespace

TEST(TwoQe, FarApartEmittersReduceToSingleBoundState) {
  const auto s = solve_two_qe(BathSpec::infinite(1.0), {0.0, 1.0}, 80);
  ASSERT_TRUE(s.e_plus && s.e_minus);
  EXPECT_NEAR(*s.e_plus, -0.601231825852331011, 1e-10);
  EXPECT_NEAR(*s.e_minus, -0.601231825852331011, 1e-10);
}

TEST(TwoQe, AntisymmetricAbsentAboveThreshold) {
  const auto s = solve_two_qe(BathSpec::infinite(1.0), {1.0, 1.0}, 1);
  EXPECT_FALSE(s.exists_minus);
  EXPECT_FALSE(s.e_minus.has_value());
  try {
    effective_hopping_two_qe(s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::merged_into_continuum);
  }
}

TEST(TwoQe, RingLevelsMatchEd) {
  for (std::size_t d : {1u, 2u}) {
    const CouplingSpec cp{-3.0, 0.2};
    const auto s = solve_two_qe(BathSpec::ring(1.0, 10), cp, static_cast<int>(d));
    const auto ed = ed_levels(10, d, cp);
    ASSERT_TRUE(s.e_plus && s.e_minus);
    EXPECT_NEAR(*s.e_plus, ed[0], 1e-10);
    EXPECT_NEAR(*s.e_minus, ed[1], 1e-10);
    for (int sigma : {1, -1})
      for (const auto& l : s.levels(sigma)) {
        double best = 1e9;
        for (double e : ed) best = std::min(best, std::abs(e - l.energy));
        EXPECT_LT(best, 1e-10) << "level " << l.energy;
      }
  }
}

TEST(TwoQe, ChannelWeightsAreComplete) {
  const auto s = solve_two_qe(BathSpec::ring(1.0, 64), {0.4, 1.3}, 3);
  for (int sigma : {1, -1}) {
    double w = 0.0;
    for (const auto& l : s.levels(sigma)) w += l.weight;
    EXPECT_NEAR(w, 1.0, 1e-10);
  }
}

TEST(TwoQe, RootResiduals) {
  for (double delta : {-2.0, -0.5, 0.3}) {
    for (auto bath : {BathSpec::infinite(1.0), BathSpec::ring(1.0, 128)}) {
      const auto s = solve_two_qe(bath, {delta, 1.2}, 2);
      ASSERT_TRUE(s.e_plus);
      EXPECT_LT(std::abs(channel_residual(s, 1, *s.e_plus)), 1e-12);
      if (s.e_minus) EXPECT_LT(std::abs(channel_residual(s, -1, *s.e_minus)), 1e-12);
      if (s.e_minus) EXPECT_LE(*s.e_plus, *s.e_minus);
      EXPECT_GT(s.u_plus * s.u_plus, 0.0);
      EXPECT_LE(s.u_plus * s.u_plus, 1.0);
    }
  }
}

TEST(TwoQe, AntisymmetricBoundary) {
  // exists_minus flips within one grid step of Omega = sqrt(2 Delta / d)
  for (double delta : {0.5, 1.0}) {
    for (int d : {1, 2}) {
      const double step = 0.01;
      double flip = -1.0;
      for (double om = step; om < 3.0; om += step) {
        if (solve_two_qe(BathSpec::infinite(1.0), {delta, om}, d).exists_minus) {
          flip = om;
          break;
        }
      }
      EXPECT_NEAR(flip, std::sqrt(2.0 * delta / d), step + 1e-12);
    }
  }
}

TEST(TwoQe, FiniteRingConvergesToContinuum) {
  const CouplingSpec cp{-1.0, 1.0};
  const auto inf = solve_two_qe(BathSpec::infinite(1.0), cp, 1);
  double prev = 1.0;
  for (std::size_t n : {16u, 32u, 64u}) {
    const auto f = solve_two_qe(BathSpec::ring(1.0, n), cp, 1);
    const double err = std::abs(*f.e_plus - *inf.e_plus) + std::abs(*f.e_minus - *inf.e_minus);
    EXPECT_LE(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 1e-12);
}

TEST(TwoQe, StrongCouplingSaturation) {
  for (double delta : {-1.0, 0.0, 1.0}) {
    const auto h = effective_hopping_two_qe(solve_two_qe(BathSpec::infinite(1.0), {delta, 20.0}, 1));
    EXPECT_NEAR(std::abs(h.t), 0.5, 0.02);
  }
}

TEST(TwoQe, StrongCouplingMatchesEd) {
  for (double delta : {-1.0, 0.0, 1.0}) {
    const CouplingSpec cp{delta, 20.0};
    const auto ed = ed_levels(200, 1, cp);
    const auto h = effective_hopping_two_qe(solve_two_qe(BathSpec::infinite(1.0), cp, 1));
    EXPECT_NEAR(h.t, (ed[0] - ed[1]) / 2.0, 1e-10);
  }
  double prev = 1.0;
  for (double om : {20.0, 80.0, 320.0}) {
    const auto h = effective_hopping_two_qe(solve_two_qe(BathSpec::infinite(1.0), {-1.0, om}, 1));
    const double err = std::abs(std::abs(h.t) - 0.5);
    EXPECT_LT(err, prev);
    prev = err;
  }
}

TEST(TwoQe, MarkovianHopping) {
  const auto h = effective_hopping_two_qe(solve_two_qe(BathSpec::infinite(1.0), {-10.0, 0.5}, 1));
  EXPECT_NEAR(h.t / -2.5e-3, 1.0, 0.1);
  EXPECT_TRUE(is_arc_region(h));
  EXPECT_EQ(effective_hopping_two_qe([] {
              TwoQeBoundStates s;
              s.e_plus = s.e_minus = -1.0;
              s.exists_minus = true;
              return s;
            }())
                .t,
            0.0);
}

TEST(TwoQe, MarkovianEstimate) {
  const auto weak = markovian_teff_estimate(BathSpec::infinite(1.0), {-2.0, 1e-4}, 1);
  EXPECT_NEAR(weak.z1b, 1.0, 1e-6);
  EXPECT_NEAR(weak.t_eff, 0.0, 1e-8);
  for (auto [delta, om, d, tol] : {std::tuple{-10.0, 0.5, 2, 0.1}, std::tuple{-1.0, 5.0, 1, 0.15}}) {
    const auto est = markovian_teff_estimate(BathSpec::infinite(1.0), {delta, om}, d);
    const auto exact = effective_hopping_two_qe(solve_two_qe(BathSpec::infinite(1.0), {delta, om}, d));
    EXPECT_NEAR(est.t_eff / exact.t, 1.0, tol) << delta << " " << om;
    EXPECT_NEAR(est.t_arc, est.t_eff, 1e-12 * std::abs(est.t_eff));
  }
}

TEST(TwoQe, MissingSymmetricRootIsHardError) {
  EXPECT_THROW(solve_two_qe(BathSpec::infinite(1.0), {-1.0, 0.0}, 1), Error);
}

TEST(Polariton, DecoupledBands) {
  const auto s = polariton_bands(BathSpec::ring(1.0, 16, 2), {-1.0, 0.0}, 8);
  for (std::size_t m = 0; m < 8; ++m) {
    EXPECT_NEAR(s.bands[0][m], -1.0, 1e-14);
    EXPECT_NEAR(s.weights[0][m], 1.0, 1e-14);
    EXPECT_NEAR(s.bands[1][m], dispersion(1.0, s.momenta[m] / 2.0 - (s.momenta[m] > kPi ? kPi : 0.0)), 1e-12);
  }
}

// Lower-polariton weight deviates from 1/2 by at most (4J + |Delta|) / (4 Omega).
TEST(Polariton, StrongCouplingHalfWeight) {
  for (double om : {30.0, 100.0}) {
    const auto s = polariton_bands(BathSpec::ring(1.0, 64, 1), {-1.0, om}, 64);
    for (std::size_t m = 0; m < 64; ++m) EXPECT_NEAR(s.weights[0][m], 0.5, 5.0 / (4.0 * om));
  }
}

TEST(Polariton, MatchesEd) {
  const CouplingSpec cp{-3.0, 0.2};
  const auto s = polariton_bands(BathSpec::ring(1.0, 16, 2), cp, 8);
  std::vector<double> all;
  for (const auto& b : s.bands) all.insert(all.end(), b.begin(), b.end());
  std::sort(all.begin(), all.end());
  const auto b = ed::build_sector(ed::Geometry::array(8, 2), 1, 1);
  const auto r = ed::sector_spectrum(b, 1.0, cp, 100);
  ASSERT_EQ(all.size(), 24u);
  ASSERT_EQ(r.eigenvalues.size(), 24u);
  for (std::size_t i = 0; i < 24; ++i) EXPECT_NEAR(all[i], r.eigenvalues[i], 1e-10);
}

TEST(PolaritonProperty, WeightsAndParity) {
  const auto s = polariton_bands(BathSpec::ring(1.0, 96, 3), {0.7, 1.1}, 32);
  for (std::size_t m = 0; m < 32; ++m) {
    double w = 0.0;
    for (std::size_t l = 0; l < s.n_bands(); ++l) {
      w += s.weights[l][m];
      if (l > 0) EXPECT_GE(s.bands[l][m], s.bands[l - 1][m]);
      EXPECT_NEAR(s.energy(l, static_cast<long>(m)), s.energy(l, -static_cast<long>(m)), 1e-12);
    }
    EXPECT_NEAR(w, 1.0, 1e-10);
  }
}

TEST(Wannier, FlatBand) {
  const auto w = band_fourier(std::vector<double>(16, -2.5));
  EXPECT_NEAR(w.e0, -2.5, 1e-15);
  for (std::size_t l = 1; l < w.t.size(); ++l) EXPECT_NEAR(w.t[l], 0.0, 1e-15);
}

TEST(Wannier, FoldedBandSaturation) {
  const auto s = polariton_bands(BathSpec::ring(1.0, 1024, 2), {3.0, 0.01}, 512);
  const auto w = wannier_hoppings(s);
  EXPECT_NEAR(w.at(1), -0.424, 0.002);
  EXPECT_NEAR(w.at(2), 0.085, 0.002);
  EXPECT_NEAR(folded_band_hopping(1.0, 2, 1), -0.4244, 1e-4);
  EXPECT_NEAR(folded_band_hopping(1.0, 2, 2), 0.0849, 1e-4);
  EXPECT_NEAR(w.at(1), folded_band_hopping(1.0, 2, 1), 2e-3);
  EXPECT_EQ(w.at(1), w.at(-1));
}

TEST(Wannier, AmbiguousBand) {
  // Omega = 0 and Delta inside the folded band: bands touch
  const auto s = polariton_bands(BathSpec::ring(1.0, 16, 1), {2.0, 0.0}, 16);
  EXPECT_THROW(wannier_hoppings(s), Error);
}

// Arc region: nearest-neighbour array hopping equals the two-emitter splitting.
TEST(Wannier, ArrayMatchesTwoEmitterHopping) {
  for (auto [delta, om] : {std::pair{-3.0, 0.5}, std::pair{-1.0, 10.0}}) {
    const int z = 3;
    const auto s = polariton_bands(BathSpec::ring(1.0, 3 * 256, z), {delta, om}, 256);
    const auto w = wannier_hoppings(s);
    const auto h = effective_hopping_two_qe(solve_two_qe(BathSpec::infinite(1.0), {delta, om}, z));
    EXPECT_NEAR(w.at(1) / h.t, 1.0, 0.02) << delta << " " << om;
  }
}
