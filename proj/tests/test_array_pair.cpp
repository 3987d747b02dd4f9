#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "qpbs/array_pair.hpp"
#include "qpbs/ed_oracle.hpp"
#include "qpbs/two_qe_pair.hpp"

using namespace qpbs;

namespace {

bool strictly_inside(const EnergyWindow& w, double e) { return e > w.lo + kGapMargin && e < w.hi - kGapMargin; }

// lowest - highest energy over the momenta where the band exists
double bandwidth(const DoublonBand& b) {
  double lo = 1e300, hi = -1e300;
  for (const auto& e : b.energies)
    if (e) {
      lo = std::min(lo, *e);
      hi = std::max(hi, *e);
    }
  return hi - lo;
}

}  // namespace

TEST(PairBubble, DecoupledIsFreeResolvent) {
  const auto s = array_spectrum(1.0, 1, {-3.0, 0.0}, 16);
  for (long q : {0L, 3L})
    for (double w : {-8.0, -5.0, 9.5}) EXPECT_NEAR(pair_bubble(s, q, w), 1.0 / (w + 6.0), 1e-14);
}

TEST(PairBubble, Parity) {
  const auto s = array_spectrum(1.0, 2, {0.4, 1.3}, 32);
  for (long q = 1; q < 16; ++q)
    for (double w : {-3.0, -0.7, 12.0}) {
      const double a = pair_bubble(s, q, w);
      EXPECT_NEAR(a, pair_bubble(s, -q, w), 1e-11 * (1.0 + std::abs(a)));  // summation order differs
    }
}

// Property: decreasing on every interval free of two-polariton energies.
TEST(PairBubble, DecreasingBetweenPoles) {
  const auto s = array_spectrum(1.0, 1, {-1.0, 1.0}, 16);
  std::mt19937_64 rng(5);
  for (long q = 0; q < 16; ++q) {
    std::vector<double> poles;
    for (long p = 0; p < 16; ++p)
      for (std::size_t a = 0; a < 2; ++a)
        for (std::size_t b = 0; b < 2; ++b) poles.push_back(s.energy(a, p) + s.energy(b, q - p));
    std::sort(poles.begin(), poles.end());
    for (std::size_t i = 0; i + 1 < poles.size(); ++i) {
      if (poles[i + 1] - poles[i] < 1e-6) continue;
      std::uniform_real_distribution<double> u(poles[i] + 1e-7, poles[i + 1] - 1e-7);
      double x = u(rng), y = u(rng);
      if (x > y) std::swap(x, y);
      if (y - x < 1e-9) continue;
      EXPECT_GT(pair_bubble(s, q, x), pair_bubble(s, q, y));
    }
  }
}

TEST(PairBubble, PoleHit) {
  const auto s = array_spectrum(1.0, 1, {-3.0, 0.5}, 8);
  try {
    pair_bubble(s, 0, 2.0 * s.energy(0, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::pole_hit);
  }
}

TEST(ScatteringBands, DecoupledEdges) {
  const auto c = scattering_band_edges(array_spectrum(1.0, 1, {-3.0, 0.0}, 16), 0);
  // {2 Delta}, Delta + [0, 4J] and [0, 8J]; the last two overlap
  ASSERT_EQ(c.size(), 2u);
  EXPECT_NEAR(c[0].lo, -6.0, 1e-14);
  EXPECT_NEAR(c[0].hi, -6.0, 1e-14);
  EXPECT_NEAR(c[1].lo, -3.0, 1e-14);
  EXPECT_NEAR(c[1].hi, 8.0, 1e-14);
}

TEST(ScatteringBands, MidgapAtEveryMomentum) {
  const auto s = array_spectrum(1.0, 1, {-1.0, 1.0}, kDefaultBandCells);
  for (long q = 0; q < static_cast<long>(s.n_cells); ++q) {
    const auto g = gap_windows(s, q);
    ASSERT_FALSE(g.empty()) << q;
    EXPECT_GT(g[0].hi - g[0].lo, 0.1) << q;
  }
}

// Every midgap level of the momentum-resolved two-excitation ED is a doublon
// root, and vice versa.
TEST(DoublonBand, MatchesEdMomentumSectors) {
  for (auto cp : {CouplingSpec{0.0, 2.0}, CouplingSpec{1.0, 1.0}, CouplingSpec{-1.0, 1.0}}) {
    const auto s = array_spectrum(1.0, 1, cp, 8);
    for (int m = 0; m < 8; ++m) {
      const auto g = gap_windows(s, m);
      const auto r = ed::sector_spectrum(ed::build_sector(ed::Geometry::array(8, 1), 2, 2, m), 1.0, cp, 100000);
      for (std::size_t gi = 0; gi < g.size(); ++gi) {
        std::vector<double> inside;
        for (double x : r.eigenvalues)
          if (strictly_inside(g[gi], x)) inside.push_back(x);
        const auto e = doublon_energy(s, m, gi);
        ASSERT_EQ(inside.size(), e ? 1u : 0u) << "m=" << m << " gap=" << gi;
        if (e) EXPECT_NEAR(*e, inside[0], 1e-6);
      }
    }
  }
}

TEST(DoublonBand, RootResidualAndWindow) {
  const auto s = array_spectrum(1.0, 2, {-1.0, 2.0}, 64);
  for (std::size_t gap : {0u, 1u}) {
    const auto b = doublon_band(s, gap);
    for (std::size_t m = 0; m < b.energies.size(); ++m) {
      if (!b.energies[m]) continue;
      EXPECT_TRUE(strictly_inside(b.windows[m], *b.energies[m]));
      // the bracket crosses zero at the root, within one ulp either side
      const double e = *b.energies[m];
      const double lo = pair_bubble(s, static_cast<long>(m), std::nextafter(e, -1e300));
      const double hi = pair_bubble(s, static_cast<long>(m), std::nextafter(e, 1e300));
      EXPECT_TRUE(lo >= 0.0 || hi <= 0.0 || std::min(std::abs(lo), std::abs(hi)) < 1e-10);
      EXPECT_LT(std::abs(pair_bubble(s, static_cast<long>(m), e)), 1e-10 * (1.0 + std::abs(e)) + 1e-8 * std::abs(hi - lo) + 1e-10);
    }
  }
}

TEST(DoublonBand, Parity) {
  const auto b = doublon_band(array_spectrum(1.0, 1, {-1.0, 1.0}, 64));
  ASSERT_TRUE(b.complete());
  for (std::size_t m = 1; m < 64; ++m) EXPECT_NEAR(*b.energies[m], *b.energies[64 - m], 1e-12);
}

// z = 2 array
TEST(DoublonBand, FlatAtNegativeDetuningCurvedAtPositive) {
  const auto flat = doublon_band(array_spectrum(1.0, 2, {-1.0, 1.0}, kDefaultBandCells));
  const auto curved = doublon_band(array_spectrum(1.0, 2, {1.0, 1.0}, kDefaultBandCells));
  ASSERT_TRUE(flat.complete() && curved.complete());
  EXPECT_LT(bandwidth(flat), 0.2 * bandwidth(curved));
  EXPECT_GT(bandwidth(curved), 0.3);
}

TEST(DoublonHoppings, FourierRoundTrip) {
  const auto b = doublon_band(array_spectrum(1.0, 1, {-1.0, 1.0}, 64));
  const auto h = doublon_hoppings(b);
  for (std::size_t m = 0; m < 64; ++m) {
    double e = 0.0;
    for (long r = -31; r <= 32; ++r) e += h.at(r) * std::cos(b.momenta[m] * static_cast<double>(r));
    EXPECT_NEAR(e, *b.energies[m], 1e-10);
  }
}

TEST(DoublonHoppings, IncompleteBand) {
  const auto b = doublon_band(array_spectrum(1.0, 1, {1.0, 1.0}, 8));
  ASSERT_FALSE(b.complete());
  try {
    doublon_hoppings(b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::band_incomplete);
  }
}

// The array nearest-neighbour doublon hopping against the isolated-pair
// splitting at the same spacing.
TEST(DoublonHoppings, MatchesTwoEmitterHopping) {
  const CouplingSpec cp{-1.0, 2.0};
  const auto h = doublon_hoppings(doublon_band(array_spectrum(1.0, 2, cp, kDefaultBandCells)));
  const auto t = doublon_hopping_two_qe(solve_pair_poles(BathSpec::ring(1.0, kDefaultPairRing), cp, 2)).t;
  EXPECT_NEAR(h.t[1] / t, 1.0, 0.05);
}

// Agreement improves as the array gets dilute.
TEST(DoublonHoppings, DiluteLimitAgreement) {
  double prev = 1.0;
  for (double delta : {-1.0, -3.0, -5.0}) {
    const CouplingSpec cp{delta, 1.0};
    const auto h = doublon_hoppings(doublon_band(array_spectrum(1.0, 3, cp, kDefaultBandCells)));
    const auto t = doublon_hopping_two_qe(solve_pair_poles(BathSpec::ring(1.0, kDefaultPairRing), cp, 3)).t;
    const double err = std::abs(h.t[1] / t - 1.0);
    EXPECT_LT(err, prev);
    prev = err;
  }
  EXPECT_LT(prev, 0.05);
}

TEST(DoublonWavefunctions, NormAndParity) {
  const auto s = array_spectrum(1.0, 2, {0.0, 2.0}, kDefaultWavefunctionCells);
  for (long q : {0L, 5L}) {
    const auto e = doublon_energy(s, q);
    ASSERT_TRUE(e);
    const auto wf = doublon_wavefunctions(s, q, *e);
    EXPECT_NEAR(wf.norm, 1.0, 1e-10);
    double rb = 0.0, rab = 0.0, ra = 0.0;
    for (const auto& x : wf.f_b_real) rb += std::norm(x);
    for (const auto& x : wf.f_ab_real) rab += std::norm(x);
    for (const auto& row : wf.f_a_real)
      for (const auto& x : row) ra += std::norm(x);
    EXPECT_NEAR(rb, wf.weight_b, 1e-10);
    EXPECT_NEAR(rab, wf.weight_ab, 1e-10);
    EXPECT_NEAR(ra, wf.weight_a, 1e-10);
    EXPECT_NEAR(std::abs(wf.f_b_real[0]), 0.0, 1e-12);
    if (q == 0)
      for (std::size_t p = 1; p < s.n_cells; ++p) EXPECT_NEAR(wf.f_b[p], wf.f_b[s.n_cells - p], 1e-12);
  }
}

TEST(DoublonWavefunctions, OverlapWithEd) {
  for (auto cp : {CouplingSpec{0.0, 2.0}, CouplingSpec{-1.0, 1.0}}) {
    const auto s = array_spectrum(1.0, 1, cp, 8);
    const auto b = ed::build_sector(ed::Geometry::array(8, 1), 2, 2);
    const auto r = ed::sector_spectrum(b, 1.0, cp, static_cast<int>(b.dim()), true);
    for (long q : {0L, 2L, 3L}) {
      const auto e = doublon_energy(s, q);
      ASSERT_TRUE(e);
      const auto wf = doublon_wavefunctions(s, q, *e);
      const Eigen::MatrixXcd phi = doublon_real_space(s, wf);
      const auto v = ed::fock_vector(b, [&](const std::vector<std::size_t>& m) {
        return phi(static_cast<long>(m[0]), static_cast<long>(m[1]));
      });
      EXPECT_NEAR(v.norm(), 1.0, 1e-10);
      EXPECT_GT(ed::eigenspace_weight(r, *e, 1e-8, v), 0.99) << q;
    }
  }
}

TEST(DoublonWavefunctions, DegenerateRefused) {
  const auto s = array_spectrum(1.0, 1, {-1.0, 1.0}, 8);
  try {
    doublon_wavefunctions(s, 0, 2.0 * s.energy(0, 0) + 1e-12);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_residue);
  }
}

// Lowest doublon band tightly bound, second one spread out.
TEST(DoublonWavefunctions, LowerBandTighterThanUpper) {
  const auto s = array_spectrum(1.0, 2, {0.0, 2.0}, kDefaultWavefunctionCells);
  const auto near_fraction = [&](std::size_t gap) {
    const auto wf = doublon_wavefunctions(s, 0, *doublon_energy(s, 0, gap));
    double in = 0.0, all = 0.0;
    for (std::size_t r = 0; r < wf.f_b_real.size(); ++r) {
      const std::size_t dist = std::min(r, wf.f_b_real.size() - r);
      all += std::norm(wf.f_b_real[r]);
      if (dist <= 2) in += std::norm(wf.f_b_real[r]);
    }
    return in / all;
  };
  const double lower = near_fraction(0);
  const double upper = near_fraction(1);
  EXPECT_GT(lower, 0.99);
  EXPECT_LT(upper, 0.9 * lower);
}

TEST(EffectiveInteraction, DivergesInMarkovianRegime) {
  const auto u = u_eff(array_spectrum(1.0, 1, {-10.0, 0.3}, kDefaultBandCells));
  EXPECT_GT(std::abs(u.u_eff), 1e3);
}

TEST(EffectiveInteraction, SoftenedAndIncreasingAtPositiveDetuning) {
  double prev = 0.0;
  for (double om : {0.05, 0.3, 1.0, 2.0, 3.0}) {
    const auto u = u_eff(array_spectrum(1.0, 1, {1.0, om}, kDefaultBandCells));
    EXPECT_GT(u.u_eff, prev) << om;
    if (om == 0.05) EXPECT_LT(u.u_eff, 1e-3);
    prev = u.u_eff;
  }
}

TEST(EffectiveInteraction, RefusesAboveThreshold) {
  const auto s = array_spectrum(1.0, 1, {-1.0, 1.0}, 16);
  EXPECT_THROW(feshbach_interaction(s, 0, 10.0), Error);
}
