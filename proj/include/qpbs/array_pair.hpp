#pragma once

// Two excitations on the periodic emitter array. Everything is built on the
// finite polariton grid of a PolaritonSpectrum; momenta are integer indices m
// with P_m = 2 pi m / N_b.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qpbs/bath_core.hpp"
#include "qpbs/error.hpp"
#include "qpbs/roots.hpp"
#include "qpbs/single_excitation.hpp"

namespace qpbs {

inline constexpr std::size_t kDefaultBandCells = 256;
inline constexpr std::size_t kDefaultWavefunctionCells = 64;
inline constexpr double kBubblePoleTol = 1e-12;
inline constexpr double kGapMargin = 1e-9;

struct EnergyWindow {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

// Spectrum of an array of n_cells emitters with z sites per cell.
inline PolaritonSpectrum array_spectrum(double J, int z, const CouplingSpec& cp, std::size_t n_cells) {
  require(z >= 1, "z must be positive");
  return polariton_bands(BathSpec::ring(J, n_cells * static_cast<std::size_t>(z), z), cp, n_cells);
}

namespace detail {

template <class F>
void for_pairs(const PolaritonSpectrum& s, long q, bool skip_lowest, F&& f) {
  const long n = static_cast<long>(s.n_cells);
  const std::size_t nb = s.n_bands();
  for (long p = 0; p < n; ++p)
    for (std::size_t a = 0; a < nb; ++a)
      for (std::size_t b = 0; b < nb; ++b) {
        if (skip_lowest && a == 0 && b == 0) continue;
        f(p, a, b, s.energy(a, p) + s.energy(b, q - p), s.weight(a, p) * s.weight(b, q - p));
      }
}

inline double bubble(const PolaritonSpectrum& s, long q, double w, bool skip_lowest) {
  double acc = 0.0;
  bool hit = false;
  for_pairs(s, q, skip_lowest, [&](long, std::size_t, std::size_t, double e, double zz) {
    const double h = w - e;
    if (std::abs(h) < kBubblePoleTol * (1.0 + std::abs(w)) && zz > 0.0) hit = true;
    acc += zz / h;
  });
  if (hit) throw Error(Errc::pole_hit, "pair bubble evaluated on a two-polariton energy");
  return acc / static_cast<double>(s.n_cells);
}

}  // namespace detail

// Pi_b(q, w) over all band pairs. Decreasing in w between two-polariton energies.
inline double pair_bubble(const PolaritonSpectrum& s, long q, double w) { return detail::bubble(s, q, w, false); }

inline double pair_t_matrix(const PolaritonSpectrum& s, long q, double w) { return -1.0 / pair_bubble(s, q, w); }

// Disjoint two-polariton continua at total momentum q, merged over all band
// pairs and sorted.
inline std::vector<EnergyWindow> scattering_band_edges(const PolaritonSpectrum& s, long q) {
  const std::size_t nb = s.n_bands();
  std::vector<EnergyWindow> raw;
  for (std::size_t a = 0; a < nb; ++a)
    for (std::size_t b = a; b < nb; ++b) {
      EnergyWindow iv{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
      for (long p = 0; p < static_cast<long>(s.n_cells); ++p) {
        const double e = s.energy(a, p) + s.energy(b, q - p);
        iv.lo = std::min(iv.lo, e);
        iv.hi = std::max(iv.hi, e);
      }
      raw.push_back(iv);
    }
  std::sort(raw.begin(), raw.end(), [](const EnergyWindow& x, const EnergyWindow& y) { return x.lo < y.lo; });
  std::vector<EnergyWindow> out;
  for (const auto& iv : raw) {
    if (!out.empty() && iv.lo <= out.back().hi)
      out.back().hi = std::max(out.back().hi, iv.hi);
    else
      out.push_back(iv);
  }
  return out;
}

// Open intervals between consecutive continua.
inline std::vector<EnergyWindow> gap_windows(const PolaritonSpectrum& s, long q) {
  const auto c = scattering_band_edges(s, q);
  std::vector<EnergyWindow> g;
  for (std::size_t i = 0; i + 1 < c.size(); ++i) g.push_back({c[i].hi, c[i + 1].lo});
  return g;
}

// Root of Pi_b(q, .) inside gap window `gap`, if any.
inline std::optional<double> doublon_energy(const PolaritonSpectrum& s, long q, std::size_t gap = 0) {
  const auto g = gap_windows(s, q);
  if (gap >= g.size()) return std::nullopt;
  const double width = g[gap].hi - g[gap].lo;
  if (width <= 2.0 * kGapMargin) return std::nullopt;
  const auto f = [&](double w) { return pair_bubble(s, q, w); };
  const double lo = g[gap].lo + kGapMargin;
  const double hi = g[gap].hi - kGapMargin;
  const double flo = f(lo);
  const double fhi = f(hi);
  if ((flo < 0.0) == (fhi < 0.0)) return std::nullopt;
  return roots::bisect(f, lo, hi, flo, fhi);
}

struct DoublonBand {
  std::size_t gap = 0;
  std::vector<double> momenta;
  std::vector<std::optional<double>> energies;  // per q index
  std::vector<EnergyWindow> windows;            // gap window per q (empty when absent)
  std::optional<WannierHoppings> hoppings;      // only for a complete band

  bool complete() const {
    return std::all_of(energies.begin(), energies.end(), [](const auto& e) { return e.has_value(); });
  }
};

inline DoublonBand doublon_band(const PolaritonSpectrum& s, std::size_t gap = 0) {
  DoublonBand b;
  b.gap = gap;
  for (std::size_t m = 0; m < s.n_cells; ++m) {
    const long q = static_cast<long>(m);
    b.momenta.push_back(s.momenta[m]);
    const auto g = gap_windows(s, q);
    b.windows.push_back(gap < g.size() ? g[gap] : EnergyWindow{});
    b.energies.push_back(doublon_energy(s, q, gap));
  }
  if (b.complete()) {
    std::vector<double> e;
    for (const auto& x : b.energies) e.push_back(*x);
    b.hoppings = band_fourier(e);
  }
  return b;
}

// t^D_r for r = 0..N_b/2.
inline WannierHoppings doublon_hoppings(const DoublonBand& b) {
  if (!b.complete()) throw Error(Errc::band_incomplete, "doublon band missing at some momenta");
  if (b.hoppings) return *b.hoppings;
  std::vector<double> e;
  for (const auto& x : b.energies) e.push_back(*x);
  return band_fourier(e);
}

// Momentum and real-space amplitudes of the doublon state at total momentum q.
// With A_p = V(p) W_p V(q-p)^T in the (emitter, photon k_l) basis:
//   f_b(p) = sqrt2 A_p^{00}, f_ab(p,l) = 2 A_p^{0,l+1}, f_a(p,l,l') = sqrt2 A_p^{l+1,l'+1}.
// Real-space forms fix the first particle in cell 0.
struct DoublonWavefunctions {
  long q = 0;
  double energy = 0.0;
  double z2 = 0.0;         // [(1/N_b) sum ZZ'/h^2]^{-1}
  double norm = 0.0;       // total weight of the three components
  double weight_b = 0.0, weight_ab = 0.0, weight_a = 0.0;

  std::vector<double> f_b;                                // [p]
  std::vector<std::vector<double>> f_ab;                  // [p][l]
  std::vector<std::vector<std::vector<double>>> f_a;      // [p][l][l']
  std::vector<Eigen::MatrixXd> amplitude;                 // A_p

  std::vector<cplx> f_b_real;                             // [r], emitter pair at 0 and r
  std::vector<cplx> f_ab_real;                            // [n], emitter at cell 0, photon at site n
  std::vector<std::vector<cplx>> f_a_real;                // [n in cell 0][m]
};

inline DoublonWavefunctions doublon_wavefunctions(const PolaritonSpectrum& s, long q, double energy) {
  const std::size_t nc = s.n_cells;
  const std::size_t nb = s.n_bands();
  const int z = s.z;
  const double dn = static_cast<double>(nc);
  double hmin = std::numeric_limits<double>::infinity();
  double inv = 0.0;
  detail::for_pairs(s, q, false, [&](long, std::size_t, std::size_t, double e, double zz) {
    const double h = energy - e;
    hmin = std::min(hmin, std::abs(h));
    inv += zz / (h * h);
  });
  if (hmin < 1e-9 * s.J) throw Error(Errc::degenerate_residue, "doublon energy on a two-polariton level");
  DoublonWavefunctions wf;
  wf.q = q;
  wf.energy = energy;
  wf.z2 = dn / inv;
  const double c = std::sqrt(0.5 * wf.z2) / std::sqrt(dn);

  wf.f_b.assign(nc, 0.0);
  wf.f_ab.assign(nc, std::vector<double>(static_cast<std::size_t>(z), 0.0));
  wf.f_a.assign(nc, std::vector<std::vector<double>>(static_cast<std::size_t>(z), std::vector<double>(static_cast<std::size_t>(z), 0.0)));
  for (std::size_t pi = 0; pi < nc; ++pi) {
    const long p = static_cast<long>(pi);
    const std::size_t pq = s.wrap(q - p);
    Eigen::MatrixXd w(static_cast<long>(nb), static_cast<long>(nb));
    for (std::size_t a = 0; a < nb; ++a)
      for (std::size_t b = 0; b < nb; ++b) {
        const double ua = s.vectors[pi](0, static_cast<long>(a));
        const double ub = s.vectors[pq](0, static_cast<long>(b));
        w(static_cast<long>(a), static_cast<long>(b)) = c * ua * ub / (energy - s.bands[a][pi] - s.bands[b][pq]);
      }
    const Eigen::MatrixXd amp = s.vectors[pi] * w * s.vectors[pq].transpose();
    wf.amplitude.push_back(amp);
    wf.f_b[pi] = std::sqrt(2.0) * amp(0, 0);
    wf.weight_b += wf.f_b[pi] * wf.f_b[pi];
    for (int l = 0; l < z; ++l) {
      wf.f_ab[pi][static_cast<std::size_t>(l)] = 2.0 * amp(0, l + 1);
      wf.weight_ab += 4.0 * amp(0, l + 1) * amp(0, l + 1);
      for (int l2 = 0; l2 < z; ++l2) {
        wf.f_a[pi][static_cast<std::size_t>(l)][static_cast<std::size_t>(l2)] = std::sqrt(2.0) * amp(l + 1, l2 + 1);
        wf.weight_a += 2.0 * amp(l + 1, l2 + 1) * amp(l + 1, l2 + 1);
      }
    }
  }
  wf.norm = wf.weight_b + wf.weight_ab + wf.weight_a;

  // real space; the second particle carries momentum q - p
  const std::size_t ns = nc * static_cast<std::size_t>(z);
  const double dns = static_cast<double>(ns);
  wf.f_b_real.assign(nc, 0.0);
  wf.f_ab_real.assign(ns, 0.0);
  wf.f_a_real.assign(static_cast<std::size_t>(z), std::vector<cplx>(ns, 0.0));
  for (std::size_t pi = 0; pi < nc; ++pi) {
    const long p = static_cast<long>(pi);
    const long pq = q - p;
    const double pq_mom = 2.0 * kPi * static_cast<double>(pq) / dn;
    for (std::size_t r = 0; r < nc; ++r)
      wf.f_b_real[r] += wf.f_b[pi] * std::polar(1.0 / std::sqrt(dn), pq_mom * static_cast<double>(r));
    for (int l = 0; l < z; ++l) {
      const double k2 = s.bath_momentum(pq, l);
      for (std::size_t n = 0; n < ns; ++n)
        wf.f_ab_real[n] += wf.f_ab[pi][static_cast<std::size_t>(l)] * std::polar(1.0 / std::sqrt(dns), k2 * static_cast<double>(n));
      for (int l1 = 0; l1 < z; ++l1) {
        const double k1 = s.bath_momentum(p, l1);
        const double a = wf.f_a[pi][static_cast<std::size_t>(l1)][static_cast<std::size_t>(l)];
        for (int n = 0; n < z; ++n)
          for (std::size_t m = 0; m < ns; ++m)
            wf.f_a_real[static_cast<std::size_t>(n)][m] +=
                a * std::sqrt(dn) / dns * std::polar(1.0, k1 * n + k2 * static_cast<double>(m));
      }
    }
  }
  return wf;
}

// Pair amplitude Phi with |psi> = sum_ab Phi_ab m_a^+ m_b^+ |0>, modes ordered
// emitters first, then sites. Dense; meant for small arrays.
inline Eigen::MatrixXcd doublon_real_space(const PolaritonSpectrum& s, const DoublonWavefunctions& wf) {
  const std::size_t nc = s.n_cells;
  const std::size_t ns = nc * static_cast<std::size_t>(s.z);
  const long nm = static_cast<long>(nc + ns);
  const long nb = static_cast<long>(s.n_bands());
  const auto plane = [&](long p) {
    Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(nm, nb);
    const double pm = 2.0 * kPi * static_cast<double>(p) / static_cast<double>(nc);
    for (std::size_t j = 0; j < nc; ++j) u(static_cast<long>(j), 0) = std::polar(1.0 / std::sqrt(static_cast<double>(nc)), pm * static_cast<double>(j));
    for (int l = 0; l < s.z; ++l) {
      const double k = s.bath_momentum(p, l);
      for (std::size_t n = 0; n < ns; ++n)
        u(static_cast<long>(nc + n), l + 1) = std::polar(1.0 / std::sqrt(static_cast<double>(ns)), k * static_cast<double>(n));
    }
    return u;
  };
  Eigen::MatrixXcd phi = Eigen::MatrixXcd::Zero(nm, nm);
  for (std::size_t pi = 0; pi < nc; ++pi) {
    const long p = static_cast<long>(pi);
    phi += plane(p) * wf.amplitude[pi].cast<cplx>() * plane(wf.q - p).transpose();
  }
  return phi;
}

// Feshbach interaction with the lowest-lowest band pair removed from the bubble.
inline double feshbach_interaction(const PolaritonSpectrum& s, long q, double energy) {
  double thr = std::numeric_limits<double>::infinity();
  detail::for_pairs(s, q, true, [&](long, std::size_t, std::size_t, double e, double) { thr = std::min(thr, e); });
  require(energy < thr, "energy above the excluded two-polariton threshold");
  return -1.0 / detail::bubble(s, q, energy, true);
}

struct EffectiveInteraction {
  double z1 = 0.0;  // lowest-band weight at P = 0
  double e0 = 0.0;  // 2 E_1(0)
  double u_int = 0.0;
  double u_eff = 0.0;
};

inline EffectiveInteraction u_eff(const PolaritonSpectrum& s) {
  EffectiveInteraction r;
  r.z1 = s.weight(0, 0);
  r.e0 = 2.0 * s.energy(0, 0);
  r.u_int = feshbach_interaction(s, 0, r.e0);
  r.u_eff = r.z1 * r.z1 * r.u_int;
  return r;
}

}  // namespace qpbs
