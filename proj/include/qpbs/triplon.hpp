#pragma once

// Three excitations on the emitter array. A hard-core eigenstate is
//   |psi> = G0(E) sum_{k,lam} s_{k lam} B_{q-k}^+ beta_{k lam}^+ |0>,
//   B_Q^+ = sum_j e^{iQj} (b_j^+)^2,
// and b_j^2 |psi> = 0 gives f = M(E) f with s_{k lam} = u_lam(k) T(q-k, E - E_lam(k)) f_{k lam}.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qpbs/array_pair.hpp"
#include "qpbs/error.hpp"
#include "qpbs/roots.hpp"
#include "qpbs/single_excitation.hpp"

namespace qpbs {

inline constexpr std::size_t kDefaultTriplonCells = 48;
inline constexpr int kTriplonScanPoints = 200;
inline constexpr double kTriplonSingularTol = 1e-8;
inline constexpr double kTriplonRootAgreement = 1e-8;

struct MMatrix {
  long q = 0;
  double energy = 0.0;
  Eigen::MatrixXd m;  // index k * n_bands + lam
};

namespace detail {

inline long idx(const PolaritonSpectrum& s, long k, std::size_t lam) {
  return static_cast<long>(s.wrap(k) * s.n_bands() + lam);
}

// Emitter-projected one-particle resolvent at momentum p.
inline double emitter_resolvent(const PolaritonSpectrum& s, long p, double w) {
  double g = 0.0;
  for (std::size_t a = 0; a < s.n_bands(); ++a) {
    const double h = w - s.energy(a, p);
    if (std::abs(h) < 1e-9 * s.J) throw Error(Errc::pole_hit, "three-polariton energy (resolvent pole)");
    g += s.weight(a, p) / h;
  }
  return g;
}

inline double pair_t(const PolaritonSpectrum& s, long q, double w) {
  double b = 0.0;
  try {
    b = pair_bubble(s, q, w);
  } catch (const Error&) {
    throw Error(Errc::pole_hit, "three-polariton energy (pair bubble pole)");
  }
  if (std::abs(b) < 1e-12) throw Error(Errc::pole_hit, "polariton + doublon energy (T pole)");
  return -1.0 / b;
}

}  // namespace detail

// M_{p lam1, k lam}(E) = (2/N_b) Z_lam(k) T(q-k, E - E_lam(k)) G_b(q-p-k, E - E_lam1(p) - E_lam(k)).
inline MMatrix m_matrix(const PolaritonSpectrum& s, long q, double energy) {
  const long n = static_cast<long>(s.n_cells);
  const std::size_t nb = s.n_bands();
  const long dim = n * static_cast<long>(nb);
  std::vector<double> zt(static_cast<std::size_t>(dim));
  for (long k = 0; k < n; ++k)
    for (std::size_t l = 0; l < nb; ++l)
      zt[static_cast<std::size_t>(detail::idx(s, k, l))] =
          2.0 / static_cast<double>(n) * s.weight(l, k) * detail::pair_t(s, q - k, energy - s.energy(l, k));
  MMatrix r;
  r.q = q;
  r.energy = energy;
  r.m.resize(dim, dim);
  for (long p = 0; p < n; ++p)
    for (std::size_t l1 = 0; l1 < nb; ++l1)
      for (long k = 0; k < n; ++k)
        for (std::size_t l = 0; l < nb; ++l) {
          const double g = detail::emitter_resolvent(s, q - p - k, energy - s.energy(l1, p) - s.energy(l, k));
          r.m(detail::idx(s, p, l1), detail::idx(s, k, l)) = zt[static_cast<std::size_t>(detail::idx(s, k, l))] * g;
        }
  return r;
}

// Three-polariton continua over all band triples, merged.
inline std::vector<EnergyWindow> three_polariton_continua(const PolaritonSpectrum& s, long q) {
  const std::size_t nb = s.n_bands();
  const long n = static_cast<long>(s.n_cells);
  std::vector<EnergyWindow> raw;
  for (std::size_t a = 0; a < nb; ++a)
    for (std::size_t b = a; b < nb; ++b)
      for (std::size_t c = b; c < nb; ++c) {
        EnergyWindow w{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
        for (long p1 = 0; p1 < n; ++p1)
          for (long p2 = 0; p2 < n; ++p2) {
            const double e = s.energy(a, p1) + s.energy(b, p2) + s.energy(c, q - p1 - p2);
            w.lo = std::min(w.lo, e);
            w.hi = std::max(w.hi, e);
          }
        raw.push_back(w);
      }
  return raw;
}

struct ThreeExcitationContinua {
  std::vector<EnergyWindow> three_polariton;     // per band triple
  std::vector<EnergyWindow> polariton_doublon;   // per (band, doublon band)
  std::vector<EnergyWindow> merged;              // union, sorted
  std::vector<EnergyWindow> gaps;                // between consecutive merged intervals
};

namespace detail {

inline std::vector<EnergyWindow> merge(std::vector<EnergyWindow> raw) {
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

}  // namespace detail

// `doublons` holds the doublon bands of the same spectrum (one per pair gap).
inline ThreeExcitationContinua three_excitation_continua(const PolaritonSpectrum& s, const std::vector<DoublonBand>& doublons, long q) {
  ThreeExcitationContinua c;
  c.three_polariton = three_polariton_continua(s, q);
  const long n = static_cast<long>(s.n_cells);
  for (const auto& d : doublons)
    for (std::size_t l = 0; l < s.n_bands(); ++l) {
      EnergyWindow w{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
      bool any = false;
      for (long p = 0; p < n; ++p) {
        const auto& e2 = d.energies[s.wrap(q - p)];
        if (!e2) continue;
        any = true;
        const double e = s.energy(l, p) + *e2;
        w.lo = std::min(w.lo, e);
        w.hi = std::max(w.hi, e);
      }
      if (any) c.polariton_doublon.push_back(w);
    }
  std::vector<EnergyWindow> all = c.three_polariton;
  all.insert(all.end(), c.polariton_doublon.begin(), c.polariton_doublon.end());
  c.merged = detail::merge(all);
  for (std::size_t i = 0; i + 1 < c.merged.size(); ++i) c.gaps.push_back({c.merged[i].hi, c.merged[i + 1].lo});
  return c;
}

// Every doublon band of the spectrum, one per pair gap.
inline std::vector<DoublonBand> all_doublon_bands(const PolaritonSpectrum& s) {
  std::size_t ngaps = 0;
  for (long q = 0; q < static_cast<long>(s.n_cells); ++q) ngaps = std::max(ngaps, gap_windows(s, q).size());
  std::vector<DoublonBand> out;
  for (std::size_t g = 0; g < ngaps; ++g) out.push_back(doublon_band(s, g));
  return out;
}

namespace detail {

struct DetSign {
  int sign = 0;
  double log_abs = 0.0;
};

inline DetSign det_sign(const Eigen::MatrixXd& a) {
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
  const Eigen::MatrixXd& u = lu.matrixLU();
  DetSign d;
  d.sign = static_cast<int>(lu.permutationP().determinant());
  for (long i = 0; i < u.rows(); ++i) {
    const double x = u(i, i);
    if (x == 0.0) return {0, -std::numeric_limits<double>::infinity()};
    if (x < 0.0) d.sign = -d.sign;
    d.log_abs += std::log(std::abs(x));
  }
  return d;
}

inline double smallest_singular(const Eigen::MatrixXd& a) {
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

inline Eigen::MatrixXd m_minus_one(const PolaritonSpectrum& s, long q, double e) {
  Eigen::MatrixXd a = m_matrix(s, q, e).m;
  a.diagonal().array() -= 1.0;
  return a;
}

}  // namespace detail

struct TriplonRoot {
  long q = 0;
  double energy = 0.0;
  double smallest_singular = 0.0;
  Eigen::VectorXd f;  // null vector of M - 1, unit norm
  EnergyWindow window;
};

// Root of det[M(E) - 1] in the given window: sign scan on kTriplonScanPoints
// points, then bisection. Accepted only when sigma_min of M - 1 is below
// kTriplonSingularTol and locally minimal there.
inline std::optional<TriplonRoot> triplon_root_in(const PolaritonSpectrum& s, long q, const EnergyWindow& w) {
  // stay clear of the 1e-9 denominator guard at the window edges
  const double margin = std::max(1e-8 * s.J, 1e-6 * (w.hi - w.lo));
  const double lo = w.lo + margin;
  const double hi = w.hi - margin;
  if (!(hi > lo)) return std::nullopt;
  const auto sgn = [&](double e) { return detail::det_sign(detail::m_minus_one(s, q, e)).sign; };
  double x0 = lo;
  int s0 = sgn(x0);
  for (int i = 1; i < kTriplonScanPoints; ++i) {
    const double x1 = lo + (hi - lo) * static_cast<double>(i) / (kTriplonScanPoints - 1);
    const int s1 = sgn(x1);
    if (s0 != 0 && s1 != 0 && s0 != s1) {
      const double e = roots::bisect([&](double e) { return static_cast<double>(sgn(e)); }, x0, x1, s0, s1);
      // independent check: sigma_min has its local minimum at the same energy
      const double h = kTriplonRootAgreement * (1.0 + std::abs(e));
      const auto sig = [&](double x) { return detail::smallest_singular(detail::m_minus_one(s, q, x)); };
      const bool is_min = sig(e - h) > sig(e) && sig(e + h) > sig(e);
      const Eigen::MatrixXd am = detail::m_minus_one(s, q, e);
      Eigen::BDCSVD<Eigen::MatrixXd> svd(am, Eigen::ComputeFullV);
      const long last = svd.singularValues().size() - 1;
      const double smin = svd.singularValues()(last);
      if (is_min && smin < kTriplonSingularTol) {
        TriplonRoot r;
        r.q = q;
        r.energy = e;
        r.smallest_singular = smin;
        r.f = svd.matrixV().col(last);
        r.window = w;
        return r;
      }
    }
    x0 = x1;
    s0 = s1;
  }
  return std::nullopt;
}

// Root in gap `gap` of the three-excitation continua at q.
inline std::optional<TriplonRoot> triplon_energy(const PolaritonSpectrum& s, const std::vector<DoublonBand>& doublons, long q,
                                                 std::size_t gap = 0) {
  const auto c = three_excitation_continua(s, doublons, q);
  if (gap >= c.gaps.size()) return std::nullopt;
  return triplon_root_in(s, q, c.gaps[gap]);
}

struct TriplonBand {
  std::size_t gap = 0;
  std::vector<double> momenta;
  std::vector<std::optional<double>> energies;
  std::vector<EnergyWindow> windows;
  std::vector<double> smallest_singular;

  bool complete() const {
    return std::all_of(energies.begin(), energies.end(), [](const auto& e) { return e.has_value(); });
  }
};

inline TriplonBand triplon_band(const PolaritonSpectrum& s, std::size_t gap = 0) {
  const auto doublons = all_doublon_bands(s);
  TriplonBand b;
  b.gap = gap;
  for (std::size_t m = 0; m < s.n_cells; ++m) {
    const long q = static_cast<long>(m);
    b.momenta.push_back(s.momenta[m]);
    const auto c = three_excitation_continua(s, doublons, q);
    b.windows.push_back(gap < c.gaps.size() ? c.gaps[gap] : EnergyWindow{});
    std::optional<TriplonRoot> r;
    if (gap < c.gaps.size()) r = triplon_root_in(s, q, c.gaps[gap]);
    b.energies.push_back(r ? std::optional<double>(r->energy) : std::nullopt);
    b.smallest_singular.push_back(r ? r->smallest_singular : std::numeric_limits<double>::quiet_NaN());
  }
  return b;
}

inline WannierHoppings triplon_hoppings(const TriplonBand& b) {
  if (!b.complete()) throw Error(Errc::band_incomplete, "triplon band missing at some momenta");
  std::vector<double> e;
  for (const auto& x : b.energies) e.push_back(*x);
  return band_fourier(e);
}

// Largest |E_3B(coarse) - E_3B(fine)| over `points` momenta shared by both
// grids (n_fine must be a multiple of n_coarse). NaN when a root is missing.
inline double triplon_discretization_error(double J, int z, const CouplingSpec& cp, std::size_t n_coarse, std::size_t n_fine,
                                           std::size_t points = 5, std::size_t gap = 0) {
  require(n_fine % n_coarse == 0, "fine grid must contain the coarse grid");
  const auto a = array_spectrum(J, z, cp, n_coarse);
  const auto b = array_spectrum(J, z, cp, n_fine);
  const auto da = all_doublon_bands(a);
  const auto db = all_doublon_bands(b);
  const std::size_t ratio = n_fine / n_coarse;
  double err = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const long m = static_cast<long>(i * (n_coarse / 2) / std::max<std::size_t>(points - 1, 1));
    const auto ra = triplon_energy(a, da, m, gap);
    const auto rb = triplon_energy(b, db, m * static_cast<long>(ratio), gap);
    if (!ra || !rb) return std::numeric_limits<double>::quiet_NaN();
    err = std::max(err, std::abs(ra->energy - rb->energy));
  }
  return err;
}

// Amplitudes of the triplon state. C[p1][p2] is the (z+1)^3 tensor of the
// symmetric amplitude in the (emitter, photon k_l) basis, third momentum
// q - p1 - p2, flattened as mu1 * (z+1)^2 + mu2 * (z+1) + mu3. The state is
// sum C beta^+ beta^+ beta^+ |0> and has norm 6 sum |C|^2.
// Components: f_b = sqrt6 C_000, f_bba = sqrt18 C_00l, f_baa = sqrt18 C_0ll', f_a = sqrt6 C_lll'.
struct TriplonWavefunctions {
  long q = 0;
  double energy = 0.0;
  double raw_norm = 0.0;  // norm before normalisation
  double norm = 0.0;
  double weight_b = 0.0, weight_bba = 0.0, weight_baa = 0.0, weight_a = 0.0;
  std::size_t n_cells = 0;
  int z = 1;
  std::vector<double> c;  // [p1][p2][mu1][mu2][mu3]

  double at(std::size_t p1, std::size_t p2, int m1, int m2, int m3) const {
    const std::size_t nb = static_cast<std::size_t>(z) + 1;
    return c[(((p1 * n_cells + p2) * nb + static_cast<std::size_t>(m1)) * nb + static_cast<std::size_t>(m2)) * nb + static_cast<std::size_t>(m3)];
  }
  double f_b(std::size_t k1, std::size_t k2) const { return std::sqrt(6.0) * at(k1, k2, 0, 0, 0); }
  double f_bba(std::size_t k1, std::size_t k2, int l) const { return std::sqrt(18.0) * at(k1, k2, 0, 0, l + 1); }
  double f_baa(std::size_t k1, std::size_t k2, int l2, int l3) const { return std::sqrt(18.0) * at(k1, k2, 0, l2 + 1, l3 + 1); }
  double f_a(std::size_t k1, std::size_t k2, int l1, int l2, int l3) const { return std::sqrt(6.0) * at(k1, k2, l1 + 1, l2 + 1, l3 + 1); }
};

inline TriplonWavefunctions triplon_wavefunctions(const PolaritonSpectrum& s, const TriplonRoot& root) {
  const std::size_t n = s.n_cells;
  const std::size_t nb = s.n_bands();
  const long q = root.q;
  const double e = root.energy;
  // source amplitude s_{k lam}
  std::vector<double> src(n * nb);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t l = 0; l < nb; ++l) {
      const long kk = static_cast<long>(k);
      src[k * nb + l] = std::sqrt(s.weight(l, kk)) * detail::pair_t(s, q - kk, e - s.energy(l, kk)) * root.f(detail::idx(s, kk, l));
    }
  // polariton-basis amplitude c_{xyz} = s_z u_x u_y / h, then symmetrised
  const std::size_t nb3 = nb * nb * nb;
  std::vector<double> pol(n * n * nb3, 0.0);
  const auto pidx = [&](std::size_t p1, std::size_t p2, std::size_t a, std::size_t b, std::size_t c) {
    return (((p1 * n + p2) * nb + a) * nb + b) * nb + c;
  };
  for (std::size_t p1 = 0; p1 < n; ++p1)
    for (std::size_t p2 = 0; p2 < n; ++p2) {
      const std::size_t p3 = s.wrap(q - static_cast<long>(p1) - static_cast<long>(p2));
      for (std::size_t a = 0; a < nb; ++a)
        for (std::size_t b = 0; b < nb; ++b)
          for (std::size_t c = 0; c < nb; ++c) {
            const double h = e - s.bands[a][p1] - s.bands[b][p2] - s.bands[c][p3];
            if (std::abs(h) < 1e-9 * s.J)
              throw Error(Errc::degenerate_residue, "p=" + std::to_string(p1) + "," + std::to_string(p2) + " bands " + std::to_string(a) +
                                                        std::to_string(b) + std::to_string(c));
            const double v = src[p3 * nb + c] * std::sqrt(s.weights[a][p1] * s.weights[b][p2]) / h;
            // symmetrise over the three slots
            pol[pidx(p1, p2, a, b, c)] += v / 3.0;
            pol[pidx(p2, p3, b, c, a)] += v / 3.0;
            pol[pidx(p3, p1, c, a, b)] += v / 3.0;
          }
    }
  // rotate each slot to the (emitter, photon) basis
  TriplonWavefunctions wf;
  wf.q = q;
  wf.energy = e;
  wf.n_cells = n;
  wf.z = s.z;
  wf.c.assign(n * n * nb3, 0.0);
  for (std::size_t p1 = 0; p1 < n; ++p1)
    for (std::size_t p2 = 0; p2 < n; ++p2) {
      const std::size_t p3 = s.wrap(q - static_cast<long>(p1) - static_cast<long>(p2));
      const Eigen::MatrixXd& v1 = s.vectors[p1];
      const Eigen::MatrixXd& v2 = s.vectors[p2];
      const Eigen::MatrixXd& v3 = s.vectors[p3];
      for (std::size_t a = 0; a < nb; ++a)
        for (std::size_t b = 0; b < nb; ++b)
          for (std::size_t c = 0; c < nb; ++c) {
            const double x = pol[pidx(p1, p2, a, b, c)];
            if (x == 0.0) continue;
            for (std::size_t m1 = 0; m1 < nb; ++m1)
              for (std::size_t m2 = 0; m2 < nb; ++m2)
                for (std::size_t m3 = 0; m3 < nb; ++m3)
                  wf.c[pidx(p1, p2, m1, m2, m3)] += x * v1(static_cast<long>(m1), static_cast<long>(a)) *
                                                    v2(static_cast<long>(m2), static_cast<long>(b)) *
                                                    v3(static_cast<long>(m3), static_cast<long>(c));
          }
    }
  double total = 0.0;
  for (double x : wf.c) total += 6.0 * x * x;
  wf.raw_norm = total;
  const double scale = 1.0 / std::sqrt(total);
  for (double& x : wf.c) x *= scale;
  for (std::size_t p1 = 0; p1 < n; ++p1)
    for (std::size_t p2 = 0; p2 < n; ++p2)
      for (std::size_t m1 = 0; m1 < nb; ++m1)
        for (std::size_t m2 = 0; m2 < nb; ++m2)
          for (std::size_t m3 = 0; m3 < nb; ++m3) {
            const double w = 6.0 * std::pow(wf.c[pidx(p1, p2, m1, m2, m3)], 2);
            const int photons = (m1 > 0) + (m2 > 0) + (m3 > 0);
            if (photons == 0) wf.weight_b += w;
            else if (photons == 1) wf.weight_bba += w;
            else if (photons == 2) wf.weight_baa += w;
            else wf.weight_a += w;
          }
  wf.norm = wf.weight_b + wf.weight_bba + wf.weight_baa + wf.weight_a;
  return wf;
}

namespace detail {

// Columns: momentum modes (p, mu) ordered p * (z+1) + mu; rows: real-space
// modes, emitters first.
inline Eigen::MatrixXcd plane_waves(const PolaritonSpectrum& s) {
  const std::size_t nc = s.n_cells;
  const std::size_t ns = nc * static_cast<std::size_t>(s.z);
  const std::size_t nb = s.n_bands();
  Eigen::MatrixXcd u = Eigen::MatrixXcd::Zero(static_cast<long>(nc + ns), static_cast<long>(nc * nb));
  for (std::size_t p = 0; p < nc; ++p) {
    const double pm = s.momenta[p];
    for (std::size_t j = 0; j < nc; ++j)
      u(static_cast<long>(j), static_cast<long>(p * nb)) = std::polar(1.0 / std::sqrt(static_cast<double>(nc)), pm * static_cast<double>(j));
    for (int l = 0; l < s.z; ++l) {
      const double k = s.bath_momentum(static_cast<long>(p), l);
      for (std::size_t x = 0; x < ns; ++x)
        u(static_cast<long>(nc + x), static_cast<long>(p * nb) + l + 1) =
            std::polar(1.0 / std::sqrt(static_cast<double>(ns)), k * static_cast<double>(x));
    }
  }
  return u;
}

}  // namespace detail

// Real-space slice Phi(x1, ., .) of the three-particle amplitude for a fixed
// first mode x1; modes ordered emitters first, then sites.
inline Eigen::MatrixXcd triplon_slice(const PolaritonSpectrum& s, const TriplonWavefunctions& wf, const Eigen::MatrixXcd& u,
                                      long x1) {
  const std::size_t n = s.n_cells;
  const std::size_t nb = s.n_bands();
  const long dim = static_cast<long>(n * nb);
  Eigen::MatrixXcd g = Eigen::MatrixXcd::Zero(dim, dim);
  for (std::size_t p1 = 0; p1 < n; ++p1)
    for (std::size_t p2 = 0; p2 < n; ++p2) {
      const std::size_t p3 = s.wrap(wf.q - static_cast<long>(p1) - static_cast<long>(p2));
      for (std::size_t m1 = 0; m1 < nb; ++m1) {
        const cplx w1 = u(x1, static_cast<long>(p1 * nb + m1));
        if (w1 == cplx(0.0)) continue;
        for (std::size_t m2 = 0; m2 < nb; ++m2)
          for (std::size_t m3 = 0; m3 < nb; ++m3)
            g(static_cast<long>(p2 * nb + m2), static_cast<long>(p3 * nb + m3)) += w1 * wf.at(p1, p2, static_cast<int>(m1), static_cast<int>(m2), static_cast<int>(m3));
      }
    }
  return u * g * u.transpose();
}

// Real-space profiles with the first particle fixed in cell 0:
// f_b(r2, r3) emitters at 0, r2, r3; f_bba(r, x) emitters at 0, r and photon
// at site x; f_baa(x2, x3) emitter at 0, photons at x2, x3; f_a(n, x2, x3)
// photons at n (cell 0), x2, x3. Squared moduli sum to the component weights.
struct TriplonProfiles {
  Eigen::MatrixXcd f_b, f_bba, f_baa;
  std::vector<Eigen::MatrixXcd> f_a;
};

inline TriplonProfiles triplon_profiles(const PolaritonSpectrum& s, const TriplonWavefunctions& wf) {
  const long nc = static_cast<long>(s.n_cells);
  const long ns = nc * s.z;
  const auto u = detail::plane_waves(s);
  TriplonProfiles pr;
  const double k6 = std::sqrt(6.0 * static_cast<double>(nc));
  const double k18 = std::sqrt(18.0 * static_cast<double>(nc));
  const Eigen::MatrixXcd e0 = triplon_slice(s, wf, u, 0);
  pr.f_b = k6 * e0.block(0, 0, nc, nc);
  pr.f_bba = k18 * e0.block(0, nc, nc, ns);
  pr.f_baa = k18 * e0.block(nc, nc, ns, ns);
  for (int n = 0; n < s.z; ++n) pr.f_a.push_back(k6 * triplon_slice(s, wf, u, nc + n).block(nc, nc, ns, ns));
  return pr;
}

}  // namespace qpbs
