#pragma once

// One excitation: two emitters at distance d (symmetric / anti-symmetric
// channels) and the periodic emitter array (polariton bands, Wannier hoppings).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qpbs/bath_core.hpp"
#include "qpbs/error.hpp"
#include "qpbs/roots.hpp"

namespace qpbs {

// One eigenstate of a parity channel: energy and emitter weight Z^sigma.
struct ChannelLevel {
  double energy = 0.0;
  double weight = 0.0;
};

struct TwoQeBoundStates {
  BathSpec bath;
  CouplingSpec coupling;
  int d = 1;

  std::optional<double> e_plus, e_minus;  // below-band roots
  double u_plus = 0.0, u_minus = 0.0;     // emitter amplitudes, u^2 = weight
  bool exists_minus = false;

  std::optional<double> e_plus_above, e_minus_above;  // above-band roots

  // Full channel spectra with emitter weights. On a ring these are all
  // bright eigenstates of the channel (sum of weights = 1); in the continuum
  // only the discrete bound states are listed.
  std::vector<ChannelLevel> levels_plus, levels_minus;

  const std::vector<ChannelLevel>& levels(int sigma) const { return sigma > 0 ? levels_plus : levels_minus; }
};

namespace detail {

// Secular function of one parity channel on a ring, written over the distinct
// bright photon energies:  F(w) = w - Delta - sum_m c_m / (w - e_m).
struct ChannelPoles {
  double delta = 0.0;
  std::vector<double> e;
  std::vector<double> c;

  double operator()(double w) const {
    double s = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) s += c[i] / (w - e[i]);
    return w - delta - s;
  }
  double slope(double w) const {
    double s = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i) {
      const double t = w - e[i];
      s += c[i] / (t * t);
    }
    return 1.0 + s;
  }
};

inline ChannelPoles channel_poles(const BathSpec& bath, const CouplingSpec& cp, int d, int sigma) {
  ChannelPoles p;
  p.delta = cp.delta;
  const std::size_t n = bath.modes;
  const double w2 = cp.omega * cp.omega / static_cast<double>(n);
  for (std::size_t m = 0; m <= n / 2; ++m) {
    const double k = 2.0 * kPi * static_cast<double>(m) / static_cast<double>(n);
    const double mult = (m == 0 || 2 * m == n) ? 1.0 : 2.0;
    const double c = w2 * mult * (1.0 + sigma * std::cos(k * d));
    if (c <= 1e-13 * w2) continue;  // dark in this channel
    p.e.push_back(dispersion(bath.J, k));
    p.c.push_back(c);
  }
  // dispersion is increasing in m on [0, pi]
  return p;
}

// Lower and upper brackets where F is certainly negative / positive.
inline double outer_span(const CouplingSpec& cp, double J) {
  return std::max(40.0 * J, 2.0 * (std::abs(cp.delta) + 2.0 * cp.omega + J));
}

// All roots of a channel secular function (one per gap between bright poles
// plus one on each side).
inline std::vector<ChannelLevel> channel_spectrum(const ChannelPoles& p, double J, double span) {
  std::vector<ChannelLevel> out;
  const double inf = std::numeric_limits<double>::infinity();
  auto push = [&](double w) { out.push_back({w, 1.0 / p.slope(w)}); };
  if (p.e.empty()) {
    push(p.delta);
    return out;
  }
  double lo = p.e.front() - span;
  while (p(lo) >= 0.0) lo -= span;
  push(roots::bisect(p, lo, p.e.front(), p(lo), inf));
  for (std::size_t i = 0; i + 1 < p.e.size(); ++i) push(roots::bisect(p, p.e[i], p.e[i + 1], -inf, inf));
  double hi = p.e.back() + span;
  while (p(hi) <= 0.0) hi += span;
  push(roots::bisect(p, p.e.back(), hi, -inf, p(hi)));
  (void)J;
  return out;
}

// Continuum channel function F(w) = w - Delta - Omega^2 (g_0 + sigma g_d) and
// its derivative, off the band.
inline double channel_f(const BathSpec& bath, const CouplingSpec& cp, int d, int sigma, double w) {
  const auto g0 = lattice_resolvent(bath, w, 0);
  const auto gd = lattice_resolvent(bath, w, d);
  return w - cp.delta - cp.omega * cp.omega * (g0.value.real() + sigma * gd.value.real());
}

inline double channel_f_slope(const BathSpec& bath, const CouplingSpec& cp, int d, int sigma, double w) {
  const auto g0 = lattice_resolvent(bath, w, 0);
  const auto gd = lattice_resolvent(bath, w, d);
  return 1.0 - cp.omega * cp.omega * (g0.derivative.real() + sigma * gd.derivative.real());
}

inline constexpr int kScanProbes = 400;
inline constexpr double kEdgeProbe = 1e-12;
inline constexpr double kMergedMargin = 1e-10;

inline std::optional<double> continuum_root_below(const BathSpec& bath, const CouplingSpec& cp, int d, int sigma) {
  const double J = bath.J;
  auto f = [&](double w) { return channel_f(bath, cp, d, sigma, w); };
  double span = outer_span(cp, J);
  while (f(-span) >= 0.0) span *= 2.0;
  auto probes = roots::log_probes_below(0.0, span, kEdgeProbe * J, kScanProbes);
  auto r = roots::first_sign_change(f, probes);
  if (!r || *r > -kMergedMargin * J) return std::nullopt;
  return r;
}

inline std::optional<double> continuum_root_above(const BathSpec& bath, const CouplingSpec& cp, int d, int sigma) {
  const double J = bath.J;
  auto f = [&](double w) { return channel_f(bath, cp, d, sigma, w); };
  double span = outer_span(cp, J);
  while (f(4.0 * J + span) <= 0.0) span *= 2.0;
  auto probes = roots::log_probes_above(4.0 * J, span, kEdgeProbe * J, kScanProbes);
  auto r = roots::first_sign_change(f, probes);
  if (!r || *r < 4.0 * J + kMergedMargin * J) return std::nullopt;
  return r;
}

}  // namespace detail

// Symmetric / anti-symmetric single-excitation states of two emitters at
// distance d. Works on a ring (exact channel spectra) or in the continuum.
inline TwoQeBoundStates solve_two_qe(const BathSpec& bath, const CouplingSpec& coupling, int d) {
  bath.validate();
  coupling.validate();
  require(coupling.omega > 0.0, "solve_two_qe needs Omega > 0");
  require(d >= 1, "distance must be positive");
  require(bath.continuum() || static_cast<std::size_t>(d) < bath.modes, "distance exceeds ring size");
  TwoQeBoundStates s;
  s.bath = bath;
  s.coupling = coupling;
  s.d = d;
  const double J = bath.J;
  const double edge = detail::kMergedMargin * J;

  if (!bath.continuum()) {
    const double span = detail::outer_span(coupling, J);
    for (int sigma : {+1, -1}) {
      auto lev = detail::channel_spectrum(detail::channel_poles(bath, coupling, d, sigma), J, span);
      (sigma > 0 ? s.levels_plus : s.levels_minus) = lev;
    }
    auto pick = [&](const std::vector<ChannelLevel>& lev, std::optional<double>& e, double& u,
                    std::optional<double>& above) {
      if (!lev.empty() && lev.front().energy < -edge) {
        e = lev.front().energy;
        u = std::sqrt(lev.front().weight);
      }
      if (!lev.empty() && lev.back().energy > 4.0 * J + edge) above = lev.back().energy;
    };
    pick(s.levels_plus, s.e_plus, s.u_plus, s.e_plus_above);
    pick(s.levels_minus, s.e_minus, s.u_minus, s.e_minus_above);
  } else {
    for (int sigma : {+1, -1}) {
      auto& e = sigma > 0 ? s.e_plus : s.e_minus;
      auto& u = sigma > 0 ? s.u_plus : s.u_minus;
      auto& above = sigma > 0 ? s.e_plus_above : s.e_minus_above;
      auto& lev = sigma > 0 ? s.levels_plus : s.levels_minus;
      e = detail::continuum_root_below(bath, coupling, d, sigma);
      if (e) {
        const double w = 1.0 / detail::channel_f_slope(bath, coupling, d, sigma, *e);
        u = std::sqrt(w);
        lev.push_back({*e, w});
      }
      above = detail::continuum_root_above(bath, coupling, d, sigma);
      if (above) lev.push_back({*above, 1.0 / detail::channel_f_slope(bath, coupling, d, sigma, *above)});
    }
  }
  s.exists_minus = s.e_minus.has_value();
  if (!s.e_plus && coupling.delta < 0.0) throw Error(Errc::no_symmetric_root, "Delta < 0");
  return s;
}

struct HoppingPair {
  double e0 = 0.0;
  double t = 0.0;
};

// E_0 = (E_+ + E_-)/2, t_eff = (E_+ - E_-)/2.
inline HoppingPair effective_hopping_two_qe(const TwoQeBoundStates& s) {
  if (!s.exists_minus || !s.e_minus) throw Error(Errc::merged_into_continuum);
  if (!s.e_plus) throw Error(Errc::no_symmetric_root);
  return {0.5 * (*s.e_plus + *s.e_minus), 0.5 * (*s.e_plus - *s.e_minus)};
}

// Arc-region diagnostic: the two bound states are well separated compared to
// their splitting.
inline bool is_arc_region(const HoppingPair& h, double ratio = 0.1) {
  return std::abs(h.t) < ratio * std::abs(h.e0);
}

struct MarkovianEstimate {
  double e1b = 0.0;   // single-emitter bound state
  double z1b = 0.0;   // its emitter weight
  double xi = 0.0;    // decay length in sites
  double t_eff = 0.0; // Z_1B Sigma_o(E_1B)
  double t_arc = 0.0; // -Z_1B Omega^2 e^{-d/xi} / sqrt(E(E-4J))
};

// Single-emitter bound state energy: root of w - Delta - Sigma_d(w) below the band.
inline std::optional<double> single_qe_bound_energy(const BathSpec& bath, const CouplingSpec& cp) {
  const double J = bath.J;
  auto f = [&](double w) { return w - cp.delta - self_energy_diag(bath, cp, w).value.real(); };
  double span = detail::outer_span(cp, J);
  while (f(-span) >= 0.0) span *= 2.0;
  if (cp.omega == 0.0) {
    if (cp.delta < 0.0) return cp.delta;
    return std::nullopt;
  }
  auto probes = roots::log_probes_below(0.0, span, detail::kEdgeProbe * J, detail::kScanProbes);
  auto r = roots::first_sign_change(f, probes);
  if (!r || *r > -detail::kMergedMargin * J) return std::nullopt;
  return r;
}

inline MarkovianEstimate markovian_teff_estimate(const BathSpec& bath, const CouplingSpec& cp, int d) {
  bath.validate();
  cp.validate();
  const auto e = single_qe_bound_energy(bath, cp);
  if (!e) throw Error(Errc::invalid_argument, "no single-emitter bound state below the band");
  MarkovianEstimate m;
  m.e1b = *e;
  const double w2 = cp.omega * cp.omega;
  const auto g0 = lattice_resolvent(bath, m.e1b, 0);
  m.z1b = 1.0 / (1.0 - w2 * g0.derivative.real());
  m.t_eff = m.z1b * w2 * lattice_resolvent(bath, m.e1b, d).value.real();
  const double x = detail::decaying_root(bath.J, m.e1b);
  m.xi = -1.0 / std::log(x);
  m.t_arc = -m.z1b * w2 * std::exp(-d / m.xi) / std::sqrt(m.e1b * (m.e1b - 4.0 * bath.J));
  return m;
}

// --------------------------------------------------------------------------
// Emitter array: one emitter on the first site of every z-site unit cell.

struct PolaritonSpectrum {
  double J = 1.0;
  double delta = 0.0;
  double omega = 0.0;
  int z = 1;
  std::size_t n_cells = 0;

  std::vector<double> momenta;             // P_m = 2 pi m / N_b
  std::vector<std::vector<double>> bands;  // [lambda][m]
  std::vector<std::vector<double>> weights;
  // Per m: columns are eigenvectors in the basis (emitter, photon k_0..k_{z-1}),
  // k_l = (P_m + 2 pi l) / z.
  std::vector<Eigen::MatrixXd> vectors;

  std::size_t n_bands() const { return bands.size(); }
  std::size_t wrap(long m) const {
    const long n = static_cast<long>(n_cells);
    return static_cast<std::size_t>(((m % n) + n) % n);
  }
  double energy(std::size_t lam, long m) const { return bands[lam][wrap(m)]; }
  double weight(std::size_t lam, long m) const { return weights[lam][wrap(m)]; }
  double bath_momentum(long m, int l) const {
    return 2.0 * kPi * (static_cast<double>(wrap(m)) + static_cast<double>(n_cells) * l) /
           (static_cast<double>(n_cells) * z);
  }
};

inline PolaritonSpectrum polariton_bands(const BathSpec& bath, const CouplingSpec& cp, std::size_t n_cells) {
  bath.validate();
  cp.validate();
  require(n_cells >= 1, "need at least one unit cell");
  const int z = bath.spacing;
  if (!bath.continuum())
    require(bath.modes == n_cells * static_cast<std::size_t>(z), "bath modes must equal z * N_b");
  PolaritonSpectrum s;
  s.J = bath.J;
  s.delta = cp.delta;
  s.omega = cp.omega;
  s.z = z;
  s.n_cells = n_cells;
  const std::size_t nb = static_cast<std::size_t>(z) + 1;
  s.bands.assign(nb, std::vector<double>(n_cells));
  s.weights.assign(nb, std::vector<double>(n_cells));
  s.vectors.resize(n_cells);
  const double g = cp.omega / std::sqrt(static_cast<double>(z));
  for (std::size_t m = 0; m < n_cells; ++m) {
    s.momenta.push_back(2.0 * kPi * static_cast<double>(m) / static_cast<double>(n_cells));
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<long>(nb), static_cast<long>(nb));
    h(0, 0) = cp.delta;
    for (int l = 0; l < z; ++l) {
      h(l + 1, l + 1) = dispersion(bath.J, s.bath_momentum(static_cast<long>(m), l));
      h(0, l + 1) = h(l + 1, 0) = g;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    Eigen::MatrixXd v = es.eigenvectors();
    for (long c = 0; c < v.cols(); ++c) {
      // fix the sign so the emitter component is non-negative
      if (v(0, c) < 0.0) v.col(c) *= -1.0;
      s.bands[static_cast<std::size_t>(c)][m] = es.eigenvalues()(c);
      s.weights[static_cast<std::size_t>(c)][m] = v(0, c) * v(0, c);
    }
    s.vectors[m] = v;
  }
  return s;
}

struct WannierHoppings {
  std::vector<double> t;  // t[l], l = 0..N_b/2
  double e0 = 0.0;

  double at(long l) const {
    const std::size_t a = static_cast<std::size_t>(l < 0 ? -l : l);
    return a < t.size() ? t[a] : 0.0;
  }
};

// Fourier coefficients of a band sampled on P_m = 2 pi m / N_b.
inline WannierHoppings band_fourier(const std::vector<double>& band) {
  const std::size_t n = band.size();
  require(n >= 1, "empty band");
  WannierHoppings w;
  for (std::size_t l = 0; l <= n / 2; ++l) {
    cplx s = 0.0;
    cplx sm = 0.0;
    for (std::size_t m = 0; m < n; ++m) {
      const double ph = 2.0 * kPi * static_cast<double>(m * l % n) / static_cast<double>(n);
      s += band[m] * std::polar(1.0, ph);
      sm += band[m] * std::polar(1.0, -ph);
    }
    s /= static_cast<double>(n);
    sm /= static_cast<double>(n);
    const double scale = 1e-10 * (1.0 + std::abs(s));
    if (std::abs(s - sm) > scale) throw Error(Errc::invalid_argument, "band is not parity symmetric");
    w.t.push_back(s.real());
  }
  w.e0 = w.t.front();
  return w;
}

inline WannierHoppings wannier_hoppings(const PolaritonSpectrum& s, std::size_t band = 0) {
  require(band < s.n_bands(), "band index out of range");
  if (band + 1 < s.n_bands()) {
    for (std::size_t m = 0; m < s.n_cells; ++m)
      if (s.bands[band + 1][m] - s.bands[band][m] < 1e-9 * s.J) throw Error(Errc::band_ambiguous);
  }
  if (band > 0) {
    for (std::size_t m = 0; m < s.n_cells; ++m)
      if (s.bands[band][m] - s.bands[band - 1][m] < 1e-9 * s.J) throw Error(Errc::band_ambiguous);
  }
  return band_fourier(s.bands[band]);
}

// Closed form of the photonic lowest-band hopping for a weakly coupled array
// with the emitter level above the folded band (l != 0).
inline double folded_band_hopping(double J, int z, long l) {
  const double d = z;
  const double ll = static_cast<double>(l);
  const double sgn = (l % 2 == 0) ? 1.0 : -1.0;
  return J * 2.0 * sgn * std::sin(kPi / d) / (kPi * d * (ll * ll - 1.0 / (d * d)));
}

}  // namespace qpbs
