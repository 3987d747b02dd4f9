#pragma once

// Two excitations on two emitters. Brackets are pole sums over the bright
// single-excitation levels of a finite ring; existence of the upper doublon
// poles is decided on the continuum bracket at the single-excitation edge.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

#include "qpbs/bath_core.hpp"
#include "qpbs/error.hpp"
#include "qpbs/roots.hpp"
#include "qpbs/single_excitation.hpp"

namespace qpbs {

inline constexpr std::size_t kDefaultPairRing = 1024;

// B(w) = sum_i w_i / (w - p_i) with w_i > 0 and p sorted.
struct PoleSum {
  std::vector<double> pole;
  std::vector<double> weight;

  double operator()(double w) const {
    double s = 0.0;
    for (std::size_t i = 0; i < pole.size(); ++i) s += weight[i] / (w - pole[i]);
    return s;
  }
  double slope(double w) const {
    double s = 0.0;
    for (std::size_t i = 0; i < pole.size(); ++i) {
      const double t = w - pole[i];
      s -= weight[i] / (t * t);
    }
    return s;
  }
  // Index of the first pole strictly above x.
  std::size_t above(double x) const {
    return static_cast<std::size_t>(std::upper_bound(pole.begin(), pole.end(), x) - pole.begin());
  }
  // The unique zero between pole i and pole i+1 (B runs from +inf to -inf there).
  double root_after(std::size_t i) const {
    require(i + 1 < pole.size(), "no pole above the requested interval");
    const double inf = std::numeric_limits<double>::infinity();
    return roots::bisect(*this, pole[i], pole[i + 1], inf, -inf);
  }
};

namespace detail {

// Two-particle poles of channel s from the ring levels of both parity channels.
inline PoleSum pair_pole_sum(const TwoQeBoundStates& st, int s) {
  std::vector<std::pair<double, double>> terms;
  const auto& lp = st.levels_plus;
  const auto& lm = st.levels_minus;
  if (s > 0) {
    for (const auto* lev : {&lp, &lm})
      for (std::size_t a = 0; a < lev->size(); ++a)
        for (std::size_t b = a; b < lev->size(); ++b) {
          const double w = (a == b ? 0.5 : 1.0) * (*lev)[a].weight * (*lev)[b].weight;
          terms.emplace_back((*lev)[a].energy + (*lev)[b].energy, w);
        }
  } else {
    for (const auto& a : lp)
      for (const auto& b : lm) terms.emplace_back(a.energy + b.energy, a.weight * b.weight);
  }
  std::sort(terms.begin(), terms.end());
  PoleSum p;
  p.pole.reserve(terms.size());
  p.weight.reserve(terms.size());
  for (const auto& [e, w] : terms) {
    if (!p.pole.empty() && e == p.pole.back()) {
      p.weight.back() += w;
      continue;
    }
    p.pole.push_back(e);
    p.weight.push_back(w);
  }
  return p;
}

// Emitter propagator 1/F_sigma of the continuum channel, real outside the band.
inline double channel_g(const BathSpec& bath, const CouplingSpec& cp, int d, int sigma, double x) {
  return 1.0 / channel_f(bath, cp, d, sigma, x);
}

// rho_sigma(E) dE/dth inside the band, E = 4J sin^2(th/2). Written with
// A = 2J sin th multiplied through so both band edges stay finite.
inline double channel_rho_dtheta(const CouplingSpec& cp, double J, int d, int sigma, double th) {
  const double e = 4.0 * J * std::sin(0.5 * th) * std::sin(0.5 * th);
  const double a = 2.0 * J * std::sin(th);
  const cplx den = a * (e - cp.delta) + cplx(0.0, cp.omega * cp.omega) * (1.0 + static_cast<double>(sigma) * std::polar(1.0, th * d));
  return -(a * a / den).imag() / kPi;
}

inline constexpr double kEdgePoleWindow = 1e-6;

// Continuum bracket B_s in the limit w -> E_{1+} from below.
inline double continuum_bracket_at_edge(const TwoQeBoundStates& inf, int s) {
  require(inf.bath.continuum(), "continuum bracket needs an infinite bath");
  require(inf.e_plus.has_value(), "no symmetric bound state");
  const auto& bath = inf.bath;
  const auto& cp = inf.coupling;
  const int d = inf.d;
  const double w = *inf.e_plus;
  const double z1 = inf.levels_plus.front().weight;
  const double J = bath.J;
  double total = 0.0;
  for (int sigma : {+1, -1}) {
    const int t = s * sigma;
    for (const auto& b : inf.levels(sigma)) {
      if (sigma > 0 && b.energy == w) {
        // G_t(0^-): zero for t = +, finite for t = -
        if (t < 0) total += b.weight / (cp.omega * cp.omega * d / (2.0 * J) - cp.delta);
        continue;
      }
      total += b.weight * channel_g(bath, cp, d, t, w - b.energy);
    }
    auto f = [&](double th) {
      const double e = 4.0 * J * std::sin(0.5 * th) * std::sin(0.5 * th);
      // next to the pole of G_+ at E = 0 only the pole term survives
      const double g = (t > 0 && e < kEdgePoleWindow * J) ? -z1 / e : channel_g(bath, cp, d, t, w - e);
      return channel_rho_dtheta(cp, J, d, sigma, th) * g;
    };
    // split where the pole form takes over so neither piece sees the switch
    const double th_c = 2.0 * std::asin(std::sqrt(kEdgePoleWindow / 4.0));
    using gk = boost::math::quadrature::gauss_kronrod<double, 61>;
    total += gk::integrate(f, 0.0, th_c, 10, 1e-10) + gk::integrate(f, th_c, kPi, 15, 1e-10);
  }
  return 0.5 * total;
}

}  // namespace detail

// T_s(w) = -1 / B_s(w) from the ring data in `single`.
inline double channel_t(const TwoQeBoundStates& single, int s, double w) {
  require(!single.bath.continuum(), "channel_t needs ring levels");
  const auto p = detail::pair_pole_sum(single, s);
  for (double e : p.pole)
    if (e == w) throw Error(Errc::pole_hit, "evaluated at a two-particle pole");
  return -1.0 / p(w);
}

inline double channel_t(const BathSpec& bath, const CouplingSpec& cp, int d, int s, double w) {
  return channel_t(solve_two_qe(bath, cp, d), s, w);
}

struct PairSpectrum {
  BathSpec bath;  // ring used for the pole sums
  CouplingSpec coupling;
  int d = 1;
  TwoQeBoundStates single;     // ring levels
  TwoQeBoundStates continuum;  // infinite-bath bound levels

  double e_ground = 0.0;
  std::optional<double> e_doublon_plus, e_doublon_minus;
  // Roots in the doublon windows, whether or not the pole survives in the continuum.
  std::optional<double> window_plus, window_minus;
  double edge_bracket_plus = 0.0, edge_bracket_minus = 0.0;

  PoleSum bracket_plus, bracket_minus;
  const PoleSum& bracket(int s) const { return s > 0 ? bracket_plus : bracket_minus; }
};

inline PairSpectrum solve_pair_poles(const BathSpec& bath, const CouplingSpec& cp, int d) {
  bath.validate();
  cp.validate();
  require(cp.omega > 0.0, "solve_pair_poles needs Omega > 0");
  PairSpectrum r;
  r.bath = bath.continuum() ? BathSpec::ring(bath.J, kDefaultPairRing) : bath;
  r.coupling = cp;
  r.d = d;
  r.single = solve_two_qe(r.bath, cp, d);
  r.continuum = solve_two_qe(BathSpec::infinite(bath.J), cp, d);
  r.bracket_plus = detail::pair_pole_sum(r.single, +1);
  r.bracket_minus = detail::pair_pole_sum(r.single, -1);

  const auto& bp = r.bracket_plus;
  r.e_ground = bp.root_after(0);

  const auto& lp = r.single.levels_plus;
  const auto& lm = r.single.levels_minus;
  const double e1p = lp.front().energy;
  const double e1m = lm.front().energy;
  if (2.0 * e1m < e1p) {
    const std::size_t i = bp.above(2.0 * e1m) - 1;
    if (i + 1 < bp.pole.size()) r.window_plus = bp.root_after(i);
  }
  {
    const auto& bm = r.bracket_minus;
    const std::size_t i = bm.above(e1p + e1m) - 1;
    if (i + 1 < bm.pole.size()) r.window_minus = bm.root_after(i);
  }

  r.edge_bracket_plus = detail::continuum_bracket_at_edge(r.continuum, +1);
  r.edge_bracket_minus = detail::continuum_bracket_at_edge(r.continuum, -1);
  const auto& c = r.continuum;
  // T_s(E_{1+}) > 0  <=>  B_s(E_{1+}^-) < 0
  if (c.exists_minus && 2.0 * *c.e_minus < *c.e_plus && r.edge_bracket_plus < 0.0 && r.window_plus)
    r.e_doublon_plus = r.window_plus;
  if (c.exists_minus && r.edge_bracket_minus < 0.0 && r.window_minus) r.e_doublon_minus = r.window_minus;
  return r;
}

enum class PairPole { ground, doublon_plus, doublon_minus };

// Bound pair state in the bright single-excitation eigenbasis:
//   |Psi> = sum_{ab} W_ab beta_a^+ beta_b^+ |0>.
struct PairState {
  PairPole which = PairPole::ground;
  int s = 1;
  double energy = 0.0;
  double z0 = 0.0;  // pole residue of T_s

  std::vector<double> e;      // bright levels, plus channel first
  std::vector<double> z;      // their emitter weights
  std::vector<int> sigma;     // parity channel
  Eigen::MatrixXd w;

  // Emitter amplitudes u_j of each level.
  double u(int j, std::size_t a) const { return (j == 0 ? 1.0 : sigma[a]) * std::sqrt(0.5 * z[a]); }
  // Probability of both emitters excited.
  double z2() const {
    double phi12 = 0.0;
    for (std::size_t a = 0; a < e.size(); ++a)
      for (std::size_t b = 0; b < e.size(); ++b) phi12 += u(0, a) * w(static_cast<long>(a), static_cast<long>(b)) * u(1, b);
    return 4.0 * phi12 * phi12;
  }
  // Same quantity from the closed residue formula.
  double z2_closed() const {
    double acc = 0.0;
    for (std::size_t a = 0; a < e.size(); ++a)
      for (std::size_t b = 0; b < e.size(); ++b)
        if (sigma[b] == s * sigma[a]) acc += sigma[a] * z[a] * z[b] / (energy - e[a] - e[b]);
    return 0.25 * z0 * acc * acc;
  }
  double norm() const { return 2.0 * w.squaredNorm(); }
};

inline PairState pair_state(const PairSpectrum& sp, PairPole which) {
  PairState st;
  st.which = which;
  st.s = which == PairPole::doublon_minus ? -1 : 1;
  switch (which) {
    case PairPole::ground:
      st.energy = sp.e_ground;
      break;
    case PairPole::doublon_plus:
      if (!sp.e_doublon_plus) throw Error(Errc::invalid_argument, "symmetric doublon pole absent");
      st.energy = *sp.e_doublon_plus;
      break;
    case PairPole::doublon_minus:
      if (!sp.e_doublon_minus) throw Error(Errc::invalid_argument, "anti-symmetric doublon pole absent");
      st.energy = *sp.e_doublon_minus;
      break;
  }
  for (int sg : {+1, -1})
    for (const auto& l : sp.single.levels(sg)) {
      st.e.push_back(l.energy);
      st.z.push_back(l.weight);
      st.sigma.push_back(sg);
    }
  const std::size_t n = st.e.size();
  st.w = Eigen::MatrixXd::Zero(static_cast<long>(n), static_cast<long>(n));
  double inv_z0 = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      if (st.sigma[b] != st.s * st.sigma[a]) continue;
      const double h = st.energy - st.e[a] - st.e[b];
      inv_z0 += 0.5 * st.z[a] * st.z[b] / (h * h);
    }
  st.z0 = 1.0 / inv_z0;
  // C sum_j c_j u_ja u_jb / h_ab with c = (1, s)/sqrt 2 and C^2 = Z_0 / 2
  const double c = std::sqrt(0.5 * st.z0) / std::sqrt(2.0);
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = 0; b < n; ++b) {
      const double h = st.energy - st.e[a] - st.e[b];
      st.w(static_cast<long>(a), static_cast<long>(b)) = c * (st.u(0, a) * st.u(0, b) + st.s * st.u(1, a) * st.u(1, b)) / h;
    }
  return st;
}

// Real-space single-excitation eigenvectors of the bright levels. Rows are
// modes (emitter 1, emitter 2, photon sites 0..N-1).
inline Eigen::MatrixXd pair_level_vectors(const PairSpectrum& sp, const PairState& st) {
  const std::size_t n = sp.bath.modes;
  const std::size_t nl = st.e.size();
  Eigen::MatrixXd v(static_cast<long>(n + 2), static_cast<long>(nl));
  const double om = sp.coupling.omega;
  for (std::size_t a = 0; a < nl; ++a) {
    const auto g = ring_resolvent_profile(sp.bath.J, n, st.e[a]);
    const double u1 = st.u(0, a);
    const double u2 = st.u(1, a);
    v(0, static_cast<long>(a)) = u1;
    v(1, static_cast<long>(a)) = u2;
    for (std::size_t m = 0; m < n; ++m) {
      const std::size_t r2 = (m + n - static_cast<std::size_t>(sp.d) % n) % n;
      v(static_cast<long>(m + 2), static_cast<long>(a)) = om * (u1 * g[m] + u2 * g[r2]);
    }
  }
  return v;
}

struct PairWavefunctions {
  double energy = 0.0;
  int s = 1;
  double z2 = 0.0;
  double z2_closed = 0.0;
  Eigen::MatrixXd phi1;  // 2 x N: emitter j excited, photon at n
  Eigen::MatrixXd phi2;  // N x N, symmetric
  double norm = 0.0;     // z2 + |phi1|^2 + |phi2|^2
  Eigen::MatrixXd amplitude;  // full mode matrix Phi, psi = sum Phi_ab m_a^+ m_b^+
};

inline constexpr double kDegenerateResidue = 1e-9;

inline PairWavefunctions pair_wavefunctions(const PairSpectrum& sp, PairPole which) {
  const auto st = pair_state(sp, which);
  const std::size_t n = sp.bath.modes;
  const double J = sp.bath.J;
  double hmin = std::numeric_limits<double>::infinity();
  for (double a : st.e)
    for (double b : st.e) hmin = std::min(hmin, std::abs(st.energy - a - b));
  std::vector<double> eps(n);
  for (std::size_t k = 0; k < n; ++k) eps[k] = dispersion(J, 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n));
  for (double ek : eps) {
    for (double a : st.e) hmin = std::min(hmin, std::abs(st.energy - ek - a));
    for (double ek2 : eps) hmin = std::min(hmin, std::abs(st.energy - ek - ek2));
  }
  if (hmin < kDegenerateResidue * J) throw Error(Errc::degenerate_residue, "pole within 1e-9 of a denominator");

  const auto v = pair_level_vectors(sp, st);
  PairWavefunctions out;
  out.energy = st.energy;
  out.s = st.s;
  out.amplitude = v * st.w * v.transpose();
  const auto& phi = out.amplitude;
  out.z2 = 4.0 * phi(0, 1) * phi(0, 1);
  out.z2_closed = st.z2_closed();
  out.phi1 = 2.0 * phi.block(0, 2, 2, static_cast<long>(n));
  out.phi2 = std::sqrt(2.0) * phi.block(2, 2, static_cast<long>(n), static_cast<long>(n));
  out.norm = out.z2 + out.phi1.squaredNorm() + out.phi2.squaredNorm();
  return out;
}

struct DoublonHopping {
  double mu = 0.0;
  double t = 0.0;
};

inline DoublonHopping doublon_hopping_two_qe(const PairSpectrum& sp) {
  if (!sp.e_doublon_plus || !sp.e_doublon_minus) throw Error(Errc::incomplete_pair, "doublon pair incomplete");
  return {0.5 * (*sp.e_doublon_plus + *sp.e_doublon_minus), 0.5 * (*sp.e_doublon_plus - *sp.e_doublon_minus)};
}

// Weight of beta_+^2 / sqrt2 and beta_-^2 / sqrt2 in a pair state. Only the
// symmetric mode counts when the anti-symmetric bound state is absent.
inline double pair_mode_weight(const PairSpectrum& sp, const PairState& st) {
  const std::size_t ip = 0;
  const std::size_t im = sp.single.levels_plus.size();
  const double wp = st.w(static_cast<long>(ip), static_cast<long>(ip));
  double p = 2.0 * wp * wp;
  if (sp.continuum.exists_minus) {
    const double wm = st.w(static_cast<long>(im), static_cast<long>(im));
    p += 2.0 * wm * wm;
  }
  return p;
}

struct VariationalState {
  double v_plus = 0.0, v_minus = 0.0;
  double e_plus = 0.0, e_minus = 0.0;
  double energy = 0.0;         // printed closed form
  double energy_direct = 0.0;  // <Psi|H|Psi> from the real-space state
  double overlap_pv = 0.0;     // |<Psi_v|Psi_G>|^2
  double p_plus = 0.0, p_minus = 0.0;
  double p = 0.0;              // beta_sigma^2 weight of the exact ground state
  double n_plus = 0.0, n_minus = 0.0, n2 = 0.0;
  bool symmetric_only = false;
  int sweeps = 0;
};

namespace detail {

inline constexpr double kVarEmin = -40.0;
inline constexpr double kVarEmax = -1e-9;

inline double logistic_energy(double t, double J) {
  const double lo = kVarEmin * J;
  const double hi = kVarEmax * J;
  return hi + (lo - hi) / (1.0 + std::exp(-t));
}

inline double logistic_inverse(double e, double J) {
  const double lo = kVarEmin * J;
  const double hi = kVarEmax * J;
  const double f = std::clamp((e - hi) / (lo - hi), 1e-12, 1.0 - 1e-12);
  return std::log(f / (1.0 - f));
}

// I_sigma(e) and N_sigma(e) = -dI/de.
inline std::pair<double, double> var_sums(const BathSpec& bath, int d, int sigma, double e) {
  const auto g0 = lattice_resolvent(bath, e, 0);
  const auto gd = lattice_resolvent(bath, e, d);
  return {g0.value.real() + sigma * gd.value.real(), -(g0.derivative.real() + sigma * gd.derivative.real())};
}

inline double variational_energy(const BathSpec& bath, const CouplingSpec& cp, int d, const double* v, const double* e) {
  double num = 2.0 * cp.delta;
  double n2 = 0.0;
  for (int i = 0; i < 2; ++i) {
    const int sigma = i == 0 ? 1 : -1;
    const auto [is, ns] = var_sums(bath, d, sigma, e[i]);
    const double vv = v[i] * v[i];
    const double rn = 1.0 / std::sqrt(ns);
    num += cp.delta * vv + vv * (1.0 + vv) * e[i] + rn * v[i] * (1.0 + vv) * (2.0 * cp.omega - v[i] * rn) * is;
    n2 += 0.5 * (1.0 + vv) * (1.0 + vv);
  }
  return num / n2;
}

// Real-space mode vector of gamma_sigma^+ (emitters, then photon sites).
inline Eigen::VectorXd gamma_vector(const BathSpec& ring, int d, int sigma, double v, double e) {
  const std::size_t n = ring.modes;
  const auto g = ring_resolvent_profile(ring.J, n, e);
  const auto [is, ns] = var_sums(ring, d, sigma, e);
  (void)is;
  Eigen::VectorXd out(static_cast<long>(n + 2));
  out(0) = 1.0 / std::sqrt(2.0);
  out(1) = sigma / std::sqrt(2.0);
  const double norm = 1.0 / std::sqrt(2.0 * ns);
  for (std::size_t m = 0; m < n; ++m) {
    const std::size_t r2 = (m + n - static_cast<std::size_t>(d) % n) % n;
    out(static_cast<long>(m + 2)) = v * norm * (g[m] + sigma * g[r2]);
  }
  return out;
}

// <g|h|g> for the single-excitation Hamiltonian on the ring.
inline double mode_energy(const BathSpec& ring, const CouplingSpec& cp, int d, const Eigen::VectorXd& g) {
  const std::size_t n = ring.modes;
  const double J = ring.J;
  double e = cp.delta * (g(0) * g(0) + g(1) * g(1));
  for (std::size_t m = 0; m < n; ++m) {
    const double a = g(static_cast<long>(m + 2));
    const double b = g(static_cast<long>((m + 1) % n + 2));
    e += 2.0 * J * a * a - 2.0 * J * a * b;
  }
  e += 2.0 * cp.omega * (g(0) * g(2) + g(1) * g(static_cast<long>(static_cast<std::size_t>(d) % n + 2)));
  return e;
}

}  // namespace detail

inline constexpr int kVariationalMaxSweeps = 4000;
inline constexpr double kVariationalTol = 1e-10;

inline VariationalState variational_ground_state(const BathSpec& bath, const CouplingSpec& cp, int d) {
  bath.validate();
  cp.validate();
  require(cp.omega > 0.0, "variational_ground_state needs Omega > 0");
  const double J = bath.J;
  const BathSpec ring = bath.continuum() ? BathSpec::ring(J, kDefaultPairRing) : bath;

  // x = (v+, v-, t+, t-)
  auto energy = [&](const std::array<double, 4>& x) {
    const double v[2] = {x[0], x[1]};
    const double e[2] = {detail::logistic_energy(x[2], J), detail::logistic_energy(x[3], J)};
    return detail::variational_energy(ring, cp, d, v, e);
  };

  const auto single = solve_two_qe(ring, cp, d);
  auto seed_e = [&](int sigma) {
    const auto& l = single.levels(sigma);
    const double e = l.front().energy;
    return detail::logistic_inverse(e < -1e-6 * J ? e : -1e-3 * J, J);
  };
  const double markov = cp.delta != 0.0 ? cp.omega / std::abs(cp.delta) : cp.omega / J;

  std::array<double, 4> best{};
  double best_e = std::numeric_limits<double>::infinity();
  int best_sweeps = 0;
  bool converged_any = false;
  for (double v0 : {markov, 1.0, 5.0}) {
    std::array<double, 4> x = {v0, v0, seed_e(+1), seed_e(-1)};
    double cur = energy(x);
    double width = 2.0;
    int sweep = 0;
    bool converged = false;
    for (; sweep < kVariationalMaxSweeps; ++sweep) {
      const double before = cur;
      for (int i = 0; i < 4; ++i) {
        auto line = [&](double y) {
          auto t = x;
          t[static_cast<std::size_t>(i)] = y;
          return energy(t);
        };
        const double xi = x[static_cast<std::size_t>(i)];
        const auto r = boost::math::tools::brent_find_minima(line, xi - width, xi + width, 52);
        if (r.second < cur) {
          x[static_cast<std::size_t>(i)] = r.first;
          cur = r.second;
        }
      }
      if (before - cur < kVariationalTol * J) {
        if (width < 1e-4) {
          converged = true;
          break;
        }
        width *= 0.5;
      } else {
        width = std::min(2.0 * width, 4.0);
      }
    }
    converged_any = converged_any || converged;
    if (cur < best_e) {
      best_e = cur;
      best = x;
      best_sweeps = sweep;
    }
  }
  if (!converged_any) throw Error(Errc::not_converged, "optimizer did not converge");

  VariationalState out;
  out.v_plus = best[0];
  out.v_minus = best[1];
  out.e_plus = detail::logistic_energy(best[2], J);
  out.e_minus = detail::logistic_energy(best[3], J);
  out.energy = best_e;
  out.sweeps = best_sweeps;
  out.n_plus = detail::var_sums(ring, d, +1, out.e_plus).second;
  out.n_minus = detail::var_sums(ring, d, -1, out.e_minus).second;
  out.n2 = 0.5 * (std::pow(1.0 + out.v_plus * out.v_plus, 2) + std::pow(1.0 + out.v_minus * out.v_minus, 2));

  const auto gp = detail::gamma_vector(ring, d, +1, out.v_plus, out.e_plus);
  const auto gm = detail::gamma_vector(ring, d, -1, out.v_minus, out.e_minus);
  out.energy_direct = ((1.0 + out.v_plus * out.v_plus) * detail::mode_energy(ring, cp, d, gp) +
                       (1.0 + out.v_minus * out.v_minus) * detail::mode_energy(ring, cp, d, gm)) /
                      out.n2;

  const auto sp = solve_pair_poles(ring, cp, d);
  const auto st = pair_state(sp, PairPole::ground);
  const auto vec = pair_level_vectors(sp, st);
  // <Psi_v|Psi_G> = 2 tr(Phi_v Phi_G), Phi_v = (g+ g+^T - g- g-^T) / (2 sqrt N2)
  const Eigen::VectorXd ap = vec.transpose() * gp;
  const Eigen::VectorXd am = vec.transpose() * gm;
  const double ov = (ap.dot(st.w * ap) - am.dot(st.w * am)) / std::sqrt(out.n2);
  out.overlap_pv = ov * ov;

  out.symmetric_only = !sp.continuum.exists_minus;
  out.p = pair_mode_weight(sp, st);
  // overlap of the normalized deformed modes with the bare bound states
  const std::size_t im = sp.single.levels_plus.size();
  out.p_plus = std::abs(vec.col(0).dot(gp)) / std::sqrt(1.0 + out.v_plus * out.v_plus);
  out.p_minus = std::abs(vec.col(static_cast<long>(im)).dot(gm)) / std::sqrt(1.0 + out.v_minus * out.v_minus);
  return out;
}

struct SpinModel {
  double t_eff = 0.0;
  double j_z = 0.0;
  double e_ground = 0.0;
  double e0 = 0.0;
};

inline SpinModel spin_model_parameters(const PairSpectrum& sp, const TwoQeBoundStates& single) {
  const auto h = effective_hopping_two_qe(single);
  return {h.t, sp.e_ground - 2.0 * h.e0, sp.e_ground, h.e0};
}

}  // namespace qpbs
