#pragma once

// 1D tight-binding bath: dispersion, lattice Green functions and the emitter
// self-energies. Every quantity comes in two flavours: a finite ring of N modes
// (direct k-sums, needed wherever results are compared with exact
// diagonalization) and the N -> infinity continuum (closed contour results).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/trapezoidal.hpp>

#include "qpbs/error.hpp"

namespace qpbs {

using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr std::size_t kContinuum = 0;

// Bath dispersion and lattice geometry. `modes == kContinuum` selects N -> inf.
// `spacing` is the emitter distance d (two-emitter setting) or the number of
// bath sites per unit cell z (array setting).
struct BathSpec {
  double J = 1.0;
  std::size_t modes = kContinuum;
  int spacing = 1;

  bool continuum() const noexcept { return modes == kContinuum; }

  void validate() const {
    require(J > 0.0, "J must be positive");
    require(continuum() || modes >= 4, "bath needs at least 4 modes");
    require(spacing >= 1, "spacing must be a positive integer");
  }

  static BathSpec ring(double J, std::size_t n, int spacing = 1) {
    BathSpec b{J, n, spacing};
    b.validate();
    return b;
  }
  static BathSpec infinite(double J, int spacing = 1) {
    BathSpec b{J, kContinuum, spacing};
    b.validate();
    return b;
  }

  double band_min() const noexcept { return 0.0; }
  double band_max() const noexcept { return 4.0 * J; }
};

// Emitter detuning Delta and emitter-bath coupling Omega.
struct CouplingSpec {
  double delta = 0.0;
  double omega = 0.0;

  void validate() const { require(omega >= 0.0, "Omega must be non-negative"); }
};

enum class Branch { below_band, above_band, in_band_retarded };

inline const char* to_string(Branch b) noexcept {
  switch (b) {
    case Branch::below_band: return "below-band";
    case Branch::above_band: return "above-band";
    case Branch::in_band_retarded: return "in-band-retarded";
  }
  return "?";
}

struct SelfEnergyValue {
  cplx value;
  Branch branch = Branch::below_band;
};

inline double dispersion(const BathSpec& bath, double k) noexcept {
  return 2.0 * bath.J - 2.0 * bath.J * std::cos(k);
}

inline double dispersion(double J, double k) noexcept { return 2.0 * J - 2.0 * J * std::cos(k); }

// k_n = 2 pi n / N, n = 0..N-1.
inline std::vector<double> momentum_grid(std::size_t n) {
  std::vector<double> k(n);
  for (std::size_t i = 0; i < n; ++i) k[i] = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
  return k;
}

// Regulator used for retarded in-band values on a finite ring.
inline double retarded_eta(double J) noexcept { return 1e-8 * J; }

namespace detail {

inline Branch classify(double J, double omega, std::optional<Branch> request) {
  if (omega < 0.0) return Branch::below_band;
  if (omega > 4.0 * J) return Branch::above_band;
  if (!request || *request != Branch::in_band_retarded)
    throw Error(Errc::in_band_without_branch, "omega = " + std::to_string(omega));
  return Branch::in_band_retarded;
}

// Decaying root x of J x^2 + (omega - 2J) x + J = 0 for real omega outside the
// band; written through the large root so that it is free of cancellation.
inline double decaying_root(double J, double omega) {
  const double r = std::sqrt(omega * (omega - 4.0 * J));
  if (omega < 0.0) return 2.0 * J / (2.0 * J - omega + r);
  return 2.0 * J / (2.0 * J - omega - r);
}

inline double ipow(double x, int n) { return std::pow(x, static_cast<double>(n)); }

}  // namespace detail

// g(omega, d) = (1/N) sum_k e^{ikd} / (omega - eps_k) and its omega-derivative.
// For the continuum this is the contour result; on a ring it is the direct sum
// (with omega + i eta for a retarded in-band request).
struct Resolvent {
  cplx value;
  cplx derivative;
  Branch branch;
};

inline Resolvent lattice_resolvent(const BathSpec& bath, double omega, int d,
                                   std::optional<Branch> request = std::nullopt) {
  const double J = bath.J;
  const Branch br = detail::classify(J, omega, request);
  const int ad = d < 0 ? -d : d;
  if (!bath.continuum() && br != Branch::in_band_retarded) {
    // closed form of the ring sum: s (x^r + x^{N-r}) / (R (1 - x^N))
    const std::size_t n = bath.modes;
    const std::size_t r0 = static_cast<std::size_t>(ad) % n;
    const double nn = static_cast<double>(n);
    const double rr = static_cast<double>(r0);
    const double sg = br == Branch::below_band ? -1.0 : 1.0;
    const double R = std::sqrt(omega * (omega - 4.0 * J));
    const double x = detail::decaying_root(J, omega);
    const double dx = x * x / (J * (1.0 - x * x));
    const double dR = (omega - 2.0 * J) / R;
    const double xn = detail::ipow(x, static_cast<int>(n));
    const double xr = detail::ipow(x, static_cast<int>(r0));
    const double xnr = detail::ipow(x, static_cast<int>(n - r0));
    const double num = xr + xnr;
    const double den = R * (1.0 - xn);
    const double dnum = ((r0 > 0 ? rr * detail::ipow(x, static_cast<int>(r0) - 1) : 0.0) +
                         (nn - rr) * detail::ipow(x, static_cast<int>(n - r0) - 1)) * dx;
    const double dden = dR * (1.0 - xn) - R * nn * detail::ipow(x, static_cast<int>(n) - 1) * dx;
    return {sg * num / den, sg * (dnum * den - num * dden) / (den * den), br};
  }
  if (!bath.continuum()) {
    const cplx w = br == Branch::in_band_retarded ? cplx(omega, retarded_eta(J)) : cplx(omega, 0.0);
    cplx s = 0.0, ds = 0.0;
    const std::size_t n = bath.modes;
    for (std::size_t i = 0; i < n; ++i) {
      const double k = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n);
      const cplx inv = 1.0 / (w - dispersion(J, k));
      const cplx ph = ad == 0 ? cplx(1.0) : std::polar(1.0, k * ad);
      s += ph * inv;
      ds -= ph * inv * inv;
    }
    s /= static_cast<double>(n);
    ds /= static_cast<double>(n);
    if (br != Branch::in_band_retarded) {
      s.imag(0.0);
      ds.imag(0.0);
    }
    return {s, ds, br};
  }
  if (br == Branch::in_band_retarded) {
    // omega = 2J(1 - cos theta), theta in [0, pi].
    const double c = std::clamp((2.0 * J - omega) / (2.0 * J), -1.0, 1.0);
    const double th = std::acos(c);
    const double sn = std::sin(th);
    const cplx ph = std::polar(1.0, th * ad);
    const cplx g = cplx(0.0, -1.0) * ph / (2.0 * J * sn);
    // d theta / d omega = 1 / (2 J sin theta)
    const double dth = 1.0 / (2.0 * J * sn);
    const cplx dg = g * (cplx(0.0, ad) - std::cos(th) / sn) * dth;
    return {g, dg, br};
  }
  const double r = std::sqrt(omega * (omega - 4.0 * J));
  const double x = detail::decaying_root(J, omega);
  const double xd = detail::ipow(x, ad);
  if (br == Branch::below_band) {
    const double g = -xd / r;
    const double dg = -xd * (ad / (r * r) - (omega - 2.0 * J) / (r * r * r));
    return {g, dg, br};
  }
  const double g = xd / r;
  const double dg = -xd * (ad / (r * r) + (omega - 2.0 * J) / (r * r * r));
  return {g, dg, br};
}

// Sigma_d(omega) = (Omega^2/N) sum_k 1/(omega - eps_k).
inline SelfEnergyValue self_energy_diag(const BathSpec& bath, const CouplingSpec& coupling,
                                        double omega,
                                        std::optional<Branch> request = std::nullopt) {
  const auto g = lattice_resolvent(bath, omega, 0, request);
  return {coupling.omega * coupling.omega * g.value, g.branch};
}

// Sigma_o(omega) = (Omega^2/N) sum_k e^{ikd}/(omega - eps_k).
inline SelfEnergyValue self_energy_offdiag(const BathSpec& bath, const CouplingSpec& coupling,
                                           double omega, int d,
                                           std::optional<Branch> request = std::nullopt) {
  const auto g = lattice_resolvent(bath, omega, d, request);
  return {coupling.omega * coupling.omega * g.value, g.branch};
}

// Markovian dipole-dipole exchange for an in-gap detuning:
// V_dd = -(Omega^2/|Delta|) exp(-d/xi), xi = 1/ln(|Delta|/J).
inline double markovian_vdd(double J, double delta, double omega, int d) {
  if (!(delta < 0.0)) throw Error(Errc::invalid_argument, "markovian_vdd needs Delta < 0");
  const double a = std::abs(delta);
  return -(omega * omega / a) * std::pow(J / a, std::abs(d));
}

// Omega^2 int dk/2pi e^{ikd}/(Delta - eps_k) by periodic trapezoidal quadrature.
// The integrand is analytic and periodic for Delta outside the band, so the
// rule converges geometrically.
inline double vdd_quadrature(double J, double delta, double omega, int d, double tol = 1e-15) {
  if (!(delta < 0.0 || delta > 4.0 * J))
    throw Error(Errc::in_band_without_branch, "quadrature needs Delta outside the band");
  auto f = [&](double k) { return std::cos(k * d) / (delta - dispersion(J, k)); };
  const double v = boost::math::quadrature::trapezoidal(f, -kPi, kPi, tol) / (2.0 * kPi);
  return omega * omega * v;
}

// g(omega, r) for r = 0..N-1 on a ring of N sites, from the image sum of the
// continuum result. Valid for any real omega that is not a ring eigenvalue;
// in-band values are real (no regulator) since the ring spectrum is discrete.
inline std::vector<double> ring_resolvent_profile(double J, std::size_t n, double omega) {
  require(n >= 2, "ring needs at least 2 sites");
  std::vector<double> g(n);
  const double nn = static_cast<double>(n);
  if (omega < 0.0 || omega > 4.0 * J) {
    const double r = std::sqrt(omega * (omega - 4.0 * J));
    const double x = detail::decaying_root(J, omega);
    const double xn = std::pow(x, nn);
    const double s = omega < 0.0 ? -1.0 : 1.0;
    double xr = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double xnr = std::pow(x, nn - static_cast<double>(i));
      g[i] = s * (xr + xnr) / (r * (1.0 - xn));
      xr *= x;
    }
    return g;
  }
  // omega = 2J(1 - cos th); the half-angle forms keep th accurate at both edges.
  const double th = omega <= 2.0 * J ? 2.0 * std::asin(std::sqrt(omega / (4.0 * J)))
                                     : kPi - 2.0 * std::asin(std::sqrt((4.0 * J - omega) / (4.0 * J)));
  const double den = 2.0 * J * std::sin(th) * std::sin(th * nn / 2.0);
  if (den == 0.0) throw Error(Errc::pole_hit, "omega is a ring eigenvalue");
  for (std::size_t i = 0; i < n; ++i) g[i] = std::cos(th * (static_cast<double>(i) - nn / 2.0)) / den;
  return g;
}

// Exact continuum value of the same integral (contour closed form).
inline double vdd_exact(double J, double delta, double omega, int d) {
  const auto g = lattice_resolvent(BathSpec{J, kContinuum, 1}, delta, d);
  return omega * omega * g.value.real();
}

}  // namespace qpbs
