#pragma once

// Exact diagonalization of the full emitter + ring Hamiltonian in a fixed
// excitation-number sector. Emitters are two-level (hard-core) sites, bath
// sites are bosonic with an occupation cap.
//
// Mode order: emitters 0..n_qe-1, then bath sites 0..N-1.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "qpbs/bath_core.hpp"
#include "qpbs/error.hpp"

namespace qpbs::ed {

inline constexpr std::size_t kMaxSectorDim = 5'000'000;
inline constexpr std::size_t kDenseLimit = 4000;

// Emitter positions on a ring of n_sites. `cell > 0` means the geometry is
// invariant under a shift by `cell` sites that maps emitter j to j+1.
struct Geometry {
  std::size_t n_sites = 0;
  std::vector<std::size_t> emitters;
  std::size_t cell = 0;
  bool open = false;  // drop the bond between the last and first site

  std::size_t n_qe() const { return emitters.size(); }
  std::size_t n_modes() const { return emitters.size() + n_sites; }

  static Geometry array(std::size_t n_qe, std::size_t z) {
    require(n_qe >= 1 && z >= 1, "array needs n_qe >= 1 and z >= 1");
    Geometry g;
    g.n_sites = n_qe * z;
    for (std::size_t j = 0; j < n_qe; ++j) g.emitters.push_back(j * z);
    g.cell = z;
    return g;
  }
  // Open chain of n_qe cells; no translation sectors.
  static Geometry open_array(std::size_t n_qe, std::size_t z) {
    Geometry g = array(n_qe, z);
    g.cell = 0;
    g.open = true;
    return g;
  }
  // Two emitters at sites 0 and d of an n-site ring.
  static Geometry pair(std::size_t n, std::size_t d) {
    require(d >= 1 && d < n, "pair distance must lie in [1, N)");
    Geometry g;
    g.n_sites = n;
    g.emitters = {0, d};
    return g;
  }
};

using Config = std::string;  // one byte per mode

struct SectorBasis {
  Geometry geo;
  int n_exc = 0;
  int cap = 0;
  std::optional<int> momentum;  // m, with T eigenvalue exp(-2 pi i m / n_qe)

  std::vector<Config> configs;        // all configs, or orbit representatives
  std::vector<int> orbit;             // orbit lengths (momentum sectors only)
  std::unordered_map<Config, std::size_t> index;

  std::size_t dim() const { return configs.size(); }
};

namespace detail {

inline bool is_emitter(const Geometry& g, std::size_t mode) { return mode < g.n_qe(); }

inline std::size_t mode_cap(const Geometry& g, std::size_t mode, int cap) {
  return is_emitter(g, mode) ? 1u : static_cast<std::size_t>(cap);
}

// Number of ways to place n identical excitations into the given caps.
inline double count_configs(const std::vector<std::size_t>& caps, int n) {
  std::vector<double> ways(static_cast<std::size_t>(n) + 1, 0.0);
  ways[0] = 1.0;
  for (std::size_t c : caps) {
    std::vector<double> next(ways.size(), 0.0);
    for (std::size_t have = 0; have < ways.size(); ++have) {
      if (ways[have] == 0.0) continue;
      for (std::size_t k = 0; k <= c && have + k < ways.size(); ++k) next[have + k] += ways[have];
    }
    ways = std::move(next);
  }
  return ways.back();
}

inline void enumerate(const Geometry& g, int cap, int left, std::size_t mode, Config& cur,
                      std::vector<Config>& out) {
  const std::size_t nm = g.n_modes();
  if (mode == nm) {
    if (left == 0) out.push_back(cur);
    return;
  }
  const int mc = static_cast<int>(mode_cap(g, mode, cap));
  for (int k = std::min(mc, left); k >= 0; --k) {
    cur[mode] = static_cast<char>(k);
    enumerate(g, cap, left - k, mode + 1, cur, out);
  }
  cur[mode] = 0;
}

inline Config translate(const Geometry& g, const Config& c) {
  Config t(c.size(), 0);
  const std::size_t nq = g.n_qe();
  for (std::size_t j = 0; j < nq; ++j) t[(j + 1) % nq] = c[j];
  for (std::size_t s = 0; s < g.n_sites; ++s) t[nq + (s + g.cell) % g.n_sites] = c[nq + s];
  return t;
}

// Applies H to a configuration: calls emit(target, amplitude) for every term.
template <class Emit>
void apply_hamiltonian(const Geometry& g, double J, const CouplingSpec& cp, int cap, const Config& c,
                       Emit&& emit) {
  const std::size_t nq = g.n_qe();
  const std::size_t ns = g.n_sites;
  double diag = 0.0;
  for (std::size_t j = 0; j < nq; ++j) diag += cp.delta * c[j];
  for (std::size_t s = 0; s < ns; ++s) diag += 2.0 * J * c[nq + s];
  emit(c, diag);
  Config t = c;
  // -J (a_s^+ a_{s+1} + h.c.) on every bond of the ring
  for (std::size_t s = 0; s < ns; ++s) {
    if (g.open && s + 1 == ns) break;
    const std::size_t a = nq + s;
    const std::size_t b = nq + (s + 1) % ns;
    for (int dir = 0; dir < 2; ++dir) {
      const std::size_t from = dir == 0 ? b : a;
      const std::size_t to = dir == 0 ? a : b;
      if (c[from] == 0 || c[to] >= cap) continue;
      if (from == to) continue;
      const double amp = -J * std::sqrt(static_cast<double>(c[from]) * (c[to] + 1));
      t[from] = static_cast<char>(c[from] - 1);
      t[to] = static_cast<char>(c[to] + 1);
      emit(t, amp);
      t[from] = c[from];
      t[to] = c[to];
    }
  }
  // Omega (a_{n_j}^+ b_j + h.c.)
  for (std::size_t j = 0; j < nq; ++j) {
    const std::size_t site = nq + g.emitters[j];
    if (c[j] == 1 && c[site] < cap) {
      t[j] = 0;
      t[site] = static_cast<char>(c[site] + 1);
      emit(t, cp.omega * std::sqrt(static_cast<double>(c[site] + 1)));
      t[j] = c[j];
      t[site] = c[site];
    }
    if (c[j] == 0 && c[site] > 0) {
      t[j] = 1;
      t[site] = static_cast<char>(c[site] - 1);
      emit(t, cp.omega * std::sqrt(static_cast<double>(c[site])));
      t[j] = c[j];
      t[site] = c[site];
    }
  }
}

}  // namespace detail

// Enumerates a fixed-excitation sector; with a momentum index the basis holds
// translation orbit representatives compatible with that momentum.
inline SectorBasis build_sector(const Geometry& geo, int n_exc, int cap, std::optional<int> momentum = std::nullopt) {
  require(n_exc >= 0, "n_exc must be non-negative");
  require(cap >= 1, "photon cap must be at least 1");
  require(geo.n_sites >= 2, "ring needs at least 2 sites");
  std::vector<std::size_t> caps;
  for (std::size_t m = 0; m < geo.n_modes(); ++m) caps.push_back(detail::mode_cap(geo, m, cap));
  const double count = detail::count_configs(caps, n_exc);
  if (count > static_cast<double>(kMaxSectorDim))
    throw Error(Errc::sector_too_large, "dimension " + std::to_string(static_cast<long long>(count)));

  SectorBasis b;
  b.geo = geo;
  b.n_exc = n_exc;
  b.cap = cap;
  b.momentum = momentum;
  std::vector<Config> all;
  Config cur(geo.n_modes(), 0);
  detail::enumerate(geo, cap, n_exc, 0, cur, all);
  if (!momentum) {
    b.configs = std::move(all);
  } else {
    require(geo.cell > 0, "momentum sectors need a translation-invariant array");
    const int nq = static_cast<int>(geo.n_qe());
    const int m = ((*momentum % nq) + nq) % nq;
    b.momentum = m;
    std::unordered_map<Config, bool> seen;
    for (const auto& c : all) {
      if (seen.count(c)) continue;
      Config rep = c;
      Config t = c;
      int len = 0;
      do {
        seen[t] = true;
        if (t < rep) rep = t;
        t = detail::translate(geo, t);
        ++len;
      } while (t != c);
      // orbit of length len supports momenta with m * len divisible by nq
      if ((static_cast<long>(m) * len) % nq != 0) continue;
      b.configs.push_back(rep);
      b.orbit.push_back(len);
    }
  }
  for (std::size_t i = 0; i < b.configs.size(); ++i) b.index.emplace(b.configs[i], i);
  return b;
}

struct SpectrumReport {
  std::vector<double> eigenvalues;
  Eigen::MatrixXcd eigenvectors;  // columns, present when requested
  double hermiticity_residual = 0.0;
};

namespace detail {

// Locates the representative of a configuration and the shift a with
// T^a c = rep.
inline std::pair<std::size_t, int> find_rep(const SectorBasis& b, const Config& c) {
  Config t = c;
  const int nq = static_cast<int>(b.geo.n_qe());
  for (int a = 0; a <= nq; ++a) {
    auto it = b.index.find(t);
    if (it != b.index.end()) return {it->second, a};
    t = translate(b.geo, t);
  }
  return {std::numeric_limits<std::size_t>::max(), 0};
}

}  // namespace detail

// Sparse sector Hamiltonian (complex Hermitian; real for momentum-free sectors).
inline Eigen::SparseMatrix<cplx> sector_hamiltonian(const SectorBasis& b, double J, const CouplingSpec& cp) {
  std::vector<Eigen::Triplet<cplx>> trip;
  const std::size_t n = b.dim();
  const int nq = static_cast<int>(b.geo.n_qe());
  for (std::size_t col = 0; col < n; ++col) {
    const Config& c = b.configs[col];
    detail::apply_hamiltonian(b.geo, J, cp, b.cap, c, [&](const Config& t, double amp) {
      if (amp == 0.0) return;
      if (!b.momentum) {
        auto it = b.index.find(t);
        if (it == b.index.end()) throw Error(Errc::sector_drift, "Hamiltonian left the sector");
        trip.emplace_back(static_cast<long>(it->second), static_cast<long>(col), cplx(amp, 0.0));
        return;
      }
      auto [row, shift] = detail::find_rep(b, t);
      if (row == std::numeric_limits<std::size_t>::max()) return;  // orbit incompatible with m
      // |r,q> = sum_a exp(iqa) T^a |r> / norm and t = T^{-shift} rep.
      const double q = 2.0 * kPi * (*b.momentum) / nq;
      const double ratio = std::sqrt(static_cast<double>(b.orbit[col]) / b.orbit[row]);
      trip.emplace_back(static_cast<long>(row), static_cast<long>(col),
                        amp * ratio * std::polar(1.0, q * shift));
    });
  }
  Eigen::SparseMatrix<cplx> h(static_cast<long>(n), static_cast<long>(n));
  h.setFromTriplets(trip.begin(), trip.end());
  return h;
}

namespace detail {

inline double hermiticity_residual(const Eigen::SparseMatrix<cplx>& h) {
  Eigen::SparseMatrix<cplx> d = h - Eigen::SparseMatrix<cplx>(h.adjoint());
  double r = 0.0;
  for (int k = 0; k < d.outerSize(); ++k)
    for (Eigen::SparseMatrix<cplx>::InnerIterator it(d, k); it; ++it) r = std::max(r, std::abs(it.value()));
  return r;
}

// Lanczos with full reorthogonalization for the lowest m eigenpairs.
inline SpectrumReport lanczos(const Eigen::SparseMatrix<cplx>& h, int m, bool vectors, std::uint64_t seed) {
  const long n = h.rows();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  long krylov = std::min<long>(n, std::max<long>(4L * m + 80, 200));
  for (int attempt = 0; attempt < 6; ++attempt) {
    Eigen::MatrixXcd q(n, krylov);
    Eigen::VectorXcd v(n);
    for (long i = 0; i < n; ++i) v(i) = cplx(nd(rng), nd(rng));
    v.normalize();
    std::vector<double> alpha, beta;
    long steps = 0;
    for (long k = 0; k < krylov; ++k) {
      q.col(k) = v;
      Eigen::VectorXcd w = h * v;
      const double a = std::real(v.dot(w));
      alpha.push_back(a);
      for (int pass = 0; pass < 2; ++pass) w -= q.leftCols(k + 1) * (q.leftCols(k + 1).adjoint() * w);
      const double bn = w.norm();
      steps = k + 1;
      if (bn < 1e-13 || k + 1 == krylov) break;
      beta.push_back(bn);
      v = w / bn;
    }
    Eigen::MatrixXd t = Eigen::MatrixXd::Zero(steps, steps);
    for (long i = 0; i < steps; ++i) {
      t(i, i) = alpha[static_cast<std::size_t>(i)];
      if (i + 1 < steps) t(i, i + 1) = t(i + 1, i) = beta[static_cast<std::size_t>(i)];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
    const long take = std::min<long>(m, steps);
    SpectrumReport r;
    Eigen::MatrixXcd ritz = q.leftCols(steps) * es.eigenvectors().leftCols(take).cast<cplx>();
    bool ok = true;
    for (long i = 0; i < take; ++i) {
      const double lam = es.eigenvalues()(i);
      const double res = (h * ritz.col(i) - lam * ritz.col(i)).norm();
      if (res > 1e-9 * std::max(1.0, std::abs(lam))) ok = false;
      r.eigenvalues.push_back(lam);
    }
    if (ok || krylov == n) {
      if (!ok) throw Error(Errc::not_converged, "Lanczos residual above tolerance");
      if (vectors) r.eigenvectors = ritz;
      return r;
    }
    krylov = std::min<long>(n, krylov * 2);
  }
  throw Error(Errc::not_converged, "Lanczos budget exhausted");
}

}  // namespace detail

// Lowest m eigenvalues (and optionally eigenvectors) of a sector.
inline SpectrumReport sector_spectrum(const SectorBasis& b, double J, const CouplingSpec& cp, int m,
                                      bool vectors = false) {
  require(m >= 1, "need at least one eigenvalue");
  const auto h = sector_hamiltonian(b, J, cp);
  const double herm = detail::hermiticity_residual(h);
  if (herm > 1e-12) throw Error(Errc::invalid_argument, "sector Hamiltonian is not Hermitian");
  const std::size_t n = b.dim();
  if (n == 0) return {};
  SpectrumReport r;
  if (n < kDenseLimit) {
    Eigen::MatrixXcd dense = Eigen::MatrixXcd(h);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense);
    const long take = std::min<long>(m, static_cast<long>(n));
    for (long i = 0; i < take; ++i) r.eigenvalues.push_back(es.eigenvalues()(i));
    if (vectors) r.eigenvectors = es.eigenvectors().leftCols(take);
  } else {
    r = detail::lanczos(h, m, vectors, 12345);
  }
  r.hermiticity_residual = herm;
  return r;
}

// Real-space amplitude of a symmetric n-boson state
//   |psi> = sum_{a_1..a_n} phi(a_1..a_n) m_{a_1}^+ ... m_{a_n}^+ |0>
// on a momentum-free basis. `phi` receives the sorted mode list.
template <class Phi>
Eigen::VectorXcd fock_vector(const SectorBasis& b, Phi&& phi) {
  require(!b.momentum, "fock_vector needs a real-space basis");
  Eigen::VectorXcd v(static_cast<long>(b.dim()));
  std::vector<std::size_t> modes;
  for (std::size_t i = 0; i < b.dim(); ++i) {
    const Config& c = b.configs[i];
    modes.clear();
    double fact = 1.0;
    for (std::size_t mo = 0; mo < c.size(); ++mo)
      for (int k = 0; k < c[mo]; ++k) {
        modes.push_back(mo);
        fact *= (k + 1);
      }
    double nfact = 1.0;
    for (std::size_t k = 2; k <= modes.size(); ++k) nfact *= static_cast<double>(k);
    // ordered tuples n!/prod(n_i!) times the norm sqrt(prod n_i!)
    v(static_cast<long>(i)) = cplx(phi(modes)) * (nfact / std::sqrt(fact));
  }
  return v;
}

// Squared overlap of a (normalized) vector with the eigenspace of levels
// within `tol` of `energy`.
inline double eigenspace_weight(const SpectrumReport& r, double energy, double tol, const Eigen::VectorXcd& v) {
  double w = 0.0;
  for (std::size_t i = 0; i < r.eigenvalues.size(); ++i)
    if (std::abs(r.eigenvalues[i] - energy) <= tol) w += std::norm(r.eigenvectors.col(static_cast<long>(i)).dot(v));
  return w;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double x) const { return x >= lo && x <= hi; }
};

struct ComparisonRow {
  double analytic = 0.0;
  double nearest = 0.0;
  double deviation = 0.0;
  bool isolated = true;
  bool pass = false;
};

// Matches each analytic level to the nearest ED level. Levels inside one of
// the given continua are classified as not isolated and never fail.
inline std::vector<ComparisonRow> compare(const std::vector<double>& analytic, const std::vector<double>& reference,
                                          double tol, const std::vector<Interval>& continua = {}) {
  std::vector<ComparisonRow> rows;
  for (double a : analytic) {
    ComparisonRow row;
    row.analytic = a;
    row.deviation = std::numeric_limits<double>::infinity();
    for (double e : reference) {
      if (std::abs(e - a) < row.deviation) {
        row.deviation = std::abs(e - a);
        row.nearest = e;
      }
    }
    for (const auto& iv : continua)
      if (iv.contains(a)) row.isolated = false;
    row.pass = !row.isolated || row.deviation <= tol;
    rows.push_back(row);
  }
  return rows;
}

inline bool all_pass(const std::vector<ComparisonRow>& rows) {
  return std::all_of(rows.begin(), rows.end(), [](const ComparisonRow& r) { return r.pass; });
}

}  // namespace qpbs::ed
