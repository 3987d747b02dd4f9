#pragma once

// Named end-to-end checks of the analytic solvers against the ED oracle and
// against fixed reference values. Shared by the acceptance binary and the
// CLI check-suite.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <future>
#include <random>
#include <string>
#include <vector>

#include "qpbs/array_pair.hpp"
#include "qpbs/ed_oracle.hpp"
#include "qpbs/mps_ground_state.hpp"
#include "qpbs/single_excitation.hpp"
#include "qpbs/triplon.hpp"
#include "qpbs/two_qe_pair.hpp"

namespace qpbs::checks {

struct CheckResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

inline std::string fmt(const char* f, double a) {
  char b[64];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

inline double nearest(const std::vector<double>& levels, double x) {
  double best = std::numeric_limits<double>::infinity();
  for (double e : levels) best = std::min(best, std::abs(e - x));
  return best;
}

inline bool strictly_inside(const EnergyWindow& w, double x, double margin = 1e-9) {
  return w.hi > w.lo && x > w.lo + margin && x < w.hi - margin;
}

// Runs f, times it and turns an escaped library error into a failure.
inline CheckResult timed(int id, std::string name, const std::function<void(CheckResult&)>& f) {
  CheckResult r;
  r.id = id;
  r.name = std::move(name);
  const auto t0 = std::chrono::steady_clock::now();
  try {
    f(r);
  } catch (const std::exception& e) {
    r.pass = false;
    r.detail += std::string(r.detail.empty() ? "" : "; ") + "error: " + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

inline constexpr double kOracleTol = 1e-8;

// Single- and two-excitation levels of two emitters on a 10-site ring.
inline CheckResult oracle_equivalence(std::uint64_t seed = 20240601) {
  return timed(1, "oracle equivalence (N=10, d=1,2, five random points)", [&](CheckResult& r) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ud(-3.0, 3.0), uo(0.0, 3.0);
    const std::size_t n = 10;
    double worst = 0.0;
    int compared = 0;
    for (int i = 0; i < 5; ++i) {
      double om = 0.0;
      while (om <= 0.0) om = uo(rng);
      const CouplingSpec cp{ud(rng), om};
      for (int d : {1, 2}) {
        const auto ring = BathSpec::ring(1.0, n);
        const auto one = ed::sector_spectrum(ed::build_sector(ed::Geometry::pair(n, static_cast<std::size_t>(d)), 1, 1), 1.0, cp, 100000).eigenvalues;
        const auto two = ed::sector_spectrum(ed::build_sector(ed::Geometry::pair(n, static_cast<std::size_t>(d)), 2, 2), 1.0, cp, 100000).eigenvalues;
        const auto s = solve_two_qe(ring, cp, d);
        std::vector<double> a1;
        for (const auto& e : {s.e_plus, s.e_minus, s.e_plus_above, s.e_minus_above})
          if (e) a1.push_back(*e);
        const auto sp = solve_pair_poles(ring, cp, d);
        std::vector<double> a2{sp.e_ground};
        for (const auto& e : {sp.window_plus, sp.window_minus, sp.e_doublon_plus, sp.e_doublon_minus})
          if (e) a2.push_back(*e);
        for (double a : a1) worst = std::max(worst, nearest(one, a)), ++compared;
        for (double a : a2) worst = std::max(worst, nearest(two, a)), ++compared;
      }
    }
    r.pass = worst < kOracleTol;
    r.detail = std::to_string(compared) + " levels, max |dE| = " + fmt("%.2e", worst);
  });
}

inline CheckResult antisymmetric_boundary() {
  return timed(2, "anti-symmetric state boundary", [](CheckResult& r) {
    const double step = 0.01;
    double worst = 0.0;
    for (double delta : {0.5, 1.0, 2.0})
      for (int d : {1, 2}) {
        double flip = -1.0;
        for (int k = 1; k <= 400; ++k) {
          const double om = step * k;
          if (solve_two_qe(BathSpec::infinite(1.0), {delta, om}, d).exists_minus) {
            flip = om;
            break;
          }
        }
        worst = std::max(worst, flip < 0.0 ? 1e9 : std::abs(flip - std::sqrt(2.0 * delta / d)));
      }
    r.pass = worst <= step + 1e-12;
    r.detail = "max |flip - sqrt(2 Delta/d)| = " + fmt("%.4f", worst) + " (grid 0.01)";
  });
}

inline CheckResult strong_coupling_saturation() {
  return timed(3, "strong-coupling saturation |t_eff| in [0.47, 0.52]", [](CheckResult& r) {
    r.pass = true;
    for (double delta : {-1.0, 0.0, 1.0}) {
      const auto h = effective_hopping_two_qe(solve_two_qe(BathSpec::infinite(1.0), {delta, 20.0}, 1));
      const double t = std::abs(h.t);
      r.pass = r.pass && t >= 0.47 && t <= 0.52;
      r.detail += (r.detail.empty() ? "" : ", ") + fmt("Delta=%+.0f: ", delta) + fmt("|t|=%.4f", t);
    }
  });
}

inline CheckResult wannier_saturation() {
  return timed(4, "Wannier saturation t1, t2 at d=2", [](CheckResult& r) {
    const auto s = polariton_bands(BathSpec::ring(1.0, 1024, 2), {3.0, 0.01}, 512);
    const auto w = wannier_hoppings(s);
    const double c1 = folded_band_hopping(1.0, 2, 1), c2 = folded_band_hopping(1.0, 2, 2);
    r.pass = std::abs(w.at(1) + 0.424) <= 0.004 && std::abs(w.at(2) - 0.085) <= 0.004 && std::abs(c1 + 0.4244) < 1e-4 &&
             std::abs(c2 - 0.0849) < 1e-4;
    r.detail = fmt("t1=%.4f", w.at(1)) + fmt(", t2=%.4f", w.at(2)) + fmt("; closed form %.4f", c1) + fmt("/%.4f", c2);
  });
}

inline CheckResult variational_fidelity() {
  return timed(5, "variational fidelity on 10x10 grid (d=1)", [](CheckResult& r) {
    double min_pv = 1.0, min_p = 1.0;
    int n_p = 0;
    for (int i = 0; i < 10; ++i)
      for (int j = 0; j < 10; ++j) {
        const CouplingSpec cp{-3.0 + 6.0 * i / 9.0, 0.3 * (j + 1)};
        const auto v = variational_ground_state(BathSpec::infinite(1.0), cp, 1);
        min_pv = std::min(min_pv, v.overlap_pv);
        if (!v.symmetric_only) {
          min_p = std::min(min_p, v.p);
          ++n_p;
        }
      }
    r.pass = min_pv > 0.98 && min_p > 0.85;
    r.detail = fmt("min p_v=%.4f", min_pv) + fmt(", min p=%.4f", min_p) + " over " + std::to_string(n_p) + " points with both modes";
  });
}

inline CheckResult doublon_band_check() {
  return timed(6, "doublon band vs ED (N_b=8) and t^D_1 vs two-QE t_D", [](CheckResult& r) {
    double worst = 0.0;
    int matched = 0;
    bool counts_ok = true;
    for (auto cp : {CouplingSpec{0.0, 2.0}, CouplingSpec{1.0, 1.0}}) {
      const auto s = array_spectrum(1.0, 1, cp, 8);
      for (int m = 0; m < 8; ++m) {
        const auto g = gap_windows(s, m);
        const auto ed = ed::sector_spectrum(ed::build_sector(ed::Geometry::array(8, 1), 2, 2, m), 1.0, cp, 100000).eigenvalues;
        for (std::size_t gi = 0; gi < g.size(); ++gi) {
          std::vector<double> inside;
          for (double x : ed)
            if (strictly_inside(g[gi], x)) inside.push_back(x);
          const auto e = doublon_energy(s, m, gi);
          if (inside.size() != (e ? 1u : 0u)) counts_ok = false;
          for (double x : inside) {
            worst = std::max(worst, e ? std::abs(*e - x) : 1e9);
            ++matched;
          }
        }
      }
    }
    const CouplingSpec arc{-1.0, 2.0};
    const auto h = doublon_hoppings(doublon_band(array_spectrum(1.0, 2, arc, kDefaultBandCells)));
    const auto t = doublon_hopping_two_qe(solve_pair_poles(BathSpec::ring(1.0, kDefaultPairRing), arc, 2)).t;
    const double ratio = h.t[1] / t;
    r.pass = counts_ok && worst < 1e-6 && std::abs(ratio - 1.0) <= 0.05;
    r.detail = std::to_string(matched) + " midgap ED levels, max |dE| = " + fmt("%.2e", worst) +
               (counts_ok ? "" : ", level count mismatch") + fmt("; t^D_1 / t_D = %.4f at Delta=-1, Omega=2, z=2", ratio);
  });
}

inline CheckResult triplon_check() {
  return timed(7, "triplon existence and ED match", [](CheckResult& r) {
    bool exists = true;
    for (double om : {5.0, 6.0}) exists = exists && triplon_band(array_spectrum(1.0, 1, {0.0, om}, kDefaultTriplonCells)).complete();
    bool absent = true;
    {
      const auto s = array_spectrum(1.0, 1, {0.0, 1.0}, kDefaultTriplonCells);
      const auto d = all_doublon_bands(s);
      for (long q = 0; q < static_cast<long>(s.n_cells); ++q)
        if (triplon_energy(s, d, q)) absent = false;
    }
    double worst = 0.0;
    bool counts_ok = true;
    for (double om : {5.0, 6.0}) {
      const CouplingSpec cp{0.0, om};
      const auto s = array_spectrum(1.0, 1, cp, 6);
      const auto d = all_doublon_bands(s);
      for (int m = 0; m < 6; ++m) {
        const auto c = three_excitation_continua(s, d, m);
        const auto root = triplon_energy(s, d, m);
        const auto ed = ed::sector_spectrum(ed::build_sector(ed::Geometry::array(6, 1), 3, 3, m), 1.0, cp, 100000).eigenvalues;
        std::vector<double> in_gap;
        if (!c.gaps.empty())
          for (double x : ed)
            if (x > c.gaps[0].lo - 1e-9 && x < c.gaps[0].hi + 1e-9) in_gap.push_back(x);
        if (!root || in_gap.size() != 1) {
          counts_ok = false;
          continue;
        }
        worst = std::max(worst, std::abs(root->energy - in_gap[0]));
      }
    }
    r.pass = exists && absent && counts_ok && worst < 1e-5;
    r.detail = std::string("band at Omega=5,6: ") + (exists ? "complete" : "missing") + "; Omega=1: " +
               (absent ? "absent" : "present") + fmt("; N_b=6 max |dE| = %.2e", worst) + (counts_ok ? "" : ", level count mismatch");
  });
}

inline CheckResult ueff_check() {
  return timed(8, "U_eff monotone in Omega at Delta=1, divergent at (-10, 0.3)", [](CheckResult& r) {
    bool mono = true;
    double prev = -std::numeric_limits<double>::infinity();
    for (int k = 0; k <= 19; ++k) {
      const double om = 0.1 + 0.1 * k;
      const double u = u_eff(array_spectrum(1.0, 1, {1.0, om}, kDefaultBandCells)).u_eff;
      if (!(u > prev)) mono = false;
      prev = u;
    }
    const double big = u_eff(array_spectrum(1.0, 1, {-10.0, 0.3}, kDefaultBandCells)).u_eff;
    r.pass = mono && big > 1e3;
    r.detail = std::string(mono ? "monotone" : "not monotone") + " over 20 points in [0.1, 2]" + fmt(", U_eff(-10, 0.3) = %.1f", big);
  });
}

struct DmrgPoint {
  MpsGroundState state;
  PhaseDiagnostics diag;
};

inline DmrgPoint dmrg_point(std::size_t n_imp, int z, int cap, std::size_t bond, const CouplingSpec& cp, std::uint64_t seed = 1) {
  ChainSpec c;
  c.n_imp = n_imp;
  c.z = z;
  c.cap = cap;
  c.bond_max = bond;
  DmrgOptions o;
  o.seed = seed;
  o.throw_if_not_converged = false;
  DmrgPoint p{ground_state(c, 1.0, cp, o), {}};
  p.diag = diagnose(p.state);
  return p;
}

inline std::string describe(const DmrgPoint& p) {
  std::string s = std::string(p.state.converged ? "converged" : "NOT converged") + fmt(" (trunc %.1e", p.state.max_truncation) +
                  ", " + std::to_string(p.state.sweeps) + " sweeps), " + to_string(p.diag.phase) +
                  fmt(", l1/l2=%.2f", p.diag.dominant_ratio()) + fmt(", S spread=%.3f", p.diag.entropy.interior_spread);
  if (p.diag.entropy.c) s += fmt(", c=%.3f", *p.diag.entropy.c) + fmt(" (rms %.3f)", *p.diag.entropy.residual);
  if (p.diag.exponent_emitter) s += fmt(", f_QE=%.3f", p.diag.exponent_emitter->f);
  if (p.diag.exponent_bath) s += fmt(", f_bath=%.3f", p.diag.exponent_bath->f);
  return s;
}

inline CheckResult dmrg_small_vs_ed() {
  return timed(9, "DMRG N_imp=4 vs open-chain ED", [](CheckResult& r) {
    double worst = 0.0;
    for (auto cp : {CouplingSpec{0.0, 0.15}, CouplingSpec{0.0, 2.0}}) {
      const auto p = dmrg_point(4, 1, 4, 128, cp);
      const auto b = ed::build_sector(ed::Geometry::open_array(4, 1), 4, 4);
      worst = std::max(worst, std::abs(p.state.energy - ed::sector_spectrum(b, 1.0, cp, 1).eigenvalues[0]));
    }
    r.pass = worst < 1e-7;
    r.detail = fmt("max |dE| = %.2e", worst);
  });
}

// Scaled phase checks at N_imp = 32, z = 1, C = 4.
inline CheckResult dmrg_suite() {
  return timed(9, "DMRG property suite (N_imp=32, z=1, C=4)", [](CheckResult& r) {
    // The two large points are independent; run them side by side.
    auto mott_job = std::async(std::launch::async, [] { return dmrg_point(32, 1, 4, 128, {0.0, 2.0}); });
    const auto small = dmrg_small_vs_ed();
    const auto sf = dmrg_point(32, 1, 4, 128, {0.0, 0.15});
    const auto& d = sf.diag;
    const bool c_ok = d.entropy.c && *d.entropy.c >= 0.9 && *d.entropy.c <= 1.15;
    const bool f_ok = d.exponent_emitter && d.exponent_bath && d.exponent_emitter->f < 0.0 &&
                      std::abs(d.exponent_emitter->f) >= 0.1 && std::abs(d.exponent_emitter->f) <= 0.3 &&
                      std::abs(d.exponent_emitter->f - d.exponent_bath->f) <= 0.03;
    const bool a_ok = sf.state.converged && d.phase == Phase::superfluid && c_ok && f_ok;
    const auto mott = mott_job.get();
    const auto& m = mott.diag;
    const bool b_ok = mott.state.converged && m.phase == Phase::mott && m.entropy.interior_spread < 0.05 && m.dominant_ratio() < 1.5;
    r.pass = a_ok && b_ok && small.pass;
    r.detail = std::string("(a) ") + (a_ok ? "ok" : "FAIL") + " [" + describe(sf) + "]; (b) " + (b_ok ? "ok" : "FAIL") + " [" +
               describe(mott) + "]; (c) " + (small.pass ? "ok" : "FAIL") + " [" + small.detail + "]";
  });
}

}  // namespace qpbs::checks
