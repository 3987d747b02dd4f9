#pragma once

// Parameter sweeps over the (Delta, Omega) plane and band exports, producing
// rectangular tables with explicit status flags. Output order depends only on
// the configuration, never on scheduling.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qpbs/checks.hpp"

namespace qpbs::sweep {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kSchema = "qpbs-sweep-1";
inline constexpr const char* kAbsent = "ABSENT";

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> t{"teff-2qe",    "wannier-hoppings", "pair-ground", "ueff",
                                          "doublon-band", "triplon-band",     "dmrg-point",  "check-suite"};
  return t;
}

inline bool is_plane_task(const std::string& t) {
  return t == "teff-2qe" || t == "wannier-hoppings" || t == "pair-ground" || t == "ueff";
}

struct SweepConfig {
  std::string task;
  double dmin = 0.0, dmax = 0.0;
  std::size_t dsteps = 1;
  double omin = 1.0, omax = 1.0;
  std::size_t osteps = 1;
  int d = 1;
  int z = 0;           // 0: take the spacing from d
  std::size_t nb = 0;  // 0: task default (continuum for two-emitter tasks)
  std::size_t n = 0;   // DMRG unit cells; 0: 32
  int cap = 4;
  std::size_t bond = 128;
  std::string out = "qpbs_out";
  unsigned jobs = 1;
  std::uint64_t seed = 1;

  int spacing() const { return z > 0 ? z : d; }

  void validate() const {
    require(std::find(task_names().begin(), task_names().end(), task) != task_names().end(), "unknown task '" + task + "'");
    for (double x : {dmin, dmax, omin, omax}) require(std::isfinite(x), "ranges must be finite");
    require(dmin <= dmax && omin <= omax, "range minimum exceeds maximum");
    require(dsteps >= 1 && osteps >= 1, "grid needs at least one point per axis");
    if (is_plane_task(task)) require(dsteps >= 2 && osteps >= 2, "plane tasks need a grid of at least 2x2");
    require(omin >= 0.0, "Omega must be non-negative");
    require(d >= 1 && z >= 0, "spacing must be positive");
    require(jobs >= 1, "jobs must be positive");
    require(cap >= 2 && cap <= 5, "cap must lie in [2, 5]");
  }
};

inline double grid_value(double lo, double hi, std::size_t steps, std::size_t i) {
  if (steps == 1) return lo;
  return lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
}

// Shortest round-trip decimal form: identical bytes for identical doubles.
inline std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, r.ptr);
}

inline std::string num(const std::optional<double>& x) { return x ? num(*x) : kAbsent; }
inline std::string flag(bool b) { return b ? "1" : "0"; }

struct Row {
  std::vector<double> key;  // sort key: parameter tuple
  std::vector<std::string> cells;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;
  std::size_t errors = 0;
};

// RFC 4180: quote fields containing comma, quote, CR or LF; double the quotes.
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

inline std::string to_csv(const Table& t) {
  std::string out;
  const auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out += (i ? "," : "") + csv_field(cells[i]);
    out += "\r\n";
  };
  line(t.header);
  for (const auto& r : t.rows) line(r.cells);
  return out;
}

// Runs f(i) for i in [0, n) on `jobs` threads pulling indices from a shared
// counter; results land at their own index.
template <class T>
std::vector<T> parallel_map(std::size_t n, unsigned jobs, const std::function<T(std::size_t)>& f) {
  std::vector<T> out(n);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) out[i] = f(i);
  };
  const unsigned nt = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < nt; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  return out;
}

struct TaskDef {
  std::vector<std::string> columns;  // before status, message
  // One point of the grid; returns one or more rows of cells (without status).
  std::function<std::vector<std::vector<std::string>>(const SweepConfig&, const CouplingSpec&)> point;
};

namespace detail {

inline BathSpec two_qe_bath(const SweepConfig& c) { return c.nb == 0 ? BathSpec::infinite(1.0) : BathSpec::ring(1.0, c.nb); }

inline std::string continua_string(const std::vector<EnergyWindow>& ws) {
  std::string s;
  for (const auto& w : ws) s += (s.empty() ? "" : "|") + num(w.lo) + ":" + num(w.hi);
  return s;
}

inline std::vector<EnergyWindow> pair_continua(const PolaritonSpectrum& s, long q) { return scattering_band_edges(s, q); }

}  // namespace detail

inline TaskDef task_def(const std::string& task) {
  using Cells = std::vector<std::vector<std::string>>;
  if (task == "teff-2qe")
    return {{"delta", "omega", "d", "n", "e_plus", "e_minus", "exists_minus", "t_eff", "e0", "arc_region"},
            [](const SweepConfig& c, const CouplingSpec& cp) -> Cells {
              const auto s = solve_two_qe(detail::two_qe_bath(c), cp, c.d);
              std::optional<HoppingPair> h;
              if (s.exists_minus && s.e_plus) h = effective_hopping_two_qe(s);
              return {{num(cp.delta), num(cp.omega), std::to_string(c.d), std::to_string(c.nb), num(s.e_plus), num(s.e_minus),
                       flag(s.exists_minus), h ? num(h->t) : kAbsent, h ? num(h->e0) : kAbsent,
                       h ? flag(is_arc_region(*h)) : kAbsent}};
            }};
  if (task == "wannier-hoppings")
    return {{"delta", "omega", "z", "nb", "band_defined", "e0", "t1", "t2", "t3", "z_weight0"},
            [](const SweepConfig& c, const CouplingSpec& cp) -> Cells {
              const std::size_t nb = c.nb == 0 ? 512 : c.nb;
              const int z = c.spacing();
              const auto s = polariton_bands(BathSpec::ring(1.0, nb * static_cast<std::size_t>(z), z), cp, nb);
              std::optional<WannierHoppings> w;
              try {
                w = wannier_hoppings(s);
              } catch (const Error& e) {
                if (e.code() != Errc::band_ambiguous) throw;
              }
              const auto at = [&](long l) { return w ? num(w->at(l)) : std::string(kAbsent); };
              return {{num(cp.delta), num(cp.omega), std::to_string(z), std::to_string(nb), flag(w.has_value()),
                       w ? num(w->e0) : kAbsent, at(1), at(2), at(3), num(s.weight(0, 0))}};
            }};
  if (task == "pair-ground")
    return {{"delta", "omega", "d", "n", "e_ground", "e_doublon_plus", "e_doublon_minus", "t_doublon", "p_v", "p",
             "symmetric_only"},
            [](const SweepConfig& c, const CouplingSpec& cp) -> Cells {
              const auto sp = solve_pair_poles(detail::two_qe_bath(c), cp, c.d);
              std::optional<double> td;
              if (sp.e_doublon_plus && sp.e_doublon_minus) td = doublon_hopping_two_qe(sp).t;
              std::optional<VariationalState> v;
              if (cp.omega > 0.0) v = variational_ground_state(detail::two_qe_bath(c), cp, c.d);
              return {{num(cp.delta), num(cp.omega), std::to_string(c.d), std::to_string(c.nb), num(sp.e_ground),
                       num(sp.e_doublon_plus), num(sp.e_doublon_minus), num(td), v ? num(v->overlap_pv) : kAbsent,
                       v ? num(v->p) : kAbsent, v ? flag(v->symmetric_only) : kAbsent}};
            }};
  if (task == "ueff")
    return {{"delta", "omega", "z", "nb", "z1", "e0", "u_int", "u_eff"},
            [](const SweepConfig& c, const CouplingSpec& cp) -> Cells {
              const std::size_t nb = c.nb == 0 ? kDefaultBandCells : c.nb;
              const auto u = u_eff(array_spectrum(1.0, c.spacing(), cp, nb));
              return {{num(cp.delta), num(cp.omega), std::to_string(c.spacing()), std::to_string(nb), num(u.z1), num(u.e0),
                       num(u.u_int), num(u.u_eff)}};
            }};
  if (task == "doublon-band")
    return {{"delta", "omega", "z", "nb", "q", "band_defined", "e_doublon", "gap_lo", "gap_hi", "continua"},
            [](const SweepConfig& c, const CouplingSpec& cp) -> Cells {
              const std::size_t nb = c.nb == 0 ? kDefaultWavefunctionCells : c.nb;
              const auto s = array_spectrum(1.0, c.spacing(), cp, nb);
              const auto b = doublon_band(s);
              Cells rows;
              for (std::size_t m = 0; m < nb; ++m) {
                const bool has_gap = b.windows[m].hi > b.windows[m].lo;
                rows.push_back({num(cp.delta), num(cp.omega), std::to_string(c.spacing()), std::to_string(nb), num(b.momenta[m]),
                                flag(b.energies[m].has_value()), num(b.energies[m]), has_gap ? num(b.windows[m].lo) : kAbsent,
                                has_gap ? num(b.windows[m].hi) : kAbsent,
                                detail::continua_string(detail::pair_continua(s, static_cast<long>(m)))});
              }
              return rows;
            }};
  if (task == "triplon-band")
    return {{"delta", "omega", "z", "nb", "q", "band_defined", "e_triplon", "gap_lo", "gap_hi", "continua"},
            [](const SweepConfig& c, const CouplingSpec& cp) -> Cells {
              const std::size_t nb = c.nb == 0 ? kDefaultTriplonCells : c.nb;
              const auto s = array_spectrum(1.0, c.spacing(), cp, nb);
              const auto doublons = all_doublon_bands(s);
              Cells rows;
              for (std::size_t m = 0; m < nb; ++m) {
                const long q = static_cast<long>(m);
                const auto cont = three_excitation_continua(s, doublons, q);
                const bool has_gap = !cont.gaps.empty();
                const auto r = has_gap ? triplon_root_in(s, q, cont.gaps[0]) : std::nullopt;
                rows.push_back({num(cp.delta), num(cp.omega), std::to_string(c.spacing()), std::to_string(nb), num(s.momenta[m]),
                                flag(r.has_value()), r ? num(r->energy) : kAbsent, has_gap ? num(cont.gaps[0].lo) : kAbsent,
                                has_gap ? num(cont.gaps[0].hi) : kAbsent, detail::continua_string(cont.merged)});
              }
              return rows;
            }};
  if (task == "dmrg-point")
    return {{"delta", "omega", "n_imp", "z", "cap", "bond_max", "energy", "converged", "max_truncation", "sweeps", "lambda1",
             "lambda2", "c", "g", "c_rms", "f_qe", "f_bath", "entropy_spread", "phase"},
            [](const SweepConfig& c, const CouplingSpec& cp) -> Cells {
              const std::size_t n = c.n == 0 ? 32 : c.n;
              const auto p = checks::dmrg_point(n, c.spacing(), c.cap, c.bond, cp, c.seed);
              const auto& d = p.diag;
              const auto eig = [&](std::size_t i) { return i < d.corr_eigs.size() ? num(d.corr_eigs[i]) : std::string(kAbsent); };
              return {{num(cp.delta), num(cp.omega), std::to_string(n), std::to_string(c.spacing()), std::to_string(c.cap),
                       std::to_string(c.bond), num(p.state.energy), flag(p.state.converged), num(p.state.max_truncation),
                       std::to_string(p.state.sweeps), eig(0), eig(1), num(d.entropy.c), num(d.entropy.g), num(d.entropy.residual),
                       d.exponent_emitter ? num(d.exponent_emitter->f) : kAbsent,
                       d.exponent_bath ? num(d.exponent_bath->f) : kAbsent, num(d.entropy.interior_spread), to_string(d.phase)}};
            }};
  throw Error(Errc::invalid_argument, "no plane definition for task '" + task + "'");
}

// Oracle comparisons only; each is one row.
inline std::vector<checks::CheckResult> check_suite(std::uint64_t seed, unsigned jobs) {
  const std::vector<std::function<checks::CheckResult()>> all{
      [seed] { return checks::oracle_equivalence(seed); }, checks::doublon_band_check, checks::triplon_check,
      checks::dmrg_small_vs_ed};
  return parallel_map<checks::CheckResult>(all.size(), jobs, [&](std::size_t i) { return all[i](); });
}

inline Table run(const SweepConfig& c) {
  c.validate();
  Table t;
  if (c.task == "check-suite") {
    t.header = {"id", "check", "pass", "detail"};
    for (const auto& r : check_suite(c.seed, c.jobs)) {
      t.rows.push_back({{static_cast<double>(t.rows.size())}, {std::to_string(r.id), r.name, flag(r.pass), r.detail}});
      if (!r.pass) ++t.errors;
    }
    return t;
  }
  const TaskDef def = task_def(c.task);
  t.header = def.columns;
  t.header.push_back("status");
  t.header.push_back("message");
  const std::size_t np = c.dsteps * c.osteps;
  using Result = std::vector<Row>;
  auto results = parallel_map<Result>(np, c.jobs, [&](std::size_t k) {
    const std::size_t i = k / c.osteps, j = k % c.osteps;
    const CouplingSpec cp{grid_value(c.dmin, c.dmax, c.dsteps, i), grid_value(c.omin, c.omax, c.osteps, j)};
    Result rows;
    try {
      const auto cells = def.point(c, cp);
      for (std::size_t r = 0; r < cells.size(); ++r) {
        Row row{{cp.delta, cp.omega, static_cast<double>(r)}, cells[r]};
        row.cells.push_back("ok");
        row.cells.push_back("");
        rows.push_back(std::move(row));
      }
    } catch (const std::exception& e) {
      Row row{{cp.delta, cp.omega, 0.0}, {num(cp.delta), num(cp.omega)}};
      while (row.cells.size() < def.columns.size()) row.cells.push_back(kAbsent);
      row.cells.push_back("error");
      row.cells.push_back(e.what());
      rows.push_back(std::move(row));
    }
    return rows;
  });
  for (auto& r : results)
    for (auto& row : r) {
      if (row.cells[row.cells.size() - 2] == "error") ++t.errors;
      t.rows.push_back(std::move(row));
    }
  std::stable_sort(t.rows.begin(), t.rows.end(), [](const Row& a, const Row& b) { return a.key < b.key; });
  return t;
}

}  // namespace qpbs::sweep
