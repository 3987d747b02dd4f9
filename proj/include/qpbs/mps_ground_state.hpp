#pragma once

// Ground state of the open emitter chain at fixed excitation number with a
// two-site DMRG on U(1) block-sparse matrix product states, plus the phase
// diagnostics built on it (correlation matrix, power-law exponent, entropy
// profile and central charge).
//
// Site order per unit cell: emitter, then z bath sites. Bond charges count the
// excitations to the left of the bond.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qpbs/bath_core.hpp"
#include "qpbs/error.hpp"

namespace qpbs {

struct ChainSpec {
  std::size_t n_imp = 8;
  int z = 1;
  int cap = 5;               // photons per bath site
  std::size_t bond_max = 128;
  long n_exc = -1;           // -1: one excitation per emitter

  std::size_t n_sites() const { return n_imp * static_cast<std::size_t>(z + 1); }
  long target() const { return n_exc < 0 ? static_cast<long>(n_imp) : n_exc; }
  bool is_emitter(std::size_t site) const { return site % static_cast<std::size_t>(z + 1) == 0; }
  int local_cap(std::size_t site) const { return is_emitter(site) ? 1 : cap; }

  void validate() const {
    require(n_imp >= 1 && n_imp <= 40, "N_imp must lie in [1, 40]");
    require(z >= 1, "z must be positive");
    require(cap >= 2 && cap <= 5, "photon cap must lie in [2, 5]");
    require(bond_max >= 1 && bond_max <= 256, "bond_max must lie in [1, 256]");
    require(target() >= 0 && target() <= static_cast<long>(n_imp) + static_cast<long>(n_imp) * z * cap, "excitation number out of range");
  }
};

struct DmrgOptions {
  int min_sweeps = 12;
  int max_sweeps = 60;
  double energy_tol = 1e-9;       // per sweep, in units of J
  double truncation_tol = 1e-8;
  int lanczos_max = 40;
  double svd_cutoff = 1e-8;       // singular values below this are noise
  std::uint64_t seed = 1;
  bool throw_if_not_converged = true;
};

namespace mps {

using Block = Eigen::MatrixXd;
using BlockKey = std::pair<int, int>;  // (left charge, occupation)

struct Site {
  int cap = 1;
  std::map<BlockKey, Block> blocks;  // dim(ql) x dim(ql + n)
};

using BondDims = std::map<int, long>;  // charge -> dimension

// Local operator kinds in the MPO.
enum class Op { id, num, up, down };

inline bool apply_op(Op op, int n, int cap, int& out, double& amp) {
  switch (op) {
    case Op::id: out = n; amp = 1.0; return true;
    case Op::num: out = n; amp = n; return n != 0;
    case Op::up: out = n + 1; amp = std::sqrt(n + 1.0); return n < cap;
    case Op::down: out = n - 1; amp = std::sqrt(static_cast<double>(n)); return n > 0;
  }
  return false;
}

// MPO channels: 0 nothing yet, 1 creation pending, 2 annihilation pending, 3 done.
inline constexpr std::array<int, 4> kShift = {0, 1, -1, 0};

struct Term {
  int from = 0, to = 0;
  double coef = 1.0;
  Op op = Op::id;
};

inline std::vector<Term> mpo_terms(const ChainSpec& c, std::size_t site, double J, const CouplingSpec& cp) {
  std::vector<Term> t;
  t.push_back({0, 0, 1.0, Op::id});
  t.push_back({3, 3, 1.0, Op::id});
  if (c.is_emitter(site)) {
    t.push_back({0, 3, cp.delta, Op::num});
    t.push_back({0, 1, cp.omega, Op::up});
    t.push_back({0, 2, cp.omega, Op::down});
    // bath hopping across the emitter passes through
    t.push_back({1, 1, 1.0, Op::id});
    t.push_back({2, 2, 1.0, Op::id});
  } else {
    t.push_back({0, 3, 2.0 * J, Op::num});
    t.push_back({0, 1, -J, Op::up});
    t.push_back({0, 2, -J, Op::down});
    t.push_back({1, 3, 1.0, Op::down});
    t.push_back({2, 3, 1.0, Op::up});
  }
  return t;
}

// Environment per MPO channel, keyed by ket charge; bra charge = ket + kShift[w].
using Env = std::array<std::map<int, Block>, 4>;

}  // namespace mps

struct MpsGroundState {
  ChainSpec chain;
  double J = 1.0;
  CouplingSpec coupling;
  std::vector<mps::Site> sites;       // right-canonical, norm on site 0
  std::vector<mps::BondDims> bonds;   // size n_sites + 1
  double energy = 0.0;
  std::vector<double> sweep_energies;
  std::vector<double> truncation;     // max discarded weight per bond, last sweep
  double max_truncation = 0.0;
  bool converged = false;
  int sweeps = 0;

  std::size_t max_bond() const {
    std::size_t m = 0;
    for (const auto& b : bonds) {
      long d = 0;
      for (const auto& [q, n] : b) d += n;
      m = std::max(m, static_cast<std::size_t>(d));
    }
    return m;
  }
};

namespace mps::detail {

inline long dim(const BondDims& b, int q) {
  auto it = b.find(q);
  return it == b.end() ? 0 : it->second;
}

// Allowed left charges at every bond for the target sector.
inline std::vector<std::pair<int, int>> charge_ranges(const ChainSpec& c) {
  const std::size_t L = c.n_sites();
  std::vector<int> left(L + 1, 0), right(L + 1, 0);
  for (std::size_t i = 0; i < L; ++i) left[i + 1] = left[i] + c.local_cap(i);
  for (std::size_t i = L; i-- > 0;) right[i] = right[i + 1] + c.local_cap(i);
  const int n = static_cast<int>(c.target());
  std::vector<std::pair<int, int>> r(L + 1);
  for (std::size_t b = 0; b <= L; ++b) r[b] = {std::max(0, n - right[b]), std::min(n, left[b])};
  return r;
}

inline Env left_edge() {
  Env e;
  e[0][0] = Block::Identity(1, 1);
  return e;
}

inline Env right_edge(int n) {
  Env e;
  e[3][n] = Block::Identity(1, 1);
  return e;
}

inline Env grow_left(const Env& l, const Site& a, const std::vector<Term>& terms) {
  Env out;
  for (const auto& t : terms) {
    for (const auto& [ql, lm] : l[static_cast<std::size_t>(t.from)]) {
      const int qlb = ql + kShift[static_cast<std::size_t>(t.from)];
      for (int n = 0; n <= a.cap; ++n) {
        int nb = 0;
        double amp = 0.0;
        if (!apply_op(t.op, n, a.cap, nb, amp)) continue;
        auto ket = a.blocks.find({ql, n});
        auto bra = a.blocks.find({qlb, nb});
        if (ket == a.blocks.end() || bra == a.blocks.end()) continue;
        Block x = (t.coef * amp) * (bra->second.transpose() * lm * ket->second);
        auto& dst = out[static_cast<std::size_t>(t.to)][ql + n];
        if (dst.size() == 0) dst = std::move(x);
        else dst += x;
      }
    }
  }
  return out;
}

inline Env grow_right(const Env& r, const Site& b, const std::vector<Term>& terms) {
  Env out;
  for (const auto& t : terms) {
    for (const auto& [key, ket] : b.blocks) {
      const int ql = key.first;
      const int n = key.second;
      const auto& rm = r[static_cast<std::size_t>(t.to)];
      auto rit = rm.find(ql + n);
      if (rit == rm.end()) continue;
      int nb = 0;
      double amp = 0.0;
      if (!apply_op(t.op, n, b.cap, nb, amp)) continue;
      const int qlb = ql + kShift[static_cast<std::size_t>(t.from)];
      auto bra = b.blocks.find({qlb, nb});
      if (bra == b.blocks.end()) continue;
      Block x = (t.coef * amp) * (bra->second * rit->second * ket.transpose());
      auto& dst = out[static_cast<std::size_t>(t.from)][ql];
      if (dst.size() == 0) dst = std::move(x);
      else dst += x;
    }
  }
  return out;
}

// Two-site wavefunction: blocks (ql, n1, n2) stored contiguously.
struct Theta {
  struct Entry {
    int ql, n1, n2;
    long rows, cols, offset;
  };
  std::vector<Entry> entries;
  std::map<std::array<int, 3>, std::size_t> index;
  long size = 0;

  void add(int ql, int n1, int n2, long rows, long cols) {
    index[{ql, n1, n2}] = entries.size();
    entries.push_back({ql, n1, n2, rows, cols, size});
    size += rows * cols;
  }
};

inline Theta theta_layout(const BondDims& bl, const BondDims& br, int cap1, int cap2) {
  Theta th;
  for (const auto& [ql, dl] : bl)
    for (int n1 = 0; n1 <= cap1; ++n1)
      for (int n2 = 0; n2 <= cap2; ++n2) {
        const long dr = dim(br, ql + n1 + n2);
        if (dl > 0 && dr > 0) th.add(ql, n1, n2, dl, dr);
      }
  return th;
}

inline Eigen::VectorXd theta_from(const Theta& th, const Site& a, const Site& b) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(th.size);
  for (const auto& e : th.entries) {
    auto ia = a.blocks.find({e.ql, e.n1});
    auto ib = b.blocks.find({e.ql + e.n1, e.n2});
    if (ia == a.blocks.end() || ib == b.blocks.end()) continue;
    Eigen::Map<Block>(v.data() + e.offset, e.rows, e.cols) = ia->second * ib->second;
  }
  return v;
}

// Effective two-site Hamiltonian, flattened into a list of block products
// y_out += c * L * x_in * R^T with coefficients of coinciding terms merged.
struct TwoSiteOperator {
  struct Product {
    const Block* l;
    const Block* r;
    long in, out;  // entry indices
    double c;
  };
  const Theta* th = nullptr;
  std::vector<Product> plan;

  TwoSiteOperator(const Env& l, const Env& r, const std::vector<Term>& t1, const std::vector<Term>& t2, const Theta& theta,
                  int cap1, int cap2)
      : th(&theta) {
    std::map<std::array<long, 4>, double> merged;  // (in, out, wl, wr) -> coefficient
    for (const auto& a : t1)
      for (const auto& b : t2) {
        if (a.to != b.from) continue;
        const auto& lm = l[static_cast<std::size_t>(a.from)];
        const auto& rm = r[static_cast<std::size_t>(b.to)];
        if (lm.empty() || rm.empty()) continue;
        for (std::size_t k = 0; k < theta.entries.size(); ++k) {
          const auto& e = theta.entries[k];
          if (!lm.count(e.ql) || !rm.count(e.ql + e.n1 + e.n2)) continue;
          int m1 = 0, m2 = 0;
          double f1 = 0.0, f2 = 0.0;
          if (!apply_op(a.op, e.n1, cap1, m1, f1) || !apply_op(b.op, e.n2, cap2, m2, f2)) continue;
          auto oi = theta.index.find({e.ql + kShift[static_cast<std::size_t>(a.from)], m1, m2});
          if (oi == theta.index.end()) continue;
          merged[{static_cast<long>(k), static_cast<long>(oi->second), a.from, b.to}] += a.coef * b.coef * f1 * f2;
        }
      }
    for (const auto& [key, c] : merged) {
      if (c == 0.0) continue;
      const auto& e = theta.entries[static_cast<std::size_t>(key[0])];
      plan.push_back({&l[static_cast<std::size_t>(key[2])].at(e.ql), &r[static_cast<std::size_t>(key[3])].at(e.ql + e.n1 + e.n2),
                      key[0], key[1], c});
    }
  }

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y = Eigen::VectorXd::Zero(x.size());
    Block tmp;
    for (const auto& p : plan) {
      const auto& e = th->entries[static_cast<std::size_t>(p.in)];
      const auto& o = th->entries[static_cast<std::size_t>(p.out)];
      Eigen::Map<const Block> xin(x.data() + e.offset, e.rows, e.cols);
      Eigen::Map<Block> yout(y.data() + o.offset, o.rows, o.cols);
      tmp.noalias() = *p.l * xin;
      yout.noalias() += p.c * (tmp * p.r->transpose());
    }
    return y;
  }
};

inline constexpr double kLanczosResidual = 1e-10;

// Lowest eigenpair by Lanczos with full reorthogonalisation.
template <class Apply>
std::pair<double, Eigen::VectorXd> lanczos_ground(Apply&& h, Eigen::VectorXd v0, int max_iter) {
  const long n = v0.size();
  if (v0.norm() < 1e-300) v0 = Eigen::VectorXd::Ones(n);
  v0.normalize();
  const int m_max = static_cast<int>(std::min<long>(max_iter, n));
  std::vector<Eigen::VectorXd> basis;
  std::vector<double> alpha, beta;
  basis.push_back(v0);
  double e0 = 0.0;
  Eigen::VectorXd coeff;
  for (int k = 0; k < m_max; ++k) {
    Eigen::VectorXd w = h(basis[static_cast<std::size_t>(k)]);
    alpha.push_back(basis[static_cast<std::size_t>(k)].dot(w));
    for (const auto& b : basis) w -= b.dot(w) * b;
    for (const auto& b : basis) w -= b.dot(w) * b;
    const double bn = w.norm();
    const int m = k + 1;
    Eigen::VectorXd diag = Eigen::Map<Eigen::VectorXd>(alpha.data(), m);
    Eigen::VectorXd off = m > 1 ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(beta.data(), m - 1)) : Eigen::VectorXd(0);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    es.computeFromTridiagonal(diag, off);
    e0 = es.eigenvalues()(0);
    coeff = es.eigenvectors().col(0);
    // Ritz residual |H g - e0 g| = bn * |last coefficient|
    if (bn < 1e-12 || bn * std::abs(coeff(m - 1)) < kLanczosResidual) break;
    beta.push_back(bn);
    basis.push_back(w / bn);
  }
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (long i = 0; i < coeff.size(); ++i) g += coeff(i) * basis[static_cast<std::size_t>(i)];
  g.normalize();
  return {e0, g};
}

struct Split {
  Site a, b;
  BondDims mid;
  double discarded = 0.0;
};

// SVD of theta across the middle bond; `center_left` puts the singular values
// on the left tensor.
inline Split split(const Theta& th, const Eigen::VectorXd& v, const BondDims& bl, const BondDims& br, int cap1, int cap2,
                   std::size_t bond_max, double cutoff, bool center_left) {
  struct Sector {
    std::vector<std::pair<int, int>> rows;  // (ql, n1)
    std::vector<int> cols;                  // n2
    std::vector<long> roff, coff;
    Eigen::MatrixXd u, vt;
    Eigen::VectorXd s;
  };
  std::map<int, Sector> sec;
  for (const auto& e : th.entries) {
    const int qm = e.ql + e.n1;
    auto& s = sec[qm];
    if (std::find(s.rows.begin(), s.rows.end(), std::make_pair(e.ql, e.n1)) == s.rows.end()) s.rows.push_back({e.ql, e.n1});
    if (std::find(s.cols.begin(), s.cols.end(), e.n2) == s.cols.end()) s.cols.push_back(e.n2);
  }
  std::vector<std::pair<double, int>> all;  // (s, qm)
  for (auto& [qm, s] : sec) {
    std::sort(s.rows.begin(), s.rows.end());
    std::sort(s.cols.begin(), s.cols.end());
    long nr = 0, nc = 0;
    for (const auto& [ql, n1] : s.rows) {
      s.roff.push_back(nr);
      nr += dim(bl, ql);
    }
    for (int n2 : s.cols) {
      s.coff.push_back(nc);
      nc += dim(br, qm + n2);
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(nr, nc);
    for (std::size_t i = 0; i < s.rows.size(); ++i)
      for (std::size_t j = 0; j < s.cols.size(); ++j) {
        auto it = th.index.find({s.rows[i].first, s.rows[i].second, s.cols[j]});
        if (it == th.index.end()) continue;
        const auto& e = th.entries[it->second];
        m.block(s.roff[i], s.coff[j], e.rows, e.cols) = Eigen::Map<const Block>(v.data() + e.offset, e.rows, e.cols);
      }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    s.u = svd.matrixU();
    s.vt = svd.matrixV().transpose();
    s.s = svd.singularValues();
    for (long k = 0; k < s.s.size(); ++k) all.push_back({s.s(k), qm});
  }
  std::sort(all.begin(), all.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
  std::map<int, long> keep;
  double total = 0.0, kept = 0.0;
  for (const auto& [sv, qm] : all) total += sv * sv;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (i >= bond_max) break;
    if (i > 0 && all[i].first < cutoff) break;
    keep[all[i].second] += 1;
    kept += all[i].first * all[i].first;
  }
  Split out;
  out.discarded = std::max(0.0, total - kept) / std::max(total, 1e-300);
  out.a.cap = cap1;
  out.b.cap = cap2;
  const double norm = std::sqrt(kept);
  for (auto& [qm, s] : sec) {
    const long k = keep.count(qm) ? keep[qm] : 0;
    if (k == 0) continue;
    out.mid[qm] = k;
    Eigen::VectorXd sv = s.s.head(k) / norm;
    Eigen::MatrixXd u = s.u.leftCols(k);
    Eigen::MatrixXd vt = s.vt.topRows(k);
    if (center_left) u = u * sv.asDiagonal();
    else vt = sv.asDiagonal() * vt;
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
      const auto [ql, n1] = s.rows[i];
      out.a.blocks[{ql, n1}] = u.block(s.roff[i], 0, dim(bl, ql), k);
    }
    for (std::size_t j = 0; j < s.cols.size(); ++j) {
      const int n2 = s.cols[j];
      out.b.blocks[{qm, n2}] = vt.block(0, s.coff[j], k, dim(br, qm + n2));
    }
  }
  return out;
}

// Right-canonicalises sites [1, L) by LQ per left charge, pushing the rest
// into site 0 and normalising there.
inline void right_canonicalize(std::vector<Site>& sites, std::vector<BondDims>& bonds) {
  for (std::size_t i = sites.size(); i-- > 1;) {
    Site& s = sites[i];
    std::map<int, std::vector<int>> by_ql;
    for (const auto& [key, blk] : s.blocks) by_ql[key.first].push_back(key.second);
    BondDims nb;
    std::map<int, Eigen::MatrixXd> carry;  // ql -> R^T (old dim x new dim)
    Site ns;
    ns.cap = s.cap;
    for (auto& [ql, ns_list] : by_ql) {
      const long rows = dim(bonds[i], ql);
      long cols = 0;
      for (int n : ns_list) cols += s.blocks.at({ql, n}).cols();
      Eigen::MatrixXd m(rows, cols);
      long off = 0;
      for (int n : ns_list) {
        const auto& b = s.blocks.at({ql, n});
        m.block(0, off, rows, b.cols()) = b;
        off += b.cols();
      }
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(m.transpose());
      const long k = std::min(rows, cols);
      Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(cols, k);
      Eigen::MatrixXd r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
      // m = r^T q^T
      nb[ql] = k;
      carry[ql] = r.transpose();
      off = 0;
      for (int n : ns_list) {
        const long c = s.blocks.at({ql, n}).cols();
        ns.blocks[{ql, n}] = q.block(off, 0, c, k).transpose();
        off += c;
      }
    }
    s = std::move(ns);
    bonds[i] = nb;
    for (auto& [key, blk] : sites[i - 1].blocks) {
      const int qr = key.first + key.second;
      auto it = carry.find(qr);
      if (it == carry.end()) {
        blk.resize(blk.rows(), 0);
        continue;
      }
      blk = blk * it->second;
    }
    // drop empty blocks
    for (auto it = sites[i - 1].blocks.begin(); it != sites[i - 1].blocks.end();) {
      if (it->second.cols() == 0) it = sites[i - 1].blocks.erase(it);
      else ++it;
    }
  }
  double n2 = 0.0;
  for (const auto& [k, b] : sites[0].blocks) n2 += b.squaredNorm();
  const double nrm = std::sqrt(n2);
  for (auto& [k, b] : sites[0].blocks) b /= nrm;
}

inline void random_state(MpsGroundState& st, std::uint64_t seed) {
  const auto& c = st.chain;
  const std::size_t L = c.n_sites();
  const auto rng_q = charge_ranges(c);
  st.bonds.assign(L + 1, {});
  for (std::size_t b = 0; b <= L; ++b)
    for (int q = rng_q[b].first; q <= rng_q[b].second; ++q) st.bonds[b][q] = (b == 0 || b == L) ? 1 : 2;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  st.sites.assign(L, {});
  for (std::size_t i = 0; i < L; ++i) {
    st.sites[i].cap = c.local_cap(i);
    for (const auto& [ql, dl] : st.bonds[i])
      for (int n = 0; n <= st.sites[i].cap; ++n) {
        const long dr = dim(st.bonds[i + 1], ql + n);
        if (dr == 0) continue;
        Block b(dl, dr);
        for (long x = 0; x < b.size(); ++x) b.data()[x] = g(rng);
        st.sites[i].blocks[{ql, n}] = b;
      }
  }
  right_canonicalize(st.sites, st.bonds);
}

inline double site_norm2(const Site& s) {
  double n = 0.0;
  for (const auto& [k, b] : s.blocks) n += b.squaredNorm();
  return n;
}

}  // namespace mps::detail

namespace mps::detail {

// Partial contraction <psi| ... |psi> from the left edge, keyed by ket charge;
// bra charge = ket + shift.
struct Transfer {
  int shift = 0;
  std::map<int, Block> e;
};

inline Transfer transfer_start() {
  Transfer t;
  t.e[0] = Block::Identity(1, 1);
  return t;
}

inline Transfer transfer_step(const Transfer& in, const Site& s, Op op) {
  Transfer out;
  out.shift = in.shift + (op == Op::up ? 1 : op == Op::down ? -1 : 0);
  for (const auto& [ql, m] : in.e) {
    for (int n = 0; n <= s.cap; ++n) {
      int nb = 0;
      double amp = 0.0;
      if (!apply_op(op, n, s.cap, nb, amp)) continue;
      auto ket = s.blocks.find({ql, n});
      auto bra = s.blocks.find({ql + in.shift, nb});
      if (ket == s.blocks.end() || bra == s.blocks.end()) continue;
      Block x = amp * (bra->second.transpose() * m * ket->second);
      auto& dst = out.e[ql + n];
      if (dst.size() == 0) dst = std::move(x);
      else dst += x;
    }
  }
  return out;
}

// Closes against a right-canonical remainder, whose environment is the identity.
inline double transfer_close(const Transfer& t) {
  if (t.shift != 0) return 0.0;
  double v = 0.0;
  for (const auto& [q, m] : t.e) v += m.trace();
  return v;
}

// Left contractions with identities: plain[i] covers sites [0, i).
inline std::vector<Transfer> plain_transfers(const std::vector<Site>& sites) {
  std::vector<Transfer> p(sites.size() + 1);
  p[0] = transfer_start();
  for (std::size_t i = 0; i < sites.size(); ++i) p[i + 1] = transfer_step(p[i], sites[i], Op::id);
  return p;
}

}  // namespace mps::detail

inline double state_norm2(const MpsGroundState& st) {
  return mps::detail::transfer_close(mps::detail::plain_transfers(st.sites).back());
}

// Occupation expectation per site.
inline std::vector<double> densities(const MpsGroundState& st) {
  using namespace mps::detail;
  const auto plain = plain_transfers(st.sites);
  std::vector<double> n(st.sites.size());
  for (std::size_t i = 0; i < st.sites.size(); ++i) n[i] = transfer_close(transfer_step(plain[i], st.sites[i], mps::Op::num));
  return n;
}

inline double total_excitation(const MpsGroundState& st) {
  double t = 0.0;
  for (double x : densities(st)) t += x;
  return t;
}

inline constexpr double kSectorDriftTol = 1e-4;

inline void check_sector(const MpsGroundState& st) {
  const double n = total_excitation(st);
  const double target = static_cast<double>(st.chain.target());
  if (std::abs(n - target) > kSectorDriftTol)
    throw Error(Errc::sector_drift, "<N> = " + std::to_string(n) + ", target " + std::to_string(target));
}

// Two-site DMRG in the sector N_exc = chain.target().
inline MpsGroundState ground_state(const ChainSpec& chain, double J, const CouplingSpec& cp, const DmrgOptions& opt = {}) {
  using namespace mps;
  using namespace mps::detail;
  chain.validate();
  cp.validate();
  MpsGroundState st;
  st.chain = chain;
  st.J = J;
  st.coupling = cp;
  random_state(st, opt.seed);
  const std::size_t L = chain.n_sites();
  const int n_tot = static_cast<int>(chain.target());
  std::vector<std::vector<Term>> terms(L);
  for (std::size_t i = 0; i < L; ++i) terms[i] = mpo_terms(chain, i, J, cp);

  std::vector<Env> left(L + 1), right(L + 1);
  left[0] = left_edge();
  right[L] = right_edge(n_tot);
  for (std::size_t i = L; i-- > 1;) right[i] = grow_right(right[i + 1], st.sites[i], terms[i]);

  double last = std::numeric_limits<double>::infinity();
  st.truncation.assign(L + 1, 0.0);
  for (int sweep = 0; sweep < opt.max_sweeps; ++sweep) {
    double e = 0.0;
    double max_trunc = 0.0;
    const auto step = [&](std::size_t i, bool to_right) {
      const Theta th = theta_layout(st.bonds[i], st.bonds[i + 2], st.sites[i].cap, st.sites[i + 1].cap);
      const Eigen::VectorXd v0 = theta_from(th, st.sites[i], st.sites[i + 1]);
      const TwoSiteOperator h(left[i], right[i + 2], terms[i], terms[i + 1], th, st.sites[i].cap, st.sites[i + 1].cap);
      auto [ev, vec] = lanczos_ground([&](const Eigen::VectorXd& x) { return h.apply(x); }, v0, opt.lanczos_max);
      e = ev;
      Split sp = split(th, vec, st.bonds[i], st.bonds[i + 2], st.sites[i].cap, st.sites[i + 1].cap, chain.bond_max,
                       opt.svd_cutoff, !to_right);
      st.sites[i] = std::move(sp.a);
      st.sites[i + 1] = std::move(sp.b);
      st.bonds[i + 1] = std::move(sp.mid);
      st.truncation[i + 1] = sp.discarded;
      max_trunc = std::max(max_trunc, sp.discarded);
      if (to_right) left[i + 1] = grow_left(left[i], st.sites[i], terms[i]);
      else right[i + 1] = grow_right(right[i + 2], st.sites[i + 1], terms[i + 1]);
    };
    for (std::size_t i = 0; i + 1 < L; ++i) step(i, true);
    for (std::size_t i = L - 1; i-- > 0;) step(i, false);
    st.sweep_energies.push_back(e);
    st.sweeps = sweep + 1;
    st.energy = e;
    st.max_truncation = max_trunc;
    const double delta = std::abs(last - e);
    last = e;
    if (sweep + 1 >= opt.min_sweeps && delta < opt.energy_tol * J && max_trunc < opt.truncation_tol) {
      st.converged = true;
      break;
    }
  }
  if (!st.converged && opt.throw_if_not_converged) {
    const std::size_t n = st.sweep_energies.size();
    const double d = n >= 2 ? st.sweep_energies[n - 1] - st.sweep_energies[n - 2] : 0.0;
    char msg[128];
    std::snprintf(msg, sizeof msg, "last energy change %.3e, max truncation %.3e after %d sweeps", d, st.max_truncation, st.sweeps);
    throw Error(Errc::not_converged, msg);
  }
  check_sector(st);
  return st;
}

// F_{ab} = <a_a^dagger a_b> over all sites in chain order (cell * (z + 1) + alpha).
inline Eigen::MatrixXd correlation_matrix(const MpsGroundState& st) {
  using namespace mps::detail;
  using mps::Op;
  const std::size_t L = st.sites.size();
  const auto plain = plain_transfers(st.sites);
  Eigen::MatrixXd f = Eigen::MatrixXd::Zero(static_cast<long>(L), static_cast<long>(L));
  for (std::size_t i = 0; i < L; ++i) {
    const long a = static_cast<long>(i);
    f(a, a) = transfer_close(transfer_step(plain[i], st.sites[i], Op::num));
    Transfer t = transfer_step(plain[i], st.sites[i], Op::up);
    for (std::size_t j = i + 1; j < L && !t.e.empty(); ++j) {
      const double v = transfer_close(transfer_step(t, st.sites[j], Op::down));
      f(a, static_cast<long>(j)) = v;
      f(static_cast<long>(j), a) = v;  // real wavefunction
      t = transfer_step(t, st.sites[j], Op::id);
    }
  }
  return f;
}

// Schmidt values at every bond, from a left sweep of SVDs on a copy.
inline std::vector<Eigen::VectorXd> schmidt_spectra(const MpsGroundState& st) {
  using mps::Block;
  using mps::detail::dim;
  std::vector<mps::Site> sites = st.sites;
  std::vector<mps::BondDims> bonds = st.bonds;
  const std::size_t L = sites.size();
  std::vector<Eigen::VectorXd> out(L + 1, Eigen::VectorXd::Ones(1));
  for (std::size_t i = 0; i + 1 < L; ++i) {
    std::map<int, std::vector<int>> by_qr;  // right charge -> ordered occupations
    for (const auto& [key, b] : sites[i].blocks) by_qr[key.first + key.second].push_back(key.second);
    std::vector<double> all;
    mps::BondDims nb;
    std::map<int, Block> carry;  // qr -> S Vt
    for (auto& [qr, ns] : by_qr) {
      long rows = 0;
      for (int n : ns) rows += dim(bonds[i], qr - n);
      const long cols = dim(bonds[i + 1], qr);
      Block m(rows, cols);
      long off = 0;
      for (int n : ns) {
        const auto& b = sites[i].blocks.at({qr - n, n});
        m.block(off, 0, b.rows(), cols) = b;
        off += b.rows();
      }
      Eigen::BDCSVD<Block> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
      const long k = svd.singularValues().size();
      nb[qr] = k;
      for (long x = 0; x < k; ++x) all.push_back(svd.singularValues()(x));
      carry[qr] = svd.singularValues().asDiagonal() * svd.matrixV().transpose();
      off = 0;
      for (int n : ns) {
        auto& b = sites[i].blocks.at({qr - n, n});
        const long r = b.rows();
        b = svd.matrixU().block(off, 0, r, k);
        off += r;
      }
    }
    for (auto& [key, b] : sites[i + 1].blocks) b = carry.at(key.first) * b;
    bonds[i + 1] = nb;
    std::sort(all.begin(), all.end(), std::greater<>());
    out[i + 1] = Eigen::Map<Eigen::VectorXd>(all.data(), static_cast<long>(all.size()));
  }
  return out;
}

inline double entanglement_entropy(const Eigen::VectorXd& s) {
  double e = 0.0;
  for (long i = 0; i < s.size(); ++i) {
    const double p = s(i) * s(i);
    if (p > 1e-300) e -= p * std::log(p);
  }
  return e;
}

struct EntropyFit {
  std::vector<double> profile;  // S(L_A) for L_A = 0..N_imp cells
  std::size_t lo = 0, hi = 0;   // interior window in cells, inclusive
  std::optional<double> c, g, residual;  // rms residual of the fit
  double interior_spread = 0.0;          // max - min of S over the window
};

inline constexpr std::size_t kMinEntropyCuts = 10;

inline std::size_t edge_trim(std::size_t n_imp) { return std::max<std::size_t>(1, (n_imp + 4) / 8); }

// Entropy at every cut between unit cells and its spread over the interior
// window (an eighth trimmed from each edge); no fit.
inline EntropyFit entropy_profile(const MpsGroundState& st) {
  const auto spectra = schmidt_spectra(st);
  const std::size_t n = st.chain.n_imp;
  const std::size_t cell = static_cast<std::size_t>(st.chain.z + 1);
  EntropyFit r;
  for (std::size_t la = 0; la <= n; ++la) r.profile.push_back(entanglement_entropy(spectra[la * cell]));
  const std::size_t trim = edge_trim(n);
  r.lo = std::min(trim, n / 2);
  r.hi = std::max(r.lo, n - trim);
  double mn = std::numeric_limits<double>::infinity(), mx = -mn;
  for (std::size_t la = r.lo; la <= r.hi; ++la) {
    mn = std::min(mn, r.profile[la]);
    mx = std::max(mx, r.profile[la]);
  }
  r.interior_spread = mx - mn;
  return r;
}

// Adds S = (c/6) ln[(L/pi) sin(pi L_A / L)] + g fitted over the interior window.
inline void fit_central_charge(EntropyFit& r, std::size_t n_cells) {
  const std::size_t pts = r.hi - r.lo + 1;
  if (pts < kMinEntropyCuts)
    throw Error(Errc::fit_failure, std::to_string(pts) + " interior cuts, need " + std::to_string(kMinEntropyCuts));
  Eigen::MatrixXd a(static_cast<long>(pts), 2);
  Eigen::VectorXd y(static_cast<long>(pts));
  const double len = static_cast<double>(n_cells);
  for (std::size_t k = 0; k < pts; ++k) {
    const double la = static_cast<double>(r.lo + k);
    a(static_cast<long>(k), 0) = std::log(len / M_PI * std::sin(M_PI * la / len)) / 6.0;
    a(static_cast<long>(k), 1) = 1.0;
    y(static_cast<long>(k)) = r.profile[r.lo + k];
  }
  const Eigen::Vector2d sol = a.colPivHouseholderQr().solve(y);
  r.c = sol(0);
  r.g = sol(1);
  r.residual = std::sqrt((a * sol - y).squaredNorm() / static_cast<double>(pts));
}

inline EntropyFit entropy_profile_and_central_charge(const MpsGroundState& st) {
  EntropyFit r = entropy_profile(st);
  fit_central_charge(r, st.chain.n_imp);
  return r;
}

// Fits on the row i0 of one site class: |F(i0, i0 + r)| for r_min <= r <= r_max.
struct ExponentWindow {
  std::size_t i0 = 0, r_min = 1, r_max = 1;
};

inline constexpr std::size_t kMinExponentPoints = 8;

// The reference run used i0 = 10 and 5 <= r <= 55 at 80 cells; scaled to n_imp.
inline ExponentWindow scaled_exponent_window(std::size_t n_imp) {
  const double s = static_cast<double>(n_imp) / 80.0;
  ExponentWindow w;
  w.i0 = static_cast<std::size_t>(std::lround(10.0 * s));
  w.r_min = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(5.0 * s)));
  w.r_max = static_cast<std::size_t>(std::lround(55.0 * s));
  if (n_imp > w.i0 + 1) w.r_max = std::min(w.r_max, n_imp - 1 - w.i0);
  return w;
}

struct ExponentFit {
  double f = 0.0;
  double residual = 0.0;
  ExponentWindow window;
};

inline ExponentFit fit_exponent(const Eigen::MatrixXd& F, int z, int alpha, const ExponentWindow& w) {
  require(alpha >= 0 && alpha <= z, "site class out of range");
  const std::size_t cell = static_cast<std::size_t>(z + 1);
  const std::size_t n_cells = static_cast<std::size_t>(F.rows()) / cell;
  std::vector<double> xs, ys;
  for (std::size_t r = w.r_min; r <= w.r_max && w.i0 + r < n_cells; ++r) {
    const double v = std::abs(F(static_cast<long>(w.i0 * cell + static_cast<std::size_t>(alpha)),
                                static_cast<long>((w.i0 + r) * cell + static_cast<std::size_t>(alpha))));
    if (!(v > 0.0)) throw Error(Errc::fit_failure, "vanishing correlation at distance " + std::to_string(r));
    xs.push_back(std::log(static_cast<double>(r)));
    ys.push_back(std::log(v));
  }
  if (xs.size() < kMinExponentPoints)
    throw Error(Errc::window_too_small, std::to_string(xs.size()) + " points, need " + std::to_string(kMinExponentPoints));
  Eigen::MatrixXd a(static_cast<long>(xs.size()), 2);
  Eigen::VectorXd y = Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<long>(ys.size()));
  for (std::size_t k = 0; k < xs.size(); ++k) {
    a(static_cast<long>(k), 0) = xs[k];
    a(static_cast<long>(k), 1) = 1.0;
  }
  const Eigen::Vector2d sol = a.colPivHouseholderQr().solve(y);
  return {sol(0), std::sqrt((a * sol - y).squaredNorm() / static_cast<double>(xs.size())), w};
}

inline ExponentFit fit_exponent(const Eigen::MatrixXd& F, int z, int alpha) {
  return fit_exponent(F, z, alpha, scaled_exponent_window(static_cast<std::size_t>(F.rows()) / static_cast<std::size_t>(z + 1)));
}

enum class Phase { superfluid, mott, undetermined };

inline const char* to_string(Phase p) noexcept {
  switch (p) {
    case Phase::superfluid: return "superfluid";
    case Phase::mott: return "mott";
    case Phase::undetermined: return "undetermined";
  }
  return "?";
}

inline constexpr double kSuperfluidRatio = 3.0;
inline constexpr double kMottRatio = 1.5;
inline constexpr double kFlatEntropy = 0.05;
inline constexpr double kFitResidualMax = 0.02;

struct PhaseDiagnostics {
  std::vector<double> corr_eigs;   // top 10, descending
  std::optional<ExponentFit> exponent_emitter, exponent_bath;
  EntropyFit entropy;
  double trace = 0.0;
  Phase phase = Phase::undetermined;

  double dominant_ratio() const {
    if (corr_eigs.size() < 2) return std::numeric_limits<double>::infinity();
    return corr_eigs[1] > 0.0 ? corr_eigs[0] / corr_eigs[1] : std::numeric_limits<double>::infinity();
  }
};

inline Phase classify_phase(const PhaseDiagnostics& d) {
  const double ratio = d.dominant_ratio();
  if (ratio > kSuperfluidRatio && d.entropy.residual && *d.entropy.residual < kFitResidualMax) return Phase::superfluid;
  if (d.entropy.interior_spread < kFlatEntropy && ratio < kMottRatio) return Phase::mott;
  return Phase::undetermined;
}

inline PhaseDiagnostics diagnose(const MpsGroundState& st) {
  PhaseDiagnostics d;
  const Eigen::MatrixXd f = correlation_matrix(st);
  d.trace = f.trace();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  for (long i = ev.size() - 1; i >= 0 && d.corr_eigs.size() < 10; --i) d.corr_eigs.push_back(ev(i));
  d.entropy = entropy_profile(st);
  try {
    fit_central_charge(d.entropy, st.chain.n_imp);
  } catch (const Error&) {
    // too few cuts; the label then rests on the flatness test
  }
  const auto try_fit = [&](int alpha) -> std::optional<ExponentFit> {
    try {
      return fit_exponent(f, st.chain.z, alpha);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  d.exponent_emitter = try_fit(0);
  d.exponent_bath = try_fit(1);
  d.phase = classify_phase(d);
  return d;
}

namespace mps::detail {

inline constexpr char kCheckpointMagic[8] = {'Q', 'P', 'B', 'S', 'M', 'P', 'S', '1'};

template <class T>
void put(std::ostream& o, const T& v) {
  o.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& i) {
  T v{};
  i.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!i) throw Error(Errc::io_error, "truncated checkpoint");
  return v;
}

inline void put_vec(std::ostream& o, const std::vector<double>& v) {
  put<std::uint64_t>(o, v.size());
  o.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> get_vec(std::istream& i) {
  const auto n = get<std::uint64_t>(i);
  if (n > (1u << 30)) throw Error(Errc::io_error, "corrupt checkpoint");
  std::vector<double> v(n);
  i.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
  if (!i) throw Error(Errc::io_error, "truncated checkpoint");
  return v;
}

}  // namespace mps::detail

// Raw little-endian dump of every field; loading restores the state bit for bit.
inline void save_checkpoint(const MpsGroundState& st, const std::string& path) {
  using namespace mps::detail;
  std::ofstream o(path, std::ios::binary);
  if (!o) throw Error(Errc::io_error, "cannot open " + path);
  o.write(kCheckpointMagic, sizeof kCheckpointMagic);
  put<std::uint64_t>(o, st.chain.n_imp);
  put<std::int32_t>(o, st.chain.z);
  put<std::int32_t>(o, st.chain.cap);
  put<std::uint64_t>(o, st.chain.bond_max);
  put<std::int64_t>(o, st.chain.n_exc);
  put(o, st.J);
  put(o, st.coupling.delta);
  put(o, st.coupling.omega);
  put(o, st.energy);
  put(o, st.max_truncation);
  put<std::uint8_t>(o, st.converged ? 1 : 0);
  put<std::int32_t>(o, st.sweeps);
  put_vec(o, st.sweep_energies);
  put_vec(o, st.truncation);
  put<std::uint64_t>(o, st.bonds.size());
  for (const auto& b : st.bonds) {
    put<std::uint64_t>(o, b.size());
    for (const auto& [q, d] : b) {
      put<std::int32_t>(o, q);
      put<std::int64_t>(o, d);
    }
  }
  put<std::uint64_t>(o, st.sites.size());
  for (const auto& s : st.sites) {
    put<std::int32_t>(o, s.cap);
    put<std::uint64_t>(o, s.blocks.size());
    for (const auto& [k, b] : s.blocks) {
      put<std::int32_t>(o, k.first);
      put<std::int32_t>(o, k.second);
      put<std::int64_t>(o, b.rows());
      put<std::int64_t>(o, b.cols());
      o.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size() * sizeof(double)));
    }
  }
  if (!o) throw Error(Errc::io_error, "write failed for " + path);
}

inline MpsGroundState load_checkpoint(const std::string& path) {
  using namespace mps::detail;
  std::ifstream i(path, std::ios::binary);
  if (!i) throw Error(Errc::io_error, "cannot open " + path);
  char magic[sizeof kCheckpointMagic];
  i.read(magic, sizeof magic);
  if (!i || std::memcmp(magic, kCheckpointMagic, sizeof magic) != 0) throw Error(Errc::io_error, "not a checkpoint: " + path);
  MpsGroundState st;
  st.chain.n_imp = get<std::uint64_t>(i);
  st.chain.z = get<std::int32_t>(i);
  st.chain.cap = get<std::int32_t>(i);
  st.chain.bond_max = get<std::uint64_t>(i);
  st.chain.n_exc = get<std::int64_t>(i);
  st.J = get<double>(i);
  st.coupling.delta = get<double>(i);
  st.coupling.omega = get<double>(i);
  st.energy = get<double>(i);
  st.max_truncation = get<double>(i);
  st.converged = get<std::uint8_t>(i) != 0;
  st.sweeps = get<std::int32_t>(i);
  st.sweep_energies = get_vec(i);
  st.truncation = get_vec(i);
  st.bonds.resize(get<std::uint64_t>(i));
  if (st.bonds.size() != st.chain.n_sites() + 1) throw Error(Errc::io_error, "bond count mismatch");
  for (auto& b : st.bonds) {
    const auto n = get<std::uint64_t>(i);
    for (std::uint64_t k = 0; k < n; ++k) {
      const int q = get<std::int32_t>(i);
      b[q] = get<std::int64_t>(i);
    }
  }
  st.sites.resize(get<std::uint64_t>(i));
  if (st.sites.size() != st.chain.n_sites()) throw Error(Errc::io_error, "site count mismatch");
  for (auto& s : st.sites) {
    s.cap = get<std::int32_t>(i);
    const auto n = get<std::uint64_t>(i);
    for (std::uint64_t k = 0; k < n; ++k) {
      const int ql = get<std::int32_t>(i);
      const int occ = get<std::int32_t>(i);
      const auto rows = get<std::int64_t>(i);
      const auto cols = get<std::int64_t>(i);
      if (rows < 0 || cols < 0 || rows > 4096 || cols > 4096) throw Error(Errc::io_error, "corrupt block");
      mps::Block b(rows, cols);
      i.read(reinterpret_cast<char*>(b.data()), static_cast<std::streamsize>(b.size() * sizeof(double)));
      if (!i) throw Error(Errc::io_error, "truncated checkpoint");
      s.blocks[{ql, occ}] = std::move(b);
    }
  }
  return st;
}

}  // namespace qpbs
