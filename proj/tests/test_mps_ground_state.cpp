#include <cmath>
#include <complex>
#include <map>
#include <string>
#include <tuple>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include <gtest/gtest.h>

#include "qpbs/ed_oracle.hpp"
#include "qpbs/mps_ground_state.hpp"

using namespace qpbs;

namespace {

ChainSpec chain(std::size_t n_imp, int z, int cap, std::size_t bond = 128) {
  ChainSpec c;
  c.n_imp = n_imp;
  c.z = z;
  c.cap = cap;
  c.bond_max = bond;
  return c;
}

double ed_ground(std::size_t n_imp, int z, int cap, const CouplingSpec& cp) {
  const auto b = ed::build_sector(ed::Geometry::open_array(n_imp, static_cast<std::size_t>(z)), static_cast<int>(n_imp), cap);
  return ed::sector_spectrum(b, 1.0, cp, 1).eigenvalues[0];
}

}  // namespace

class SmallChain : public ::testing::TestWithParam<CouplingSpec> {};

TEST_P(SmallChain, MatchesOpenChainED) {
  const auto cp = GetParam();
  const auto st = ground_state(chain(4, 1, 3), 1.0, cp);
  const double ref = ed_ground(4, 1, 3, cp);
  EXPECT_TRUE(st.converged);
  EXPECT_NEAR(st.energy, ref, 1e-7);
  EXPECT_LE(st.energy, ref + 1e-7);
  EXPECT_NEAR(state_norm2(st), 1.0, 1e-10);
  EXPECT_NEAR(total_excitation(st), 4.0, 1e-6);
}

INSTANTIATE_TEST_SUITE_P(Points, SmallChain,
                         ::testing::Values(CouplingSpec{0.0, 0.15}, CouplingSpec{0.0, 2.0}, CouplingSpec{-1.0, 1.0},
                                           CouplingSpec{1.5, 0.7}),
                         [](const auto& info) { return "p" + std::to_string(info.index); });

namespace {

struct EdState {
  ed::SectorBasis basis;
  Eigen::VectorXcd psi;
};

EdState ed_state(std::size_t n_imp, int z, int cap, const CouplingSpec& cp) {
  EdState s{ed::build_sector(ed::Geometry::open_array(n_imp, static_cast<std::size_t>(z)), static_cast<int>(n_imp), cap), {}};
  s.psi = ed::sector_spectrum(s.basis, 1.0, cp, 1, true).eigenvectors.col(0);
  return s;
}

// Chain site (cell * (z + 1) + alpha) to ED mode (emitters first, then sites).
std::size_t mode_of(std::size_t site, std::size_t n_imp, int z) {
  const std::size_t cell = site / static_cast<std::size_t>(z + 1);
  const std::size_t alpha = site % static_cast<std::size_t>(z + 1);
  return alpha == 0 ? cell : n_imp + cell * static_cast<std::size_t>(z) + alpha - 1;
}

}  // namespace

TEST(SmallChain, DiagnosticsMatchED) {
  const std::size_t n = 4;
  const int z = 1;
  const CouplingSpec cp{0.0, 0.7};
  const auto st = ground_state(chain(n, z, 3), 1.0, cp);
  const auto ref = ed_state(n, z, 3, cp);
  const std::size_t sites = n * static_cast<std::size_t>(z + 1);

  // correlation matrix
  const auto f = correlation_matrix(st);
  for (std::size_t a = 0; a < sites; ++a)
    for (std::size_t b = 0; b < sites; ++b) {
      const std::size_t ma = mode_of(a, n, z), mb = mode_of(b, n, z);
      std::complex<double> v = 0.0;
      for (std::size_t k = 0; k < ref.basis.dim(); ++k) {
        ed::Config c = ref.basis.configs[k];
        if (c[mb] == 0) continue;
        double amp = std::sqrt(static_cast<double>(c[mb]));
        c[mb] = static_cast<char>(c[mb] - 1);
        amp *= std::sqrt(c[ma] + 1.0);
        c[ma] = static_cast<char>(c[ma] + 1);
        auto it = ref.basis.index.find(c);
        if (it == ref.basis.index.end()) continue;
        v += std::conj(ref.psi(static_cast<long>(it->second))) * amp * ref.psi(static_cast<long>(k));
      }
      EXPECT_NEAR(f(static_cast<long>(a), static_cast<long>(b)), v.real(), 1e-7) << a << "," << b;
    }

  // entropy at every cut between cells
  const auto ent = entropy_profile(st);
  for (std::size_t la = 1; la < n; ++la) {
    std::map<std::string, long> left, right;
    std::vector<std::tuple<long, long, std::complex<double>>> entries;
    for (std::size_t k = 0; k < ref.basis.dim(); ++k) {
      std::string l, r;
      for (std::size_t s = 0; s < sites; ++s)
        (s < la * static_cast<std::size_t>(z + 1) ? l : r).push_back(ref.basis.configs[k][mode_of(s, n, z)]);
      const long li = left.emplace(l, static_cast<long>(left.size())).first->second;
      const long ri = right.emplace(r, static_cast<long>(right.size())).first->second;
      entries.emplace_back(li, ri, ref.psi(static_cast<long>(k)));
    }
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(static_cast<long>(left.size()), static_cast<long>(right.size()));
    for (const auto& [li, ri, v] : entries) m(li, ri) = v;
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXcd>(m).singularValues();
    EXPECT_NEAR(ent.profile[la], entanglement_entropy(sv), 1e-7) << la;
  }
}

TEST(SmallChain, TwoBathSitesPerCell) {
  const CouplingSpec cp{-0.5, 1.0};
  const auto st = ground_state(chain(3, 2, 3), 1.0, cp);
  EXPECT_NEAR(st.energy, ed_ground(3, 2, 3, cp), 1e-7);
}

TEST(SmallChain, EnergyDecreasesAcrossSweeps) {
  const auto st = ground_state(chain(6, 1, 3), 1.0, {0.0, 0.5});
  for (std::size_t i = 1; i < st.sweep_energies.size(); ++i)
    EXPECT_LE(st.sweep_energies[i], st.sweep_energies[i - 1] + 1e-10);
}

TEST(ProductState, DecoupledEmittersBelowBand) {
  const CouplingSpec cp{-1.0, 0.0};
  const auto st = ground_state(chain(8, 1, 3), 1.0, cp);
  EXPECT_NEAR(st.energy, 8.0 * cp.delta, 1e-10);
  EXPECT_EQ(st.max_bond(), 1u);
  const auto f = correlation_matrix(st);
  for (long i = 0; i < f.rows(); ++i)
    for (long j = 0; j < f.cols(); ++j) {
      const double want = (i == j && i % 2 == 0) ? 1.0 : 0.0;
      EXPECT_NEAR(f(i, j), want, 1e-10);
    }
  const auto ent = entropy_profile(st);
  for (double s : ent.profile) EXPECT_NEAR(s, 0.0, 1e-10);
  EXPECT_EQ(diagnose(st).phase, Phase::mott);
}

class MidChain : public ::testing::Test {
 protected:
  static void SetUpTestSuite() { state_ = new MpsGroundState(ground_state(chain(12, 1, 4, 96), 1.0, {0.0, 0.5})); }
  static void TearDownTestSuite() {
    delete state_;
    state_ = nullptr;
  }
  static MpsGroundState* state_;
};

MpsGroundState* MidChain::state_ = nullptr;

TEST_F(MidChain, NormAndSector) {
  EXPECT_TRUE(state_->converged);
  EXPECT_LT(state_->max_truncation, 1e-8);
  EXPECT_NEAR(state_norm2(*state_), 1.0, 1e-10);
  EXPECT_NEAR(total_excitation(*state_), 12.0, 1e-6);
}

TEST_F(MidChain, CorrelationMatrixHermitianPositive) {
  const auto f = correlation_matrix(*state_);
  EXPECT_LT((f - f.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(f.trace(), 12.0, 1e-6);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(f);
  EXPECT_GT(es.eigenvalues().minCoeff(), -1e-10);
}

TEST_F(MidChain, EntropyReflectionSymmetric) {
  const auto ent = entropy_profile(*state_);
  const std::size_t n = ent.profile.size() - 1;
  for (std::size_t la = 0; la <= n; ++la) EXPECT_NEAR(ent.profile[la], ent.profile[n - la], 5e-3) << la;
}

TEST_F(MidChain, DensitiesSumToSector) {
  double t = 0.0;
  for (double x : densities(*state_)) {
    EXPECT_GE(x, -1e-12);
    t += x;
  }
  EXPECT_NEAR(t, 12.0, 1e-6);
}

TEST_F(MidChain, CheckpointRoundTripIsBitExact) {
  const auto path = (std::filesystem::temp_directory_path() / "qpbs_mps_roundtrip.bin").string();
  save_checkpoint(*state_, path);
  const auto back = load_checkpoint(path);
  std::filesystem::remove(path);
  EXPECT_EQ(std::memcmp(&back.energy, &state_->energy, sizeof(double)), 0);
  EXPECT_EQ(back.sweep_energies, state_->sweep_energies);
  EXPECT_EQ(back.truncation, state_->truncation);
  EXPECT_EQ(back.bonds, state_->bonds);
  ASSERT_EQ(back.sites.size(), state_->sites.size());
  for (std::size_t i = 0; i < back.sites.size(); ++i) {
    ASSERT_EQ(back.sites[i].blocks.size(), state_->sites[i].blocks.size());
    for (const auto& [k, b] : state_->sites[i].blocks) {
      const auto& c = back.sites[i].blocks.at(k);
      ASSERT_EQ(c.rows(), b.rows());
      ASSERT_EQ(c.cols(), b.cols());
      EXPECT_EQ(std::memcmp(c.data(), b.data(), sizeof(double) * static_cast<std::size_t>(b.size())), 0);
    }
  }
  // diagnostics from the reloaded state are identical
  const auto f1 = correlation_matrix(*state_);
  const auto f2 = correlation_matrix(back);
  EXPECT_EQ(std::memcmp(f1.data(), f2.data(), sizeof(double) * static_cast<std::size_t>(f1.size())), 0);
}

TEST(Checkpoint, RejectsForeignFile) {
  const auto path = (std::filesystem::temp_directory_path() / "qpbs_not_a_checkpoint.bin").string();
  {
    std::ofstream o(path);
    o << "hello";
  }
  try {
    load_checkpoint(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::io_error);
  }
  std::filesystem::remove(path);
}

TEST(PhotonCap, FourAndFiveAgree) {
  for (const CouplingSpec cp : {CouplingSpec{0.0, 0.15}, CouplingSpec{0.0, 2.0}}) {
    const double e4 = ground_state(chain(6, 1, 4), 1.0, cp).energy;
    const double e5 = ground_state(chain(6, 1, 5), 1.0, cp).energy;
    EXPECT_LT(std::abs(e4 - e5), 1e-5) << cp.omega;
  }
}

TEST(Convergence, RaisesWhenBondCapTooSmall) {
  try {
    ground_state(chain(8, 1, 3, 2), 1.0, {0.0, 0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::not_converged);
  }
}

TEST(ExponentFit, ExactPowerLaw) {
  const long n = 80;
  for (int z : {1, 2}) {
    Eigen::MatrixXd f = Eigen::MatrixXd::Zero(n * (z + 1), n * (z + 1));
    for (long i = 0; i < f.rows(); ++i)
      for (long j = 0; j < f.cols(); ++j) {
        const long r = std::abs(i / (z + 1) - j / (z + 1));
        f(i, j) = r == 0 ? 1.0 : std::pow(static_cast<double>(r), -0.25);
      }
    for (int alpha = 0; alpha <= z; ++alpha) {
      const auto fit = fit_exponent(f, z, alpha);
      EXPECT_NEAR(fit.f, -0.25, 1e-6);
      EXPECT_EQ(fit.window.i0, 10u);
      EXPECT_EQ(fit.window.r_min, 5u);
      EXPECT_EQ(fit.window.r_max, 55u);
    }
  }
}

TEST(ExponentFit, WindowTooSmall) {
  const Eigen::MatrixXd f = Eigen::MatrixXd::Ones(16, 16);
  try {
    fit_exponent(f, 1, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::window_too_small);
  }
}

TEST(EntropyFit, ExactConformalProfile) {
  EntropyFit r;
  const std::size_t n = 40;
  for (std::size_t la = 0; la <= n; ++la) {
    const double x = la == 0 || la == n ? 0.0 : std::log(n / M_PI * std::sin(M_PI * la / n));
    r.profile.push_back(x / 6.0 + 0.3);
  }
  r.lo = 5;
  r.hi = 35;
  fit_central_charge(r, n);
  EXPECT_NEAR(*r.c, 1.0, 1e-10);
  EXPECT_NEAR(*r.g, 0.3, 1e-10);
  EXPECT_LT(*r.residual, 1e-10);
  r.hi = 13;
  EXPECT_THROW(fit_central_charge(r, n), Error);
}

TEST(Classify, Rules) {
  PhaseDiagnostics d;
  d.corr_eigs = {10.0, 1.0, 0.5};
  d.entropy.residual = 0.001;
  d.entropy.interior_spread = 0.5;
  EXPECT_EQ(classify_phase(d), Phase::superfluid);
  d.entropy.residual = 0.5;
  EXPECT_EQ(classify_phase(d), Phase::undetermined);
  d.corr_eigs = {1.2, 1.0, 0.9};
  d.entropy.interior_spread = 0.01;
  EXPECT_EQ(classify_phase(d), Phase::mott);
  d.entropy.interior_spread = 0.2;
  EXPECT_EQ(classify_phase(d), Phase::undetermined);
}

TEST(Phases, StrongCouplingIsMott) {
  const auto st = ground_state(chain(12, 1, 4, 64), 1.0, {0.0, 10.0});
  const auto d = diagnose(st);
  EXPECT_EQ(d.phase, Phase::mott);
  EXPECT_LT(d.dominant_ratio(), 1.5);
  EXPECT_LT(d.entropy.interior_spread, 0.05);
}

TEST_F(MidChain, WeakCouplingHasDominantMode) {
  const auto d = diagnose(*state_);
  EXPECT_GT(d.dominant_ratio(), 3.0);
  ASSERT_TRUE(d.exponent_emitter && d.exponent_bath);
  EXPECT_LT(d.exponent_emitter->f, 0.0);
  EXPECT_LT(d.exponent_bath->f, 0.0);
}
