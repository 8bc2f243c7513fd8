#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "nls2d/spectral.hpp"
#include "oracles.hpp"

using namespace nls2d;

namespace {

const Grid2D& grid128() {
  static Grid2D g(128, 30.0);
  return g;
}

const SpectralData& default_state() {
  static SpectralData sd = ground_state(gaussian_well(grid128(), 5.0));
  return sd;
}

ComplexField random_field(const Grid2D& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  ComplexField f(g);
  for (auto& z : f.values()) z = cplx(nd(rng), nd(rng));
  // smooth it so derivatives stay moderate
  cvec fh = fft2(f);
  for (std::size_t i = 0; i < fh.size(); ++i) fh[i] *= std::exp(-g.ksq()[i]);
  return ifft2(g, fh);
}

auto well(double depth) {
  return [depth](double r) { return -depth * std::exp(-r * r); };
}

}  // namespace

TEST(GroundState, MatchesRadialOracle) {
  const auto& sd = default_state();
  double oracle = oracle::radial_ground_energy(well(5.0), 0, 15.0, 3000);
  EXPECT_NEAR(sd.e_star / oracle, 1.0, 1e-4) << sd.e_star << " vs " << oracle;
  EXPECT_LT(sd.residual, 1e-8);
  EXPECT_NEAR(l2_norm(sd.phi_star), 1.0, 1e-10);
  EXPECT_TRUE(ground_state_positive(sd));
  for (const auto& z : sd.phi_star.values()) EXPECT_EQ(z.imag(), 0.0);
}

TEST(GroundState, ZeroPotentialHasNoBoundState) {
  try {
    ground_state(zero_potential(grid128()));
    FAIL();
  } catch (const HypothesisError& e) {
    EXPECT_EQ(e.hypothesis(), "H2");
    EXPECT_NE(std::string(e.what()).find("no bound state"), std::string::npos);
  }
}

TEST(GroundState, MonotoneInDepth) {
  Grid2D g(64, 24.0);
  double prev = 0.0;
  for (double d : {2.5, 5.0, 10.0, 20.0}) {
    double e = ground_state(gaussian_well(g, d)).e_star;
    EXPECT_LT(e, prev);
    prev = e;
  }
}

TEST(GroundState, WarmStartAgrees) {
  const auto& sd = default_state();
  GroundStateOptions o;
  o.warm_start = sd.phi_star;
  auto again = ground_state(gaussian_well(grid128(), 5.0), o);
  EXPECT_NEAR(again.e_star, sd.e_star, 1e-10);
  EXPECT_LE(again.iterations, sd.iterations);
}

TEST(CountNegative, ZeroPotential) { EXPECT_EQ(count_negative_eigenvalues(zero_potential(Grid2D(64, 30.0))).count, 0); }

TEST(CountNegative, DefaultWellHasOne) {
  auto c = count_negative_eigenvalues(gaussian_well(grid128(), 5.0));
  EXPECT_EQ(c.count, 1);
  EXPECT_EQ(oracle::radial_negative_count(well(5.0), 15.0, 3000), 1);
  ASSERT_EQ(c.eigenvalues.size(), 1u);
  EXPECT_NEAR(c.eigenvalues[0], default_state().e_star, 1e-8);
}

TEST(CountNegative, DeepWellMatchesOracle) {
  auto c = count_negative_eigenvalues(gaussian_well(grid128(), 40.0));
  int want = oracle::radial_negative_count(well(40.0), 15.0, 3000);
  EXPECT_GE(c.count, 2);
  EXPECT_EQ(c.count, want);
  // lowest levels against the radial channels
  EXPECT_NEAR(c.eigenvalues[0], oracle::radial_ground_energy(well(40.0), 0, 15.0, 3000), 1e-3);
  EXPECT_NEAR(c.eigenvalues[1], oracle::radial_ground_energy(well(40.0), 1, 15.0, 3000), 1e-3);
  EXPECT_NEAR(c.eigenvalues[2], c.eigenvalues[1], 1e-6);
}

TEST(CountNegative, Deterministic) {
  auto V = gaussian_well(Grid2D(64, 24.0), 10.0);
  auto a = count_negative_eigenvalues(V, 1e-6, 7), b = count_negative_eigenvalues(V, 1e-6, 7);
  ASSERT_EQ(a.count, b.count);
  for (std::size_t i = 0; i < a.eigenvalues.size(); ++i) EXPECT_EQ(a.eigenvalues[i], b.eigenvalues[i]);
}

TEST(Decay, GaussianWellPasses) {
  auto r = check_decay(gaussian_well(grid128(), 5.0));
  EXPECT_TRUE(r.pass);
  EXPECT_TRUE(std::isfinite(r.sup_weighted));
}

TEST(Decay, SlowlyDecayingPotentialFails) {
  const auto& g = grid128();
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = -1.0 / std::pow(g.bracket(i), 2.0);
  EXPECT_FALSE(check_decay(Potential(g, v)).pass);
}

TEST(Projection, Properties) {
  const auto& sd = default_state();
  const auto& g = grid128();
  auto pc_phi = project(sd.phi_star, SpectralPart::continuous, sd);
  EXPECT_LT(l2_norm(pc_phi), 1e-10);
  EXPECT_LT(l2_norm(project(sd.phi_star, SpectralPart::discrete, sd) - sd.phi_star), 1e-10);
  for (unsigned s = 0; s < 4; ++s) {
    auto u = random_field(g, s);
    auto pd = project(u, SpectralPart::discrete, sd), pc = project(u, SpectralPart::continuous, sd);
    double n2 = std::pow(l2_norm(u), 2), d2 = std::pow(l2_norm(pd), 2), c2 = std::pow(l2_norm(pc), 2);
    EXPECT_NEAR((d2 + c2) / n2, 1.0, 1e-10);
    EXPECT_LT(l2_norm(pd + pc - u), 1e-12 * l2_norm(u));
    EXPECT_LT(l2_norm(project(pd, SpectralPart::discrete, sd) - pd), 1e-10 * l2_norm(u));
    EXPECT_LT(std::abs(inner_sesqui(sd.phi_star, pc)), 1e-10 * l2_norm(u));
    // Gram-Schmidt against phi* gives an element of the continuous part
    EXPECT_LT(l2_norm(project(pc, SpectralPart::discrete, sd)), 1e-10 * l2_norm(u));
  }
}

TEST(Schrodinger, SelfAdjoint) {
  const auto& g = grid128();
  auto V = gaussian_well(g, 5.0);
  for (unsigned s = 0; s < 3; ++s) {
    auto f = random_field(g, 10 + s), h = random_field(g, 20 + s);
    cplx a = inner_sesqui(apply_schrodinger(V, f), h), b = inner_sesqui(f, apply_schrodinger(V, h));
    EXPECT_LT(std::abs(a - b), 1e-10 * l2_norm(f) * l2_norm(h));
  }
}

TEST(NonResonance, CellAverageOfLog) {
  // midpoint-refined numerical average over [-a, a]^2 (excluding nothing; log is integrable)
  for (double a : {0.1, 0.5, 2.0}) {
    const int m = 2000;
    double acc = 0;
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) {
        double x = -a + (i + 0.5) * 2 * a / m, y = -a + (j + 0.5) * 2 * a / m;
        acc += 0.5 * std::log(x * x + y * y);
      }
    EXPECT_NEAR(acc / (double(m) * m), log_cell_average(a), 2e-5);
  }
}

TEST(NonResonance, ProjectorAlgebra) {
  auto s = support_of(gaussian_well(Grid2D(64, 20.0), 5.0));
  Eigen::VectorXd vh = s.v.normalized();
  Eigen::MatrixXd P = vh * vh.transpose();
  Eigen::MatrixXd Q = Eigen::MatrixXd::Identity(P.rows(), P.cols()) - P;
  EXPECT_LT((Q * s.v).norm(), 1e-10 * s.v.norm());
  EXPECT_LT((P * P - P).norm(), 1e-10);
  // P from its definition <f, v> v / ||V||_1 agrees with the normalized outer product
  Eigen::MatrixXd Pdef = s.v * s.v.transpose() * (s.h * s.h) / s.v_l1;
  EXPECT_LT((Pdef - P).norm(), 1e-10);
  Eigen::MatrixXd B = complement_basis(vh);
  EXPECT_LT((B.transpose() * B - Eigen::MatrixXd::Identity(B.cols(), B.cols())).norm(), 1e-10);
  EXPECT_LT((B.transpose() * vh).norm(), 1e-10);
}

TEST(NonResonance, DefaultWellCertifiedAndGridStable) {
  double a = check_non_resonance(gaussian_well(Grid2D(96, 30.0), 5.0)).sigma_min;
  auto rb = check_non_resonance(gaussian_well(Grid2D(128, 30.0), 5.0));
  EXPECT_TRUE(rb.pass);
  EXPECT_GT(a, 1e-3);
  EXPECT_LT(std::abs(a - rb.sigma_min) / rb.sigma_min, 0.1) << a << " " << rb.sigma_min;
}

TEST(NonResonance, PermutationInvariant) {
  auto s = support_of(gaussian_well(Grid2D(48, 16.0), 5.0));
  Eigen::MatrixXd A = assemble_d0(s);
  auto sv = [](const Eigen::MatrixXd& A, const Eigen::VectorXd& v) {
    Eigen::MatrixXd B = complement_basis(v.normalized());
    Eigen::MatrixXd C = B.transpose() * A * B;
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(C).eigenvalues().cwiseAbs().minCoeff();
  };
  std::vector<int> perm(s.v.size());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937 rng(4);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> Pm(Eigen::Map<Eigen::VectorXi>(perm.data(), long(perm.size())));
  Eigen::MatrixXd Ap = Pm * A * Pm.transpose();
  Eigen::VectorXd vp = Pm * s.v;
  EXPECT_NEAR(sv(A, s.v), sv(Ap, vp), 1e-10);
}

TEST(NonResonance, ZeroPotentialRejected) {
  EXPECT_THROW(check_non_resonance(zero_potential(Grid2D(32, 10.0))), DomainError);
}
