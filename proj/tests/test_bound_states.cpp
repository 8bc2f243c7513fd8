#include <gtest/gtest.h>

#include "nls2d/bound_states.hpp"
#include "oracles.hpp"

using namespace nls2d;

namespace {

const Grid2D& grid128() {
  static Grid2D g(128, 30.0);
  return g;
}

const Potential& well5() {
  static Potential V = gaussian_well(grid128(), 5.0);
  return V;
}

const SpectralData& sd5() {
  static SpectralData sd = ground_state(well5());
  return sd;
}

const Nonlinearity cubic{1.0, 3.0};

const Branch& default_branch() {
  static Branch br = branch_continuation(well5(), sd5(), sd5().e_star + 0.005, sd5().e_star + 0.08, 16, cubic);
  return br;
}

}  // namespace

TEST(Seed, ScalarBifurcationEquation) {
  const auto& sd = sd5();
  for (double d : {1e-4, 1e-3, 0.02, 0.08}) {
    double a = seed_amplitude(sd.e_star + d, sd, cubic);
    // independent: a^2 = d / ||phi*||_4^4 for p = 3
    double l4 = 0;
    for (const auto& z : sd.phi_star.values()) l4 += std::pow(z.real(), 4);
    l4 *= grid128().cell_area();
    EXPECT_NEAR(a, std::sqrt(d / l4), 1e-12 * a);
    EXPECT_LT(std::abs(d * a - std::pow(a, 3) * l4), 1e-10);
  }
}

TEST(Seed, AmplitudeScalesWithDistance) {
  const auto& sd = sd5();
  double r0 = bifurcation_seed(sd.e_star + 1e-2, sd, cubic).max_abs() / std::sqrt(1e-2);
  for (double d : {1e-6, 1e-4, 1e-3}) {
    double r = bifurcation_seed(sd.e_star + d, sd, cubic).max_abs() / std::sqrt(d);
    // (E* + d) - E* loses about 1e-16 / d relative
    EXPECT_NEAR(r / r0, 1.0, 1e-9);
  }
}

TEST(Seed, WrongSideRejected) {
  const auto& sd = sd5();
  EXPECT_THROW(bifurcation_seed(sd.e_star - 0.01, sd, cubic), DomainError);
  EXPECT_THROW(bifurcation_seed(sd.e_star + 0.01, sd, Nonlinearity{-1.0, 3.0}), DomainError);
  EXPECT_THROW(bifurcation_seed(sd.e_star, sd, cubic), DomainError);
  EXPECT_NO_THROW(bifurcation_seed(sd.e_star - 0.01, sd, Nonlinearity{-1.0, 3.0}));
}

TEST(Seed, ResidualIsHigherOrder) {
  const auto& sd = sd5();
  double r1 = profile_residual_norm(well5(), bifurcation_seed(sd.e_star + 0.01, sd, cubic), sd.e_star + 0.01, cubic);
  double r2 = profile_residual_norm(well5(), bifurcation_seed(sd.e_star + 0.0025, sd, cubic), sd.e_star + 0.0025, cubic);
  // O(d^{3/2}): quartering d divides the residual by about 8
  EXPECT_NEAR(std::log(r1 / r2) / std::log(4.0), 1.5, 0.1);
}

TEST(SolveProfile, ConvergesAndMatchesShootingOracle) {
  const auto& sd = sd5();
  double e = sd.e_star + 0.02;
  auto b = solve_profile(well5(), e, bifurcation_seed(e, sd, cubic), cubic);
  EXPECT_LE(b.newton_steps, 8);
  EXPECT_LT(b.residual, 1e-9);
  EXPECT_TRUE(profile_residual_ok(b));
  for (const auto& z : b.phi.values()) {
    EXPECT_EQ(z.imag(), 0.0);
    EXPECT_GE(z.real(), -1e-12 * b.phi.max_abs());
  }
  double peak = b.phi.max_abs();
  auto prof = oracle::radial_shooting_profile([](double r) { return -5.0 * std::exp(-r * r); }, e, 1.0, 3.0, 0.5 * peak,
                                              2.0 * peak);
  ASSERT_FALSE(prof.phi.empty());
  double err = 0;
  const auto& g = grid128();
  for (std::size_t i = 0; i < g.size(); ++i) err = std::max(err, std::abs(b.phi[i].real() - prof.at(g.radius(i))));
  EXPECT_LT(err / peak, 1e-4) << err;
}

TEST(SolveProfile, ToyProblemConvergesInOneStep) {
  const auto& sd = sd5();
  double e = sd.e_star + 0.02;
  NewtonOptions o;
  o.toy_projection = &sd;
  auto b = solve_profile(well5(), e, bifurcation_seed(e, sd, cubic), cubic, o);
  EXPECT_EQ(b.newton_steps, 1);
  EXPECT_LT(l2_norm(b.phi - bifurcation_seed(e, sd, cubic)), 1e-10);
}

TEST(SolveProfile, StoredResidualIsReproducible) {
  const auto& sd = sd5();
  double e = sd.e_star + 0.03;
  auto b = solve_profile(well5(), e, bifurcation_seed(e, sd, cubic), cubic);
  EXPECT_EQ(b.residual, profile_residual_norm(well5(), b.phi, e, cubic));
  auto again = solve_profile(well5(), e, bifurcation_seed(e, sd, cubic), cubic);
  EXPECT_EQ(l2_norm(again.phi - b.phi), 0.0);
}

TEST(SolveProfile, NegativeSeedGivesPositiveRepresentative) {
  const auto& sd = sd5();
  double e = sd.e_star + 0.02;
  auto b = solve_profile(well5(), e, -1.0 * bifurcation_seed(e, sd, cubic), cubic);
  auto c = solve_profile(well5(), e, bifurcation_seed(e, sd, cubic), cubic);
  EXPECT_LT(l2_norm(b.phi - c.phi), 1e-12);
}

TEST(SolveProfile, FocusingSideBranch) {
  const auto& sd = sd5();
  Nonlinearity foc{-1.0, 3.0};
  double e = sd.e_star - 0.02;
  auto b = solve_profile(well5(), e, bifurcation_seed(e, sd, foc), foc);
  EXPECT_TRUE(profile_residual_ok(b));
  EXPECT_GT(b.phi.max_abs(), 0.0);
}

TEST(SolveProfile, NonFiniteSeedRejected) {
  auto seed = sd5().phi_star;
  seed[5] = cplx(NAN, 0);
  EXPECT_THROW(solve_profile(well5(), sd5().e_star + 0.02, seed, cubic), NonFiniteError);
}

TEST(Branch, DefaultBranchScaling) {
  const auto& br = default_branch();
  ASSERT_TRUE(br.complete()) << br.failure;
  ASSERT_EQ(br.profiles.size(), 16u);
  std::vector<double> d, amp;
  for (const auto& b : br.profiles) {
    EXPECT_TRUE(profile_residual_ok(b));
    EXPECT_LT(b.fd_error, 1e-4);
    d.push_back(b.e - br.e_star);
    amp.push_back(b.phi.max_abs());
  }
  EXPECT_NEAR(loglog_slope(d, amp), 0.5, 0.025);
  EXPECT_NEAR(br.delta, 0.08, 1e-12);
}

TEST(Branch, ProfileDistanceRatioBounded) {
  auto fit = profile_distance_fit(default_branch(), sd5());
  EXPECT_LT(fit.ratio_spread, 3.0);
  EXPECT_TRUE(std::isfinite(fit.c));
}

TEST(Branch, DerivativeConsistentWithNorm) {
  const auto& br = default_branch();
  const auto& P = br.profiles;
  for (std::size_t i = 1; i + 1 < P.size(); ++i) {
    double n2p = std::pow(l2_norm(P[i + 1].phi), 2), n2m = std::pow(l2_norm(P[i - 1].phi), 2);
    // three-point derivative of ||phi||^2 on the non-uniform-in-distance but uniform-in-E grid
    double half_dn = 0.25 * (n2p - n2m) / (P[i + 1].e - P[i].e);
    double ip = inner_real(P[i].dphi_de, P[i].phi);
    EXPECT_NEAR(ip / half_dn, 1.0, 2e-2) << i;
  }
}

TEST(Branch, DerivativeInnerProductPowerLaw) {
  const auto& br = default_branch();
  std::vector<double> d, ip;
  for (const auto& b : br.profiles) {
    d.push_back(b.e - br.e_star);
    ip.push_back(inner_real(b.dphi_de, b.phi));
  }
  // exponent 2/(p-1) - 1 = 0 for p = 3
  EXPECT_LT(std::abs(loglog_slope(d, ip)), 0.1);
}

TEST(Branch, SingleStepEqualsSolve) {
  const auto& sd = sd5();
  double e = sd.e_star + 0.02;
  BranchOptions o;
  o.derivatives = false;
  auto br = branch_continuation(well5(), sd, e, e + 0.05, 1, cubic, o);
  ASSERT_EQ(br.profiles.size(), 1u);
  auto b = solve_profile(well5(), e, bifurcation_seed(e, sd, cubic), cubic);
  EXPECT_EQ(l2_norm(br.profiles[0].phi - b.phi), 0.0);
  EXPECT_EQ(br.profiles[0].residual, b.residual);
}

TEST(Branch, FailureReturnsPartialBranch) {
  const auto& sd = sd5();
  BranchOptions o;
  o.derivatives = false;
  o.newton.max_iter = 2;
  // far from bifurcation two Newton steps from the rescaled previous profile cannot reach 1e-10
  auto br = branch_continuation(well5(), sd, sd.e_star + 0.001, sd.e_star + 1.0, 3, cubic, o);
  EXPECT_FALSE(br.complete());
  EXPECT_LT(br.profiles.size(), 3u);
  EXPECT_EQ(*br.failed_at, br.profiles.size());
  EXPECT_FALSE(br.failure.empty());
}

TEST(Interpolant, MatchesDirectSolvesAndBranchDerivative) {
  const auto& sd = sd5();
  double e0 = sd.e_star + 0.04;
  ProfileInterpolant pi(well5(), sd, cubic, e0 - 0.01, e0 + 0.01);
  double e = e0 + 0.0037;
  auto ev = pi.eval(e);
  auto b = solve_profile(well5(), e, ev.phi, cubic);
  EXPECT_LT(l2_norm(ev.phi - b.phi), 1e-8 * l2_norm(b.phi));
  BranchOptions o;
  attach_derivatives(well5(), sd, b, cubic, o);
  EXPECT_LT(l2_norm(ev.dphi - b.dphi_de), 1e-4 * l2_norm(b.dphi_de));
  EXPECT_LT(l2_norm(ev.d2phi - b.d2phi_de2), 1e-2 * l2_norm(b.d2phi_de2));
  EXPECT_THROW(pi.eval(e0 + 0.02), DomainError);
}
