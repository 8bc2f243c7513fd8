#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>

#include "nls2d/bound_states.hpp"
#include "nls2d/grid.hpp"
#include "nls2d/spectral.hpp"

namespace nls2d {

/// The soliton + radiation split could not be maintained.
class DecompositionLost : public Error {
 public:
  DecompositionLost(const std::string& why, double t)
      : Error("decomposition lost at t = " + std::to_string(t) + ": " + why), t_(t) {}
  double time() const noexcept { return t_; }

 private:
  double t_;
};

/// phi_E, dphi/dE, d2phi/dE2 at any E near a working point, backed by a local
/// Chebyshev interpolant that is rebuilt around E when E leaves it.
class ProfileFamily {
 public:
  ProfileFamily(Potential V, SpectralData sd, Nonlinearity nl, double halfwidth = 0.01, int nodes = 11)
      : V_(std::move(V)), sd_(std::move(sd)), nl_(nl), halfwidth_(halfwidth), nodes_(nodes) {}

  const ProfileInterpolant::Eval& at(double e) {
    if (cached_e_ && *cached_e_ == e) return cached_;
    require_branch_side(e, sd_.e_star, nl_);
    if (!interp_ || !interp_->contains(e)) rebuild(e);
    cached_ = interp_->eval(e);
    cached_e_ = e;
    return cached_;
  }

  const Potential& potential() const { return V_; }
  const SpectralData& spectral() const { return sd_; }
  const Nonlinearity& nonlinearity() const { return nl_; }
  double e_star() const { return sd_.e_star; }
  int rebuilds() const { return rebuilds_; }

 private:
  void rebuild(double e) {
    // keep the interval at least half a width away from E*
    double dist = std::abs(e - sd_.e_star);
    double w = std::min(halfwidth_, 0.4 * dist);
    interp_.emplace(V_, sd_, nl_, e - w, e + w, nodes_);
    ++rebuilds_;
  }

  Potential V_;
  SpectralData sd_;
  Nonlinearity nl_;
  double halfwidth_;
  int nodes_;
  std::optional<ProfileInterpolant> interp_;
  std::optional<double> cached_e_;
  ProfileInterpolant::Eval cached_{ComplexField(V_.grid), ComplexField(V_.grid), ComplexField(V_.grid)};
  int rebuilds_ = 0;
};

namespace detail {

/// int Re(a) b for real b.
inline double pair_re(const ComplexField& a, const ComplexField& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i].real() * b[i].real();
  return acc * a.grid().cell_area();
}
/// int Im(a) b for real b.
inline double pair_im(const ComplexField& a, const ComplexField& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i].imag() * b[i].real();
  return acc * a.grid().cell_area();
}

}  // namespace detail

struct ModulationState {
  double e;
  double theta;
  ComplexField v;
  ComplexField w;                    // e^{-i theta} v
  double constraint_residual = 0.0;  // max of the two pairings, absolute
  double jacobian_condition = 0.0;
  int newton_steps = 0;

  /// Constraint residual relative to ||v|| ||phi_E||.
  double relative_residual(const ComplexField& phi) const {
    double s = l2_norm(v) * l2_norm(phi);
    return s > 0 ? constraint_residual / s : (constraint_residual == 0 ? 0.0 : INFINITY);
  }
};

struct DecomposeOptions {
  double tube = 0.2;  // ||u - e^{-i theta_g} phi_{E_g}|| < tube ||phi_{E_g}||
  int max_iter = 30;
  double t = 0.0;     // time label for error messages
};

/// Residuals of the two orthogonality conditions for given (E, theta).
inline Eigen::Vector2d constraint_residuals(const ComplexField& u, ProfileFamily& fam, double e, double theta) {
  const auto& pr = fam.at(e);
  ComplexField v = std::polar(1.0, theta) * u - pr.phi;
  return {detail::pair_re(v, pr.phi), detail::pair_im(v, pr.dphi)};
}

/// u = e^{-i theta} (phi_E + v) with <Re v, phi_E> = <Im v, dphi_E/dE> = 0, by Newton in (E, theta).
inline ModulationState decompose(const ComplexField& u, ProfileFamily& fam, double e_guess, double theta_guess,
                                 const DecomposeOptions& opt = {}) {
  require_finite(u, "field to decompose");
  const double t = opt.t;
  const auto& nl = fam.nonlinearity();
  auto on_branch = [&](double e) { return (e - fam.e_star()) * nl.alpha > 0.0 && e < 0.0; };
  if (!on_branch(e_guess)) throw DecompositionLost("guess is off the branch", t);
  {
    const auto& pr = fam.at(e_guess);
    ComplexField d = u - std::polar(1.0, -theta_guess) * pr.phi;
    if (l2_norm(d) >= opt.tube * l2_norm(pr.phi)) throw DecompositionLost("outside the soliton tube", t);
  }
  double e = e_guess, th = theta_guess;
  double cond = 0.0;
  int it = 0;
  Eigen::Vector2d F;
  for (;; ++it) {
    const auto& pr = fam.at(e);
    ComplexField v = std::polar(1.0, th) * u - pr.phi;
    F << detail::pair_re(v, pr.phi), detail::pair_im(v, pr.dphi);
    const double scale = std::max(l2_norm(pr.phi) * l2_norm(v), 1e-300);
    if (it >= opt.max_iter) throw DecompositionLost("Newton on (E, theta) did not converge", t);
    Eigen::Matrix2d J;
    const double dpp = detail::pair_re(pr.dphi, pr.phi);
    J(0, 0) = -dpp + detail::pair_re(v, pr.dphi);
    J(0, 1) = -detail::pair_im(v, pr.phi);
    J(1, 0) = detail::pair_im(v, pr.d2phi);
    J(1, 1) = dpp + detail::pair_re(v, pr.dphi);
    Eigen::JacobiSVD<Eigen::Matrix2d> svd(J);
    cond = svd.singularValues()(0) / svd.singularValues()(1);
    if (!std::isfinite(cond) || cond > 1e12) throw DecompositionLost("constraint Jacobian is singular", t);
    // converged when the pairings are at roundoff level or the update stalls
    if (F.cwiseAbs().maxCoeff() <= 1e-14 * scale) break;
    Eigen::Vector2d d = J.partialPivLu().solve(-F);
    e += d(0);
    th += d(1);
    if (!on_branch(e)) throw DecompositionLost("Newton left the branch side", t);
    if (std::abs(d(0)) <= 1e-15 * std::abs(e) && std::abs(d(1)) <= 1e-15 * std::max(1.0, std::abs(th))) {
      ++it;
      const auto& p2 = fam.at(e);
      ComplexField v2 = std::polar(1.0, th) * u - p2.phi;
      F << detail::pair_re(v2, p2.phi), detail::pair_im(v2, p2.dphi);
      break;
    }
  }
  const auto& pr = fam.at(e);
  ComplexField v = std::polar(1.0, th) * u - pr.phi;
  if (l2_norm(v) >= opt.tube * l2_norm(pr.phi)) throw DecompositionLost("radiation left the soliton tube", t);
  ComplexField w = std::polar(1.0, -th) * v;
  return ModulationState{e, th, std::move(v), std::move(w), F.cwiseAbs().maxCoeff(), cond, it};
}

/// (dE/dt, dtheta/dt - E).
struct ModulationRates {
  double e_dot = 0.0;
  double theta_dot_minus_e = 0.0;
};

struct NonlinearTerms {
  ComplexField g2, g3, g4;
};

/// g_4 = alpha phi^{p-1} ((p+1)/2 v + (p-1)/2 conj v), g_3 = f(phi + v) - f(phi) - g_4,
/// g_2 = (E - theta') phi - i E' dphi/dE.
inline NonlinearTerms nonlinear_terms(const ModulationState& ms, const ModulationRates& rates, ProfileFamily& fam) {
  const auto& pr = fam.at(ms.e);
  const auto& nl = fam.nonlinearity();
  const double p = nl.p;
  const Grid2D& g = ms.v.grid();
  NonlinearTerms out{ComplexField(g), ComplexField(g), ComplexField(g)};
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double ph = pr.phi[i].real();
    const cplx v = ms.v[i];
    const cplx g4 = nl.alpha * std::pow(std::abs(ph), p - 1) * (0.5 * (p + 1) * v + 0.5 * (p - 1) * std::conj(v));
    out.g4[i] = g4;
    out.g3[i] = nl(ph + v) - nl(cplx(ph, 0.0)) - g4;
    out.g2[i] = -rates.theta_dot_minus_e * ph - cplx(0, 1) * rates.e_dot * pr.dphi[i].real();
  }
  require_finite(out.g3, "g3");
  return out;
}

/// The 2x2 matrix of the modulation system at the current state.
inline Eigen::Matrix2d modulation_matrix(const ModulationState& ms, ProfileFamily& fam) {
  const auto& pr = fam.at(ms.e);
  const double dpp = detail::pair_re(pr.dphi, pr.phi);
  const double rvd = detail::pair_re(ms.v, pr.dphi);
  Eigen::Matrix2d A;
  A << dpp - rvd, detail::pair_im(ms.v, pr.phi), detail::pair_im(ms.v, pr.d2phi), dpp + rvd;
  return A;
}

/// Solves A (E', theta' - E)^T = (<Im g3, phi_E>, <Re g3, dphi_E/dE>)^T.
inline ModulationRates modulation_system(const ModulationState& ms, ProfileFamily& fam) {
  Eigen::Matrix2d A = modulation_matrix(ms, fam);
  Eigen::JacobiSVD<Eigen::Matrix2d> svd(A);
  double cond = svd.singularValues()(0) / svd.singularValues()(1);
  if (!std::isfinite(cond) || cond > 1e10) throw DomainError("modulation matrix degenerate");
  // g3 does not depend on the rates
  auto terms = nonlinear_terms(ms, {}, fam);
  const auto& pr = fam.at(ms.e);
  Eigen::Vector2d rhs(detail::pair_im(terms.g3, pr.phi), detail::pair_re(terms.g3, pr.dphi));
  Eigen::Vector2d x = A.partialPivLu().solve(rhs);
  return {x(0), x(1)};
}

/// Running diagnostic norms M1..M5 with trapezoidal time quadrature.
struct NormLedger {
  double s = 1.5;
  double p = 3.0;
  double q = 3.0;  // 2/q = 1 - 1/p
  double m1 = 0, m2 = 0, m3 = 0, m4 = 0, m5 = 0;
  double e_star = 0.0;

  // running pieces
  double sup_pc_h1 = 0, sup_pd_h1 = 0;
  double int_m2 = 0, int_m3 = 0, int_pc_q = 0, int_pd_q = 0;
  std::optional<double> last_t;
  double last_a2 = 0, last_a3 = 0, last_bc = 0, last_bd = 0;

  NormLedger(double s_, double p_, double e_star_) : s(s_), p(p_), q(2.0 / (1.0 - 1.0 / p_)), e_star(e_star_) {
    if (!(p_ > 1.0)) throw DomainError("ledger needs p > 1");
    WeightSpec{s, -1}.validate();
  }
};

/// Adds the snapshot at time t (strictly after the previous one).
inline NormLedger norm_ledger_update(NormLedger L, const ModulationState& ms, const SpectralData& sd, double t) {
  if (L.last_t && !(t > *L.last_t)) throw DomainError("ledger times must increase");
  ComplexField pc = project(ms.w, SpectralPart::continuous, sd);
  ComplexField pd = ms.w - pc;
  const WeightSpec ws{L.s, -1};
  double a2 = std::pow(weighted_norm(pc, ws, 1), 2), a3 = std::pow(weighted_norm(pd, ws, 1), 2);
  double bc = std::pow(w1p_norm(pc, 2 * L.p), L.q), bd = std::pow(w1p_norm(pd, 2 * L.p), L.q);
  if (L.last_t) {
    double dt = t - *L.last_t;
    L.int_m2 += 0.5 * dt * (a2 + L.last_a2);
    L.int_m3 += 0.5 * dt * (a3 + L.last_a3);
    L.int_pc_q += 0.5 * dt * (bc + L.last_bc);
    L.int_pd_q += 0.5 * dt * (bd + L.last_bd);
  }
  L.last_t = t;
  L.last_a2 = a2;
  L.last_a3 = a3;
  L.last_bc = bc;
  L.last_bd = bd;
  L.sup_pc_h1 = std::max(L.sup_pc_h1, h1_norm(pc));
  L.sup_pd_h1 = std::max(L.sup_pd_h1, h1_norm(pd));
  L.m1 = std::max(L.m1, std::abs(ms.e - L.e_star));
  L.m2 = std::sqrt(L.int_m2);
  L.m3 = std::sqrt(L.int_m3);
  L.m4 = L.sup_pc_h1 + std::pow(L.int_pc_q, 1.0 / L.q);
  L.m5 = L.sup_pd_h1 + std::pow(L.int_pd_q, 1.0 / L.q);
  return L;
}

/// Wraps theta into (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2 * std::numbers::pi);
  return r <= -std::numbers::pi ? r + 2 * std::numbers::pi : r;
}

}  // namespace nls2d
