#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "nls2d/grid.hpp"
#include "nls2d/krylov.hpp"

namespace nls2d {

/// Real potential sampled on a grid.
struct Potential {
  Grid2D grid;
  std::vector<double> values;
  double sigma = 3.5;
  std::string family = "samples";
  std::map<std::string, double> params;

  Potential(const Grid2D& g, std::vector<double> v, double sigma_ = 3.5) : grid(g), values(std::move(v)), sigma(sigma_) {
    if (values.size() != g.size()) throw DomainError("potential length does not match grid");
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!std::isfinite(values[i])) throw NonFiniteError("potential sample", i);
  }
  double min() const { return *std::min_element(values.begin(), values.end()); }
  double max_abs() const {
    double m = 0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  bool is_zero() const { return max_abs() == 0.0; }
};

/// V(x) = -depth * exp(-|x|^2 / width^2).
inline Potential gaussian_well(const Grid2D& g, double depth, double width = 1.0) {
  if (!(width > 0)) throw DomainError("well width must be positive");
  std::vector<double> v(g.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double r2 = g.x1(i) * g.x1(i) + g.x2(i) * g.x2(i);
    v[i] = -depth * std::exp(-r2 / (width * width));
  }
  Potential p(g, std::move(v));
  p.family = "gaussian_well";
  p.params = {{"depth", depth}, {"width", width}};
  return p;
}

inline Potential zero_potential(const Grid2D& g) {
  Potential p(g, std::vector<double>(g.size(), 0.0));
  p.family = "zero";
  return p;
}

/// L f = -Delta f + V f.
inline ComplexField apply_schrodinger(const Potential& V, const ComplexField& f) {
  if (V.grid != f.grid()) throw DomainError("potential and field live on different grids");
  ComplexField r = laplacian(f);
  r *= -1.0;
  for (std::size_t i = 0; i < r.size(); ++i) r[i] += V.values[i] * f[i];
  return r;
}

inline LinearOp schrodinger_op(const Potential& V, double shift = 0.0) {
  return [&V, shift](const ComplexField& f) {
    ComplexField r = apply_schrodinger(V, f);
    if (shift != 0.0) r.axpy(-shift, f);
    return r;
  };
}

struct DecayReport {
  double sup_weighted = 0.0;  // sup <x>^sigma (|V| + |grad V|) over r in [l/4, l/2]
  double inner_shell = 0.0;   // same sup over [l/4, 3l/8)
  double outer_shell = 0.0;   // same sup over [3l/8, l/2]
  bool pass = false;
};

/// Empirical decay check on the outer annulus. Passes when the weighted sup is
/// finite and not increasing from the inner to the outer shell; values below
/// 1e-10 * max|V| are treated as numerically zero.
inline DecayReport check_decay(const Potential& V) {
  const Grid2D& g = V.grid;
  ComplexField f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = V.values[i];
  auto [d1, d2] = gradient(f);
  DecayReport rep;
  const double l = g.l_dom();
  const double floor = 1e-10 * V.max_abs();
  for (std::size_t i = 0; i < f.size(); ++i) {
    double r = g.radius(i);
    if (r < l / 4 || r > l / 2) continue;
    double mag = std::abs(V.values[i]) + std::hypot(std::abs(d1[i]), std::abs(d2[i]));
    if (mag <= floor) mag = 0.0;
    double w = std::pow(g.bracket(i), V.sigma) * mag;
    rep.sup_weighted = std::max(rep.sup_weighted, w);
    if (r < 3 * l / 8)
      rep.inner_shell = std::max(rep.inner_shell, w);
    else
      rep.outer_shell = std::max(rep.outer_shell, w);
  }
  rep.pass = std::isfinite(rep.sup_weighted) && rep.outer_shell <= rep.inner_shell;
  return rep;
}

/// Ground-state pair of L = -Delta + V.
struct SpectralData {
  double e_star = 0.0;
  ComplexField phi_star;
  double residual = 0.0;
  double min_value = 0.0;  // smallest sample of phi_star (positivity diagnostic)
  int iterations = 0;
};

struct GroundStateOptions {
  double tol = 1e-10;      // on eigenvalue increments
  int max_iter = 200;
  double cutoff = 1e-6;    // eigenvalues above -cutoff do not count as bound states
  std::optional<ComplexField> warm_start;
};

/// Lowest eigenpair by shifted inverse iteration. The shift starts below
/// min V and is moved towards the Rayleigh quotient once the residual
/// certifies which eigenvalue is being approached.
inline SpectralData ground_state(const Potential& V, const GroundStateOptions& opt = {}) {
  const Grid2D& g = V.grid;
  if (V.min() >= 0.0) throw HypothesisError("H2", "operator has no bound state (V >= 0)");
  ComplexField x = opt.warm_start ? *opt.warm_start : ComplexField::from_function(g, [](double a, double b) {
    return std::exp(-(a * a + b * b) / 8.0);
  });
  if (x.grid() != g) throw DomainError("warm start lives on a different grid");
  x *= 1.0 / l2_norm(x);
  double sigma = std::min(V.min(), 0.0) - 1.0;
  auto L = schrodinger_op(V);
  double mu = inner_sesqui(x, L(x)).real();
  double mu_prev = mu;
  double res = 0.0;
  int it = 0;
  KrylovOptions ko;
  ko.tol = 1e-13;
  ko.max_iter = 2000;
  for (; it < opt.max_iter; ++it) {
    auto A = schrodinger_op(V, sigma);
    auto sol = conjugate_gradient(A, x, x * (1.0 / (mu - sigma)), ko, shifted_laplacian_inverse(std::max(-sigma, 0.05)));
    x = sol.x;
    // real operator: discard roundoff imaginary parts and fix the sign
    for (auto& z : x.values()) z = cplx(z.real(), 0.0);
    double s = 0;
    for (auto& z : x.values()) s += z.real();
    x *= (s < 0 ? -1.0 : 1.0) / l2_norm(x);
    ComplexField lx = L(x);
    mu_prev = mu;
    mu = inner_sesqui(x, lx).real();
    lx.axpy(-mu, x);
    res = l2_norm(lx);
    if (mu >= -opt.cutoff && res < 1e-3 * (1 + std::abs(mu)))
      throw HypothesisError("H2", "operator has no bound state (lowest eigenvalue " + std::to_string(mu) + ")");
    if (it > 0 && std::abs(mu - mu_prev) < opt.tol * std::max(1.0, std::abs(mu)) && res < 1e-8) break;
    // Rayleigh quotient exceeds the eigenvalue by at most res^2/gap; 4 res keeps the shift below it
    if (res < 0.05 * std::abs(mu)) sigma = std::max(sigma, mu - std::max(4 * res, 1e-3));
  }
  if (it == opt.max_iter && mu >= -opt.cutoff) throw HypothesisError("H2", "operator has no bound state");
  if (it == opt.max_iter) throw ConvergenceError("ground-state inverse iteration stagnated", res);
  SpectralData sd{mu, x, res, 0.0, it + 1};
  double mn = x[0].real();
  for (const auto& z : x.values()) mn = std::min(mn, z.real());
  sd.min_value = mn;
  if (mu >= -opt.cutoff) throw HypothesisError("H2", "operator has no bound state");
  return sd;
}

/// phi_star is positive up to the roundoff floor of its exponential tail.
inline bool ground_state_positive(const SpectralData& sd, double rel_floor = 1e-12) {
  return sd.min_value > -rel_floor * sd.phi_star.max_abs();
}

enum class SpectralPart { discrete, continuous };

/// P_d u = <u, phi*> phi*, P_c = I - P_d (sesquilinear pairing; phi* is real).
inline ComplexField project(const ComplexField& u, SpectralPart part, const SpectralData& sd) {
  cplx c = inner_sesqui(sd.phi_star, u);
  ComplexField pd = c * sd.phi_star;
  if (part == SpectralPart::discrete) return pd;
  return u - pd;
}

struct NegativeCount {
  int count = 0;
  std::vector<double> eigenvalues;  // the located eigenvalues below -cutoff, ascending
};

/// Counts eigenvalues of L below -|cutoff| with shift-invert Lanczos on
/// (L - sigma)^{-1}, sigma < min V. Each converged eigenvector is locked and the
/// iteration restarts from a fresh random vector orthogonal to the locked set,
/// which also picks up every member of a degenerate cluster.
inline NegativeCount count_negative_eigenvalues(const Potential& V, double cutoff = 1e-6, unsigned seed = 12345,
                                                int max_count = 64) {
  cutoff = std::abs(cutoff);
  const Grid2D& g = V.grid;
  const double sigma = std::min(V.min(), 0.0) - 1.0;
  auto A = schrodinger_op(V, sigma);
  auto prec = shifted_laplacian_inverse(-sigma);
  KrylovOptions ko;
  ko.tol = 1e-12;
  ko.max_iter = 3000;
  auto apply_inv = [&](const ComplexField& f) {
    auto r = conjugate_gradient(A, f, prec(f), ko, prec);
    if (!r.converged) throw ConvergenceError("shift-invert solve failed", r.residual);
    return r.x;
  };
  const double theta_cut = 1.0 / (-cutoff - sigma);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<ComplexField> locked;
  NegativeCount out;
  auto orth = [&](ComplexField& q, const std::vector<ComplexField>& basis) {
    for (int pass = 0; pass < 2; ++pass)
      for (const auto& b : basis) q.axpy(-detail::dot(b, q), b);
  };
  // both sets in each sweep: orthogonalizing against one set after the other lets
  // the basis recurrence re-inject components along the locked vectors
  auto orth2 = [&](ComplexField& q, const std::vector<ComplexField>& a, const std::vector<ComplexField>& b) {
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& v : a) q.axpy(-detail::dot(v, q), v);
      for (const auto& v : b) q.axpy(-detail::dot(v, q), v);
    }
  };
  const int m_max = 300;
  while (out.count < max_count) {
    ComplexField q(g);
    for (auto& z : q.values()) z = nd(rng);
    orth(q, locked);
    q *= 1.0 / detail::norm2(q);
    std::vector<ComplexField> Q{q};
    std::vector<double> alpha, beta;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
    double last_beta = 0;
    for (int m = 0; m < m_max; ++m) {
      ComplexField w = apply_inv(Q[m]);
      alpha.push_back(detail::dot(Q[m], w).real());
      orth2(w, locked, Q);
      last_beta = detail::norm2(w);
      int k = int(alpha.size());
      Eigen::MatrixXd T = Eigen::MatrixXd::Zero(k, k);
      for (int i = 0; i < k; ++i) {
        T(i, i) = alpha[i];
        if (i + 1 < k) T(i, i + 1) = T(i + 1, i) = beta[i];
      }
      es.compute(T);
      double theta = es.eigenvalues()(k - 1);
      double rest = std::abs(last_beta * es.eigenvectors()(k - 1, k - 1));
      if (rest < 1e-9 * theta || last_beta < 1e-14 * theta) break;
      beta.push_back(last_beta);
      Q.push_back((1.0 / last_beta) * w);
    }
    const int k = int(alpha.size());
    auto residual = [&](int i) { return std::abs(last_beta * es.eigenvectors()(k - 1, i)); };
    double top = es.eigenvalues()(k - 1);
    if (top + residual(k - 1) <= theta_cut) break;
    int added = 0;
    for (int i = k - 1; i >= 0 && out.count < max_count; --i) {
      double th = es.eigenvalues()(i), r = residual(i);
      if (th - r <= theta_cut) break;
      if (r > 1e-8 * th) continue;
      ComplexField y(g);
      for (int j = 0; j < k; ++j) y.axpy(es.eigenvectors()(j, i), Q[j]);
      orth(y, locked);
      y *= 1.0 / detail::norm2(y);
      locked.push_back(y);
      out.eigenvalues.push_back(sigma + 1.0 / th);
      ++out.count;
      ++added;
    }
    if (added == 0) throw ConvergenceError("eigenvalue within resolution of the counting cutoff", residual(k - 1));
  }
  std::sort(out.eigenvalues.begin(), out.eigenvalues.end());
  return out;
}

/// Birman-Schwinger data on the support of V (nodes where |V| > threshold).
struct SupportSet {
  std::vector<std::size_t> nodes;
  Eigen::VectorXd v;      // |V|^{1/2}
  Eigen::VectorXd u;      // sign V
  Eigen::VectorXd x1, x2;
  double h = 0.0;         // grid spacing
  double v_l1 = 0.0;      // ||V||_{L^1}
};

inline SupportSet support_of(const Potential& V, double threshold = 1e-12) {
  SupportSet s;
  const Grid2D& g = V.grid;
  for (std::size_t i = 0; i < V.values.size(); ++i)
    if (std::abs(V.values[i]) > threshold) s.nodes.push_back(i);
  if (s.nodes.empty()) throw DomainError("potential numerically zero");
  const int m = int(s.nodes.size());
  s.v.resize(m);
  s.u.resize(m);
  s.x1.resize(m);
  s.x2.resize(m);
  s.h = g.spacing();
  for (int a = 0; a < m; ++a) {
    double val = V.values[s.nodes[a]];
    s.v(a) = std::sqrt(std::abs(val));
    s.u(a) = val > 0 ? 1.0 : -1.0;
    s.x1(a) = g.x1(s.nodes[a]);
    s.x2(a) = g.x2(s.nodes[a]);
    s.v_l1 += std::abs(val) * g.cell_area();
  }
  return s;
}

/// Average of log|x| over the square [-a, a]^2.
inline double log_cell_average(double a) {
  return std::log(a) + 0.5 * std::log(2.0) - 1.5 + std::numbers::pi / 4;
}

/// Quadrature matrix of G0 (kernel -(2 pi)^{-1} log|x - y|) between support nodes,
/// including the cell weight h^2. Diagonal uses the exact cell average.
inline Eigen::MatrixXd log_kernel_matrix(const SupportSet& s) {
  const int m = int(s.nodes.size());
  const double w = s.h * s.h;
  const double c = -1.0 / (2 * std::numbers::pi);
  Eigen::MatrixXd G(m, m);
  const double self = c * log_cell_average(s.h / 2) * w;
  for (int a = 0; a < m; ++a) {
    G(a, a) = self;
    for (int b = a + 1; b < m; ++b) {
      double r = std::hypot(s.x1(a) - s.x1(b), s.x2(a) - s.x2(b));
      G(a, b) = G(b, a) = c * std::log(r) * w;
    }
  }
  return G;
}

/// Householder reflector H (symmetric, orthogonal) with H vhat = e_1; columns
/// 2..m of H span ran(Q) = vhat^perp.
inline Eigen::MatrixXd complement_basis(const Eigen::VectorXd& vhat) {
  const int m = int(vhat.size());
  Eigen::VectorXd w = vhat;
  double s = vhat(0) >= 0 ? 1.0 : -1.0;
  w(0) += s;
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(m, m) - 2.0 * w * w.transpose() / w.squaredNorm();
  // H vhat = -s e_1; drop the first column
  return H.rightCols(m - 1);
}

struct NonResonanceReport {
  double sigma_min = 0.0;
  double threshold = 1e-3;
  int support_size = 0;
  bool pass = false;
};

/// D0 = Q (U + v G0 v) Q restricted to ran(Q); returns its smallest singular value.
inline Eigen::MatrixXd assemble_d0(const SupportSet& s) {
  Eigen::MatrixXd G = log_kernel_matrix(s);
  Eigen::MatrixXd A = s.v.asDiagonal() * G * s.v.asDiagonal();
  A.diagonal() += s.u;
  return A;
}

inline NonResonanceReport check_non_resonance(const Potential& V, double threshold = 1e-3) {
  if (V.is_zero()) throw DomainError("potential numerically zero");
  SupportSet s = support_of(V);
  Eigen::MatrixXd A = assemble_d0(s);
  Eigen::MatrixXd B = complement_basis(s.v.normalized());
  Eigen::MatrixXd C = B.transpose() * A * B;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C, Eigen::EigenvaluesOnly);
  NonResonanceReport r;
  r.sigma_min = es.eigenvalues().cwiseAbs().minCoeff();
  r.threshold = threshold;
  r.support_size = int(s.nodes.size());
  r.pass = r.sigma_min > threshold;
  return r;
}

}  // namespace nls2d
