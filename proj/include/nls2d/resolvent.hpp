#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "nls2d/bessel.hpp"
#include "nls2d/grid.hpp"
#include "nls2d/krylov.hpp"
#include "nls2d/probes.hpp"
#include "nls2d/spectral.hpp"

namespace nls2d {

inline void check_side(int side) {
  if (side != 1 && side != -1) throw DomainError("side must be +1 or -1");
}

/// c_pm(lambda) = pm i/4 - gamma/(2 pi) - log(lambda/4)/(4 pi).
inline cplx c_pm(double lambda, int side) {
  check_side(side);
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  return {-kEulerGamma / (2 * std::numbers::pi) - std::log(lambda / 4) / (4 * std::numbers::pi), side * 0.25};
}

inline int next_fft_friendly(int m) {
  while (!fft_friendly(m)) ++m;
  return m;
}

/// Convolution on a Grid2D with a radial kernel truncated at R = 1.45 l, done
/// exactly on a zero-padded periodic box of length >= 2.45 l so that no
/// periodic image reaches the original box.
class TruncatedConvolver {
 public:
  using RadialSymbol = std::function<cplx(double xi, double R)>;

  TruncatedConvolver(const Grid2D& g, const RadialSymbol& symbol) : g_(g) {
    n_ = g.n();
    N_ = next_fft_friendly(int(std::ceil(2.45 * n_)));
    R_ = 1.45 * g.l_dom();
    const double dxi = 2 * std::numbers::pi / (N_ * g.spacing());
    // the symbol depends on m1^2 + m2^2 only
    const int half = N_ / 2;
    std::vector<cplx> cache(std::size_t(2 * half * half + 1), cplx(NAN, 0));
    mult_.resize(std::size_t(N_) * N_);
    for (int i = 0; i < N_; ++i) {
      int m1 = i <= half ? i : i - N_;
      for (int j = 0; j < N_; ++j) {
        int m2 = j <= half ? j : j - N_;
        std::size_t q = std::size_t(m1 * m1 + m2 * m2);
        if (std::isnan(cache[q].real())) cache[q] = symbol(dxi * std::sqrt(double(q)), R_);
        mult_[std::size_t(i) * N_ + j] = cache[q];
      }
    }
  }

  ComplexField apply(const ComplexField& f) const {
    if (f.grid() != g_) throw DomainError("field lives on a different grid");
    cvec pad(std::size_t(N_) * N_, cplx(0, 0)), hat(pad.size());
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) pad[std::size_t(i) * N_ + j] = f[g_.index(i, j)];
    detail::execute(N_, FFTW_FORWARD, pad.data(), hat.data());
    for (std::size_t k = 0; k < hat.size(); ++k) hat[k] *= mult_[k];
    detail::execute(N_, FFTW_BACKWARD, hat.data(), pad.data());
    ComplexField out(g_);
    const double s = 1.0 / (double(N_) * N_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) out[g_.index(i, j)] = s * pad[std::size_t(i) * N_ + j];
    return out;
  }

  int padded_size() const { return N_; }
  double radius() const { return R_; }
  const Grid2D& grid() const { return g_; }

 private:
  Grid2D g_;
  int n_ = 0, N_ = 0;
  double R_ = 0.0;
  cvec mult_;
};

/// Fourier transform of (i/4) H0^{+}(k r) 1_{r < R}.
inline cplx helmholtz_truncated_symbol(double xi, double R, double k) {
  const cplx I(0, 1);
  BesselEval kr = bessel_eval(k * R);
  cplx H0(kr.j0, kr.y0), H1(kr.j1, kr.y1);
  if (std::abs(xi - k) * R < 1.0) {
    // numerator N vanishes at xi = k and N'(s) = (i pi R / 2)(s R J0(sR) H0 + k R J1(sR) H1),
    // so the symbol is the mean of N' over [k, xi] divided by xi + k
    if (xi == k) return I * std::numbers::pi * R * R / 4.0 * (kr.j0 * H0 + kr.j1 * H1);
    auto dn = [&](double s) {
      BesselEval e = bessel_eval(s * R);
      return I * std::numbers::pi * R / 2.0 * (s * R * e.j0 * H0 + k * R * e.j1 * H1);
    };
    using GL = boost::math::quadrature::gauss<double, 10>;
    double re = GL::integrate([&](double s) { return dn(s).real(); }, k, xi);
    double im = GL::integrate([&](double s) { return dn(s).imag(); }, k, xi);
    return cplx(re, im) / ((xi - k) * (xi + k));
  }
  BesselEval xr = bessel_eval(xi * R);
  cplx num = 1.0 + I * std::numbers::pi * R / 2.0 * (xi * xr.j1 * H0 - k * xr.j0 * H1);
  return num / (xi * xi - k * k);
}

/// Fourier transform of -(2 pi)^{-1} log r 1_{r < R}.
inline cplx laplace_truncated_symbol(double xi, double R) {
  if (xi == 0.0) return R * R / 4 - R * R * std::log(R) / 2;
  BesselEval xr = bessel_eval(xi * R);
  return (1.0 - xr.j0) / (xi * xi) - R * std::log(R) * xr.j1 / xi;
}

/// R0(k^2 pm i0) on a grid; the minus side is obtained by conjugation.
class FreeResolvent {
 public:
  FreeResolvent(const Grid2D& g, double k)
      : k_(k), conv_(check_k(g, k), [k](double xi, double R) { return helmholtz_truncated_symbol(xi, R, k); }) {}

  ComplexField apply(const ComplexField& f, int side) const {
    check_side(side);
    require_finite(f, "resolvent input");
    if (side == 1) return conv_.apply(f);
    return conv_.apply(f.conj()).conj();
  }

  double k() const { return k_; }
  const Grid2D& grid() const { return conv_.grid(); }

 private:
  static const Grid2D& check_k(const Grid2D& g, double k) {
    if (!(k > 0.0) || !std::isfinite(k)) throw DomainError("k must be positive; use the low-energy expansion near 0");
    return g;
  }
  double k_;
  TruncatedConvolver conv_;
};

inline ComplexField free_resolvent_apply(double k, const ComplexField& f, int side) {
  return FreeResolvent(f.grid(), k).apply(f, side);
}

/// G0 f with kernel -(2 pi)^{-1} log|x - y|.
class LogPotential {
 public:
  explicit LogPotential(const Grid2D& g) : conv_(g, [](double xi, double R) { return laplace_truncated_symbol(xi, R); }) {}
  ComplexField apply(const ComplexField& f) const { return conv_.apply(f); }

 private:
  TruncatedConvolver conv_;
};

/// P0 f = <f, 1> 1.
inline ComplexField apply_p0(const ComplexField& f) {
  cplx s = 0;
  for (const auto& z : f.values()) s += z;
  s *= f.grid().cell_area();
  ComplexField out(f.grid());
  for (auto& z : out.values()) z = s;
  return out;
}

/// Direct evaluation of R0(k^2 pm i0) fn at target points by polar quadrature
/// around each target; fn must be negligible outside the disc |y - center| < rho.
inline std::vector<cplx> free_resolvent_direct(double k, int side, const std::function<cplx(double, double)>& fn,
                                               double cx, double cy, double rho,
                                               const std::vector<std::pair<double, double>>& targets,
                                               int angular_points = 256) {
  check_side(side);
  if (!(k > 0.0)) throw DomainError("k must be positive");
  using GL = boost::math::quadrature::gauss<double, 20>;
  std::vector<cplx> out;
  for (auto [x, y] : targets) {
    const double rmax = std::hypot(x - cx, y - cy) + rho;
    std::vector<double> edges{0.0};
    for (double a = 1e-6; a < std::min(0.5, rmax); a *= 4) edges.push_back(a);
    double cap = std::min(std::numbers::pi / k, 0.5);
    double start = edges.back();
    int pieces = std::max(1, int(std::ceil((rmax - start) / cap)));
    for (int p = 1; p <= pieces; ++p) edges.push_back(start + (rmax - start) * p / pieces);
    auto ring = [&](double r) {
      cplx s = 0;
      for (int m = 0; m < angular_points; ++m) {
        double th = 2 * std::numbers::pi * m / angular_points;
        s += fn(x + r * std::cos(th), y + r * std::sin(th));
      }
      return s * (2 * std::numbers::pi / angular_points);
    };
    cplx acc = 0;
    for (std::size_t i = 1; i < edges.size(); ++i) {
      // kernel (pm i / 4) H0^{pm}(k r)
      auto kern = [&](double r) {
        BesselEval b = bessel_eval(k * r);
        return cplx(0, 0.25 * side) * cplx(b.j0, side * b.y0) * r * ring(r);
      };
      auto re = [&](double r) { return r == 0.0 ? 0.0 : kern(r).real(); };
      auto im = [&](double r) { return r == 0.0 ? 0.0 : kern(r).imag(); };
      acc += cplx(GL::integrate(re, edges[i - 1], edges[i]), GL::integrate(im, edges[i - 1], edges[i]));
    }
    out.push_back(acc);
  }
  return out;
}

/// Smooth cutoff equal to 1 on |x_i| <= a and 0 on |x_i| >= b (each axis).
inline std::vector<double> box_window(const Grid2D& g, double a, double b) {
  auto psi = [](double t) { return t > 0 ? std::exp(-1.0 / t) : 0.0; };
  auto step = [&](double s) {
    double t = std::abs(s);
    if (t <= a) return 1.0;
    if (t >= b) return 0.0;
    double u = (b - t) / (b - a);
    return psi(u) / (psi(u) + psi(1 - u));
  };
  std::vector<double> w(g.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = step(g.x1(i)) * step(g.x2(i));
  return w;
}

struct InverseCheck {
  double interior_error = 0.0;  // max |(-Delta - k^2)(chi u) - f| / max|f| where chi = 1
  double interior_half_width = 0.0;
};

/// Applies -Delta - k^2 spectrally to a windowed R0 f and compares with f on
/// the region where the window is identically 1.
inline InverseCheck resolvent_inverse_check(const FreeResolvent& R0, const ComplexField& f, int side) {
  const Grid2D& g = f.grid();
  const double l = g.l_dom(), a = 0.25 * l, b = 0.45 * l;
  ComplexField u = R0.apply(f, side);
  auto chi = box_window(g, a, b);
  ComplexField cu = u.times(chi);
  ComplexField r = laplacian(cu);
  r *= -1.0;
  r.axpy(-R0.k() * R0.k(), cu);
  double err = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (std::max(std::abs(g.x1(i)), std::abs(g.x2(i))) <= a) err = std::max(err, std::abs(r[i] - f[i]));
  const double fm = f.max_abs();
  return {fm > 0 ? err / fm : err, a};
}

/// sup_x (int |R0(k^2 + i0) f(x)|^2 2k dk)^{1/2} at a
/// coarse and a doubled k resolution (composite Simpson on [k_lo, k_hi]).
struct KIntegralReport {
  std::vector<std::pair<double, double>> points;
  std::vector<double> coarse, fine;  // per point
  double sup_coarse = 0, sup_fine = 0, relative_change = 0;
  int intervals = 0;
};

inline KIntegralReport k_integral_sup(const ComplexField& f, const std::vector<std::pair<double, double>>& points,
                                      double k_lo = 0.05, double k_hi = 10.0, int intervals = 64, int side = 1) {
  check_side(side);
  if (intervals < 2 || intervals % 2) throw DomainError("Simpson needs an even number of intervals");
  if (!(k_lo > 0.0 && k_hi > k_lo)) throw DomainError("bad k range");
  const Grid2D& g = f.grid();
  std::vector<std::size_t> idx;
  for (auto [x, y] : points) {
    int i = int(std::lround((x + 0.5 * g.l_dom()) / g.spacing())), j = int(std::lround((y + 0.5 * g.l_dom()) / g.spacing()));
    if (i < 0 || j < 0 || i >= g.n() || j >= g.n()) throw DomainError("sample point outside the box");
    idx.push_back(g.index(i, j));
  }
  const int M = 2 * intervals;
  const double dk = (k_hi - k_lo) / M;
  std::vector<std::vector<double>> val(idx.size(), std::vector<double>(M + 1));
  for (int m = 0; m <= M; ++m) {
    double k = k_lo + m * dk;
    ComplexField u = FreeResolvent(g, k).apply(f, side);
    for (std::size_t p = 0; p < idx.size(); ++p) val[p][m] = std::norm(u[idx[p]]) * 2 * k;
  }
  auto simpson = [](const std::vector<double>& v, int stride, double h) {
    int n = int(v.size() - 1) / stride;
    double s = v.front() + v.back();
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4 : 2) * v[std::size_t(i) * stride];
    return s * h / 3;
  };
  KIntegralReport r;
  r.points = points;
  r.intervals = intervals;
  for (std::size_t p = 0; p < idx.size(); ++p) {
    r.coarse.push_back(std::sqrt(simpson(val[p], 2, 2 * dk)));
    r.fine.push_back(std::sqrt(simpson(val[p], 1, dk)));
  }
  r.sup_coarse = *std::max_element(r.coarse.begin(), r.coarse.end());
  r.sup_fine = *std::max_element(r.fine.begin(), r.fine.end());
  r.relative_change = std::abs(r.sup_fine / r.sup_coarse - 1.0);
  return r;
}

/// ||<x>^{-s} a|| / ||<x>^{s} b||
inline double weighted_ratio(const ComplexField& a, const ComplexField& b, double s) {
  double d = weighted_norm(b, WeightSpec{s, 1});
  return d > 0 ? weighted_norm(a, WeightSpec{s, -1}) / d : 0.0;
}

struct LowEnergyExpansion {
  double lambda = 0.0;
  int side = 1;
  cplx c_plus, c_minus;
  double s = 1.5;
  std::vector<std::string> probe_names;
  std::vector<double> remainder_ratios;  // ||E0 f||_{L^{2,-s}} / ||f||_{L^{2,s}}
  double remainder = 0.0;                // max over probes
};

/// Measures E0(lambda) = R0(lambda pm i0) - c_pm(lambda) P0 - G0 on probe fields.
inline LowEnergyExpansion low_energy_expansion(double lambda, const Grid2D& g, const std::vector<ProbeField>& probes,
                                               int side = 1, double s = 1.5, double lambda1 = 0.05) {
  check_side(side);
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  if (lambda > lambda1) throw DomainError("lambda above the low-energy window lambda_1");
  LowEnergyExpansion le;
  le.lambda = lambda;
  le.side = side;
  le.c_plus = c_pm(lambda, 1);
  le.c_minus = c_pm(lambda, -1);
  le.s = s;
  FreeResolvent R0(g, std::sqrt(lambda));
  LogPotential G0(g);
  const cplx c = side == 1 ? le.c_plus : le.c_minus;
  for (const auto& p : probes) {
    ComplexField e = R0.apply(p.f, side);
    e.axpy(-c, apply_p0(p.f));
    e -= G0.apply(p.f);
    le.probe_names.push_back(p.name);
    le.remainder_ratios.push_back(weighted_ratio(e, p.f, s));
  }
  le.remainder = le.remainder_ratios.empty()
                     ? 0.0
                     : *std::max_element(le.remainder_ratios.begin(), le.remainder_ratios.end());
  return le;
}

struct PerturbedResolvent {
  ComplexField g;
  int iterations = 0;
  double residual = 0.0;  // ||g + R0 V g - R0 f|| / ||R0 f||
};

/// R(lambda pm i0) f from (I + R0 V) g = R0 f.
inline PerturbedResolvent perturbed_resolvent_apply(double lambda, int side, const Potential& V, const ComplexField& f,
                                                    const FreeResolvent* R0 = nullptr, KrylovOptions opt = {}) {
  check_side(side);
  if (!(lambda >= 1e-3)) throw DomainError("lambda must be at least 1e-3 away from the threshold");
  std::unique_ptr<FreeResolvent> own;
  if (!R0 || std::abs(R0->k() - std::sqrt(lambda)) > 1e-14 * std::sqrt(lambda)) {
    own = std::make_unique<FreeResolvent>(V.grid, std::sqrt(lambda));
    R0 = own.get();
  }
  if (side == -1) {
    PerturbedResolvent p = perturbed_resolvent_apply(lambda, 1, V, f.conj(), R0, opt);
    p.g = p.g.conj();
    return p;
  }
  ComplexField rhs = R0->apply(f, 1);
  if (V.is_zero()) return {rhs, 0, 0.0};
  auto A = [&](const ComplexField& x) {
    ComplexField y = x;
    y += R0->apply(x.times(V.values), 1);
    return y;
  };
  if (opt.tol == KrylovOptions{}.tol) opt.tol = 1e-9;
  KrylovResult kr = gmres(A, rhs, ComplexField(V.grid), opt);
  double rn = l2_norm(rhs);
  double res = rn > 0 ? l2_norm(A(kr.x) - rhs) / rn : 0.0;
  if (!kr.converged || res > 1e-6)
    throw ConvergenceError("resolvent iteration failed near a numerical resonance at lambda = " + std::to_string(lambda),
                           res);
  return {kr.x, kr.iterations, res};
}

struct HighEnergyReport {
  std::vector<double> lambdas;
  std::vector<std::string> probe_names;
  std::vector<std::vector<double>> ratios;  // [lambda][probe], times <lambda>^{1/2}
  std::vector<double> sup_over_probes;
  double max_over_min = 0.0;
};

/// <lambda>^{1/2} ||R(lambda + i0) P_c f||_{L^{2,-s}} / ||f||_{L^{2,s}} over a lambda sweep.
inline HighEnergyReport high_energy_profile(const Potential& V, const SpectralData& sd,
                                            const std::vector<ProbeField>& probes, const std::vector<double>& lambdas,
                                            double s = 1.5) {
  HighEnergyReport r;
  r.lambdas = lambdas;
  for (const auto& p : probes) r.probe_names.push_back(p.name);
  for (double lam : lambdas) {
    FreeResolvent R0(V.grid, std::sqrt(lam));
    std::vector<double> row;
    for (const auto& p : probes) {
      ComplexField pc = project(p.f, SpectralPart::continuous, sd);
      auto g = perturbed_resolvent_apply(lam, 1, V, pc, &R0).g;
      row.push_back(std::pow(1 + lam * lam, 0.25) * weighted_ratio(g, p.f, s));
    }
    r.sup_over_probes.push_back(*std::max_element(row.begin(), row.end()));
    r.ratios.push_back(std::move(row));
  }
  auto [mn, mx] = std::minmax_element(r.sup_over_probes.begin(), r.sup_over_probes.end());
  r.max_over_min = *mx / *mn;
  return r;
}

/// M(lambda pm i0) = U + v R0 v on the support nodes (cell quadrature, exact
/// cell average of the logarithmic part on the diagonal).
inline Eigen::MatrixXcd m_matrix(double lambda, int side, const SupportSet& s) {
  check_side(side);
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
  const int m = int(s.nodes.size());
  const double k = std::sqrt(lambda), w = s.h * s.h;
  Eigen::MatrixXcd M(m, m);
  const cplx diag = c_pm(lambda, 1) - log_cell_average(s.h / 2) / (2 * std::numbers::pi);
  for (int a = 0; a < m; ++a) {
    M(a, a) = s.u(a) + s.v(a) * s.v(a) * diag * w;
    for (int b = a + 1; b < m; ++b) {
      double r = std::hypot(s.x1(a) - s.x1(b), s.x2(a) - s.x2(b));
      BesselEval e = bessel_eval(k * r);
      M(a, b) = M(b, a) = s.v(a) * s.v(b) * w * cplx(0, 0.25) * cplx(e.j0, e.y0);
    }
  }
  if (side == -1) M = M.conjugate().eval();
  return M;
}

/// Q X Q restricted to ran(Q) = vhat^perp via the reflector of complement_basis.
template <class Mat>
Mat compress_q(const Mat& X, const Eigen::VectorXd& vhat) {
  const int m = int(vhat.size());
  Eigen::VectorXd w = vhat;
  w(0) += vhat(0) >= 0 ? 1.0 : -1.0;
  const double nn = w.squaredNorm();
  using Vec = Eigen::Matrix<typename Mat::Scalar, Eigen::Dynamic, 1>;
  Vec wc = w.template cast<typename Mat::Scalar>();
  Vec Xw = X * wc;
  Eigen::Matrix<typename Mat::Scalar, 1, Eigen::Dynamic> wX = wc.transpose() * X;
  typename Mat::Scalar wXw = (wc.transpose() * Xw)(0);
  Mat Y = X - (2.0 / nn) * wc * wX - (2.0 / nn) * Xw * wc.transpose() + (4.0 * wXw / (nn * nn)) * wc * wc.transpose();
  return Y.bottomRightCorner(m - 1, m - 1);
}

struct MOperatorSample {
  double lambda = 0.0;
  cplx h;                   // 1 / <vhat, M^{-1} vhat>
  double qmq_vs_qd0q = 0.0;  // ||Q (M - D0) Q||_F / ||Q D0 Q||_F
};

struct MOperatorFit {
  int side = 1;
  std::vector<MOperatorSample> samples;
  double a = 0.0;
  cplx z;
  double fit_residual = 0.0;  // max relative misfit of <vhat, M^{-1} vhat> against 1/(a log lambda + z)
  bool reliable = true;
  std::string note;
  double a_reference = 0.0;  // -||V||_1 / (4 pi), the coefficient of log lambda in ||V||_1 c_pm
  int support_size = 0;
};

inline MOperatorFit m_operator_fit(const std::vector<double>& lambdas, const Potential& V, int side = 1,
                                   double lambda1 = 0.05) {
  check_side(side);
  if (lambdas.size() < 2) throw DomainError("need at least two energies for the fit");
  for (double l : lambdas)
    if (!(l > 0.0 && l <= lambda1)) throw DomainError("fit energies must lie in (0, lambda_1]");
  SupportSet s = support_of(V);
  Eigen::VectorXd vhat = s.v.normalized();
  Eigen::MatrixXd D0 = assemble_d0(s);
  Eigen::MatrixXd qd0q = compress_q(D0, vhat);
  MOperatorFit fit;
  fit.side = side;
  fit.support_size = int(s.nodes.size());
  fit.a_reference = -s.v_l1 / (4 * std::numbers::pi);
  for (double lam : lambdas) {
    Eigen::MatrixXcd M = m_matrix(lam, side, s);
    Eigen::VectorXcd vc = vhat.cast<cplx>();
    Eigen::VectorXcd y = M.partialPivLu().solve(vc);
    cplx ip = vc.dot(y);
    Eigen::MatrixXcd qmq = compress_q(M, vhat);
    double rel = (qmq - qd0q.cast<cplx>()).norm() / qd0q.norm();
    fit.samples.push_back({lam, 1.0 / ip, rel});
  }
  // Re h = a log(lambda) + Re z, Im h = Im z
  const int n = int(lambdas.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  double im = 0.0;
  for (int i = 0; i < n; ++i) {
    A(i, 0) = std::log(fit.samples[i].lambda);
    A(i, 1) = 1.0;
    b(i) = fit.samples[i].h.real();
    im += fit.samples[i].h.imag() / n;
  }
  Eigen::Vector2d c = A.colPivHouseholderQr().solve(b);
  fit.a = c(0);
  fit.z = cplx(c(1), im);
  for (const auto& smp : fit.samples) {
    cplx model = 1.0 / (fit.a * std::log(smp.lambda) + fit.z);
    fit.fit_residual = std::max(fit.fit_residual, std::abs(1.0 / smp.h - model) / std::abs(1.0 / smp.h));
  }
  if (fit.fit_residual > 0.2) {
    fit.reliable = false;
    fit.note = "log-fit unreliable";
  }
  return fit;
}

}  // namespace nls2d
