#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "nls2d/grid.hpp"

namespace nls2d {

using LinearOp = std::function<ComplexField(const ComplexField&)>;

struct KrylovResult {
  ComplexField x;
  int iterations = 0;
  double residual = 0.0;  // relative, ||b - A x|| / ||b||
  bool converged = false;
};

struct KrylovOptions {
  double tol = 1e-10;
  int max_iter = 500;
  int restart = 60;  // GMRES only
};

namespace detail {
inline double norm2(const ComplexField& f) {
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += std::norm(f[i]);
  return std::sqrt(acc);
}
inline cplx dot(const ComplexField& a, const ComplexField& b) {
  cplx acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}
}  // namespace detail

/// Preconditioned conjugate gradients for a Hermitian positive definite A.
/// `precond` applies an approximation of A^{-1} (identity when empty).
inline KrylovResult conjugate_gradient(const LinearOp& A, const ComplexField& b, const ComplexField& x0,
                                       const KrylovOptions& opt, const LinearOp& precond = {}) {
  KrylovResult res{x0};
  const double bnorm = detail::norm2(b);
  if (bnorm == 0.0) {
    res.x = ComplexField(b.grid());
    res.converged = true;
    return res;
  }
  ComplexField r = b - A(res.x);
  ComplexField z = precond ? precond(r) : r;
  ComplexField p = z;
  double rz = detail::dot(r, z).real();
  double rn = detail::norm2(r) / bnorm;
  int it = 0;
  while (rn > opt.tol && it < opt.max_iter) {
    ComplexField ap = A(p);
    double pap = detail::dot(p, ap).real();
    if (!(pap > 0.0)) throw ConvergenceError("CG: operator is not positive definite", rn);
    double alpha = rz / pap;
    res.x.axpy(alpha, p);
    r.axpy(-alpha, ap);
    rn = detail::norm2(r) / bnorm;
    ++it;
    if (rn <= opt.tol) break;
    z = precond ? precond(r) : r;
    double rz_new = detail::dot(r, z).real();
    double beta = rz_new / rz;
    rz = rz_new;
    p *= beta;
    p += z;
  }
  res.iterations = it;
  res.residual = detail::norm2(b - A(res.x)) / bnorm;
  res.converged = res.residual <= 10 * opt.tol;
  return res;
}

/// Preconditioned MINRES for Hermitian (possibly indefinite) A with a
/// Hermitian positive definite preconditioner.
inline KrylovResult minres(const LinearOp& A, const ComplexField& b, const KrylovOptions& opt,
                           const LinearOp& precond = {}) {
  const Grid2D& g = b.grid();
  KrylovResult res{ComplexField(g)};
  const double bnorm = detail::norm2(b);
  if (bnorm == 0.0) {
    res.converged = true;
    return res;
  }
  auto M = [&](const ComplexField& v) { return precond ? precond(v) : v; };
  ComplexField r1 = b;
  ComplexField y = M(r1);
  double beta1 = detail::dot(r1, y).real();
  if (!(beta1 > 0.0)) throw ConvergenceError("MINRES: preconditioner is not positive definite", 1.0);
  beta1 = std::sqrt(beta1);
  double oldb = 0, beta = beta1, dbar = 0, epsln = 0, phibar = beta1;
  double cs = -1, sn = 0;
  ComplexField w(g), w2(g), r2 = r1;
  int it = 0;
  const double eps = std::numeric_limits<double>::epsilon();
  while (it < opt.max_iter) {
    ++it;
    ComplexField v = (1.0 / beta) * y;
    y = A(v);
    if (it >= 2) y.axpy(-beta / oldb, r1);
    double alfa = detail::dot(v, y).real();
    y.axpy(-alfa / beta, r2);
    r1 = r2;
    r2 = y;
    y = M(r2);
    oldb = beta;
    double bb = detail::dot(r2, y).real();
    if (bb < 0) throw ConvergenceError("MINRES: preconditioner is not positive definite", phibar / beta1);
    beta = std::sqrt(bb);
    double oldeps = epsln;
    double delta = cs * dbar + sn * alfa;
    double gbar = sn * dbar - cs * alfa;
    epsln = sn * beta;
    dbar = -cs * beta;
    double gamma = std::max(std::hypot(gbar, beta), eps);
    cs = gbar / gamma;
    sn = beta / gamma;
    double phi = cs * phibar;
    phibar = sn * phibar;
    ComplexField w1 = w2;
    w2 = w;
    w = v;
    w.axpy(-oldeps, w1);
    w.axpy(-delta, w2);
    w *= 1.0 / gamma;
    res.x.axpy(phi, w);
    if (phibar / beta1 <= opt.tol || beta == 0.0) break;
  }
  res.iterations = it;
  res.residual = detail::norm2(b - A(res.x)) / bnorm;
  res.converged = res.residual <= 10 * opt.tol;
  return res;
}

/// Restarted GMRES (right-preconditioned when `precond` is given).
inline KrylovResult gmres(const LinearOp& A, const ComplexField& b, const ComplexField& x0, const KrylovOptions& opt,
                          const LinearOp& precond = {}) {
  KrylovResult res{x0};
  const double bnorm = detail::norm2(b);
  if (bnorm == 0.0) {
    res.x = ComplexField(b.grid());
    res.converged = true;
    return res;
  }
  auto M = [&](const ComplexField& v) { return precond ? precond(v) : v; };
  const int m = std::max(1, opt.restart);
  int total = 0;
  double rn = 0;
  while (total < opt.max_iter) {
    ComplexField r = b - A(res.x);
    double beta = detail::norm2(r);
    rn = beta / bnorm;
    if (rn <= opt.tol) break;
    std::vector<ComplexField> V;
    V.push_back((1.0 / beta) * r);
    Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
    Eigen::VectorXcd gvec = Eigen::VectorXcd::Zero(m + 1);
    gvec(0) = beta;
    std::vector<cplx> cs(m), sn(m);
    int j = 0;
    for (; j < m && total < opt.max_iter; ++j, ++total) {
      ComplexField wv = A(M(V[j]));
      for (int i = 0; i <= j; ++i) {
        H(i, j) = detail::dot(V[i], wv);
        wv.axpy(-H(i, j), V[i]);
      }
      // second pass keeps the basis orthogonal when the operator is far from normal
      for (int i = 0; i <= j; ++i) {
        cplx c = detail::dot(V[i], wv);
        H(i, j) += c;
        wv.axpy(-c, V[i]);
      }
      double hn = detail::norm2(wv);
      H(j + 1, j) = hn;
      for (int i = 0; i < j; ++i) {
        cplx t = std::conj(cs[i]) * H(i, j) + std::conj(sn[i]) * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = t;
      }
      double den = std::hypot(std::abs(H(j, j)), std::abs(H(j + 1, j)));
      if (den == 0.0) {
        cs[j] = 1.0;
        sn[j] = 0.0;
      } else {
        cs[j] = H(j, j) / den;
        sn[j] = H(j + 1, j) / den;
      }
      H(j, j) = den;
      H(j + 1, j) = 0.0;
      gvec(j + 1) = -sn[j] * gvec(j);
      gvec(j) = std::conj(cs[j]) * gvec(j);
      rn = std::abs(gvec(j + 1)) / bnorm;
      if (hn == 0.0 || rn <= opt.tol) {
        ++j;
        ++total;
        break;
      }
      V.push_back((1.0 / hn) * wv);
    }
    Eigen::VectorXcd yv = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(gvec.head(j));
    ComplexField upd(b.grid());
    for (int i = 0; i < j; ++i) upd.axpy(yv(i), V[i]);
    res.x += M(upd);
    if (rn <= opt.tol) break;
  }
  res.iterations = total;
  res.residual = detail::norm2(b - A(res.x)) / bnorm;
  res.converged = res.residual <= 10 * opt.tol;
  return res;
}

/// (-Delta + c)^{-1}, the Fourier preconditioner used by the Schrodinger solvers.
inline LinearOp shifted_laplacian_inverse(double c) {
  if (!(c > 0.0)) throw DomainError("preconditioner shift must be positive");
  return [c](const ComplexField& f) {
    cvec fh = fft2(f);
    const auto& ksq = f.grid().ksq();
    for (std::size_t i = 0; i < fh.size(); ++i) fh[i] /= (ksq[i] + c);
    return ifft2(f.grid(), fh);
  };
}

}  // namespace nls2d
