#pragma once

// Independent reference computations used by the unit and acceptance tests.
// None of these share code with the library beyond plain data types.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

/// Eigenvalues of -u'' - u'/r + m^2 u/r^2 + V(r) u on (0, R) with u(R) = 0, by the
/// conservative second-order finite-difference scheme on a cell-centred grid.
inline std::vector<double> radial_fd_eigenvalues(const std::function<double(double)>& V, int m, double R, int N) {
  const double h = R / N;
  Eigen::VectorXd diag(N), off(N - 1);
  for (int j = 0; j < N; ++j) {
    double r = (j + 0.5) * h;
    double rm = j * h, rp = (j + 1) * h;
    // Dirichlet at R imposed half a cell beyond the last centre (ghost value -u_N)
    double right = (j == N - 1) ? 2 * rp : rp;
    diag(j) = (rm + right) / (r * h * h) + m * m / (r * r) + V(r);
    if (j + 1 < N) {
      double rn = (j + 1.5) * h;
      // symmetrized with weights sqrt(r_j)
      off(j) = -rp / (h * h) / std::sqrt(r * rn);
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, off, Eigen::EigenvaluesOnly);
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + N);
  return out;
}

/// Richardson-extrapolated lowest eigenvalue in angular channel m.
inline double radial_ground_energy(const std::function<double(double)>& V, int m, double R, int N) {
  double a = radial_fd_eigenvalues(V, m, R, N)[0];
  double b = radial_fd_eigenvalues(V, m, R, 2 * N)[0];
  return (4 * b - a) / 3;
}

/// Number of eigenvalues below -cutoff counted over all angular channels with
/// multiplicity two for m != 0.
inline int radial_negative_count(const std::function<double(double)>& V, double R, int N, double cutoff = 1e-6) {
  int total = 0;
  for (int m = 0; m < 64; ++m) {
    auto ev = radial_fd_eigenvalues(V, m, R, N);
    int c = int(std::count_if(ev.begin(), ev.end(), [cutoff](double e) { return e < -cutoff; }));
    if (c == 0) break;
    total += (m == 0 ? 1 : 2) * c;
  }
  return total;
}

/// Radial profile of the positive solution of phi'' + phi'/r + (E - V) phi - alpha phi^3 = 0
/// decaying at infinity, found by shooting on phi(0) with RK4 in r.
/// Returns samples on r_k = k * dr, k = 0..K.
struct RadialProfile {
  double dr = 0;
  std::vector<double> phi;
  double at(double r) const {
    double s = r / dr;
    std::size_t k = std::size_t(s);
    if (k + 3 >= phi.size()) return 0.0;
    if (k == 0) k = 1;
    // cubic Lagrange on k-1..k+2
    double t = s - double(k);
    double p0 = phi[k - 1], p1 = phi[k], p2 = phi[k + 1], p3 = phi[k + 2];
    return p1 + 0.5 * t * (p2 - p0 + t * (2 * p0 - 5 * p1 + 4 * p2 - p3 + t * (3 * (p1 - p2) + p3 - p0)));
  }
};

inline RadialProfile radial_shooting_profile(const std::function<double(double)>& V, double E, double alpha, double p,
                                             double amp_lo, double amp_hi, double R = 12.0, int K = 24000) {
  const double dr = R / K;
  // integrate from r0 small with series start; returns +1 if it overshoots (crosses zero), -1 if it turns up
  auto shoot = [&](double a, std::vector<double>* out) {
    auto rhs = [&](double r, double y, double yp) {
      return -yp / r + (V(r) - E) * y + alpha * std::pow(std::abs(y), p - 1) * y;
    };
    double r = dr * 1e-3;
    double c2 = 0.25 * ((V(0) - E) * a + alpha * std::pow(a, p));
    double y = a + c2 * r * r, yp = 2 * c2 * r;
    if (out) {
      out->assign(K + 1, 0.0);
      (*out)[0] = a;
    }
    // first step lands on r = dr
    double hstep = dr - r;
    for (int k = 0; k < K; ++k) {
      double h = (k == 0) ? hstep : dr;
      double k1y = yp, k1p = rhs(r, y, yp);
      double k2y = yp + 0.5 * h * k1p, k2p = rhs(r + 0.5 * h, y + 0.5 * h * k1y, yp + 0.5 * h * k1p);
      double k3y = yp + 0.5 * h * k2p, k3p = rhs(r + 0.5 * h, y + 0.5 * h * k2y, yp + 0.5 * h * k2p);
      double k4y = yp + h * k3p, k4p = rhs(r + h, y + h * k3y, yp + h * k3p);
      y += h / 6 * (k1y + 2 * k2y + 2 * k3y + k4y);
      yp += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p);
      r += h;
      if (out) (*out)[k + 1] = y;
      if (y < 0) return +1;
      if (yp > 0) return -1;
    }
    return 0;
  };
  int slo = shoot(amp_lo, nullptr), shi = shoot(amp_hi, nullptr);
  if (slo == shi) return {};
  for (int it = 0; it < 200 && amp_hi - amp_lo > 1e-15 * amp_hi; ++it) {
    double mid = 0.5 * (amp_lo + amp_hi);
    int s = shoot(mid, nullptr);
    if (s == slo)
      amp_lo = mid;
    else
      amp_hi = mid;
  }
  RadialProfile prof;
  prof.dr = dr;
  shoot(0.5 * (amp_lo + amp_hi), &prof.phi);
  // the diverging tail beyond the turning point is cut to zero
  for (std::size_t k = 1; k < prof.phi.size(); ++k) {
    if (prof.phi[k] <= 0 || (k > 10 && prof.phi[k] > prof.phi[k - 1])) {
      std::fill(prof.phi.begin() + long(k), prof.phi.end(), 0.0);
      break;
    }
  }
  return prof;
}

}  // namespace oracle
