#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "nls2d/error.hpp"

namespace nls2d {

using cplx = std::complex<double>;

enum class BesselMethod { series, asymptotic };

inline std::string to_string(BesselMethod m) { return m == BesselMethod::series ? "series" : "asymptotic"; }

/// J0, Y0, J1, Y1 at one argument together with the branch used.
struct BesselEval {
  double z = 0.0;
  double j0 = 1.0, y0 = 0.0, j1 = 0.0, y1 = 0.0;
  BesselMethod method = BesselMethod::series;
};

inline constexpr double kBesselSwitch = 12.0;
inline constexpr double kEulerGamma = 0.57721566490153286060651209008240243;

namespace detail {

// Power series in long double; at z = 12 the largest term is about 4e3 so the
// cancellation costs three digits of the 19 available.
inline BesselEval bessel_series(double zd) {
  using ld = long double;
  const ld z = zd, q = z * z / 4;
  const ld pi = std::numbers::pi_v<long double>;
  ld j0 = 0, s0 = 0, j1 = 0, s1 = 0;
  ld t0 = 1;                  // (-q)^k / (k!)^2
  ld t1 = z / 2;              // (-1)^k (z/2)^{2k+1} / (k! (k+1)!)
  ld hk = 0;                  // harmonic number H_k
  for (int k = 0; k < 200; ++k) {
    ld hk1 = hk + ld(1) / (k + 1);
    j0 += t0;
    s0 += hk * t0;
    j1 += t1;
    s1 += (hk + hk1) * t1;
    if (k > 2 && std::abs(t0) < 1e-22L * std::abs(j0) + 1e-30L && std::abs(t1) < 1e-22L * std::abs(j1) + 1e-30L) break;
    t0 *= -q / ((k + 1) * ld(k + 1));
    t1 *= -q / ((k + 1) * ld(k + 2));
    hk = hk1;
  }
  const ld lg = std::log(z / 2) + ld(kEulerGamma);
  BesselEval e;
  e.z = zd;
  e.j0 = double(j0);
  e.j1 = double(j1);
  e.y0 = double(2 / pi * (lg * j0 - s0));
  e.y1 = double(2 / pi * lg * j1 - 2 / (pi * z) - s1 / pi);
  e.method = BesselMethod::series;
  return e;
}

// Hankel asymptotic expansion P, Q for order nu, truncated at the smallest term.
inline void hankel_pq(double nu, double z, double& P, double& Q) {
  const double mu = 4 * nu * nu;
  P = 1.0;
  Q = 0.0;
  double a = 1.0;  // a_k(nu) / z^k
  double prev = 1.0;
  for (int k = 1; k < 60; ++k) {
    double odd = 2 * k - 1;
    a *= (mu - odd * odd) / (k * 8.0 * z);
    if (std::abs(a) > prev) break;
    prev = std::abs(a);
    // k odd feeds Q with sign (-1)^{(k-1)/2}, k even feeds P with sign (-1)^{k/2}
    if (k % 2) Q += ((k / 2) % 2 ? -a : a);
    else P += ((k / 2) % 2 ? -a : a);
    if (prev < 1e-17) break;
  }
}

inline BesselEval bessel_asymptotic(double z) {
  BesselEval e;
  e.z = z;
  e.method = BesselMethod::asymptotic;
  const double amp = std::sqrt(2.0 / (std::numbers::pi * z));
  double P, Q;
  hankel_pq(0.0, z, P, Q);
  double c = std::cos(z - std::numbers::pi / 4), s = std::sin(z - std::numbers::pi / 4);
  e.j0 = amp * (P * c - Q * s);
  e.y0 = amp * (P * s + Q * c);
  hankel_pq(1.0, z, P, Q);
  c = std::cos(z - 3 * std::numbers::pi / 4);
  s = std::sin(z - 3 * std::numbers::pi / 4);
  e.j1 = amp * (P * c - Q * s);
  e.y1 = amp * (P * s + Q * c);
  return e;
}

}  // namespace detail

/// All four kernels at z > 0 (z = 0 gives J only; Y entries are -inf).
inline BesselEval bessel_eval(double z) {
  if (!(z >= 0.0) || !std::isfinite(z)) throw DomainError("Bessel argument must be finite and non-negative");
  if (z == 0.0) {
    BesselEval e;
    e.y0 = e.y1 = -INFINITY;
    return e;
  }
  return z <= kBesselSwitch ? detail::bessel_series(z) : detail::bessel_asymptotic(z);
}

inline double bessel_j0(double z) { return bessel_eval(z).j0; }
inline double bessel_j1(double z) { return bessel_eval(z).j1; }

inline double bessel_y0(double z) {
  if (z == 0.0) throw DomainError("Y0 has a logarithmic singularity at 0");
  return bessel_eval(z).y0;
}

inline double bessel_y1(double z) {
  if (z == 0.0) throw DomainError("Y1 is singular at 0");
  return bessel_eval(z).y1;
}

/// H0^{+} = J0 + i Y0 (outgoing), H0^{-} = J0 - i Y0.
inline cplx hankel0(double z, int side) {
  if (side != 1 && side != -1) throw DomainError("side must be +1 or -1");
  BesselEval e = bessel_eval(z);
  if (z == 0.0) throw DomainError("H0 is singular at 0");
  return {e.j0, side * e.y0};
}

inline cplx hankel1(double z, int side) {
  if (side != 1 && side != -1) throw DomainError("side must be +1 or -1");
  if (z == 0.0) throw DomainError("H1 is singular at 0");
  BesselEval e = bessel_eval(z);
  return {e.j1, side * e.y1};
}

/// J0(z) Y0'(z) - J0'(z) Y0(z) = J1 Y0 - J0 Y1; equals 2 / (pi z).
inline double wronskian0(double z) {
  BesselEval e = bessel_eval(z);
  return e.j1 * e.y0 - e.j0 * e.y1;
}

}  // namespace nls2d
