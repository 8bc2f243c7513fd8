#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "nls2d/bound_states.hpp"
#include "nls2d/grid.hpp"
#include "nls2d/spectral.hpp"

namespace nls2d {

/// Conservation drift beyond threshold; carries the time at which it was seen.
class ConservationError : public Error {
 public:
  ConservationError(const std::string& quantity, double t, double drift)
      : Error(quantity + " drift " + std::to_string(drift) + " exceeds threshold at t = " + std::to_string(t)),
        t_(t),
        drift_(drift) {}
  double time() const noexcept { return t_; }
  double drift() const noexcept { return drift_; }

 private:
  double t_, drift_;
};

struct EvolutionConfig {
  double dt = 0.005;
  double t_final = 1.0;
  double record_every = 0.5;
  std::string scheme = "strang2";
  double max_drift_n = 1e-6;
  double max_drift_h = 1e-5;
  bool abort_on_drift = true;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("dt must be positive");
    if (!(t_final >= 0.0)) throw DomainError("t_final must be nonnegative");
    if (!(record_every > 0.0)) throw DomainError("record_every must be positive");
    if (scheme != "strang2") throw DomainError("unknown scheme '" + scheme + "' (only strang2)");
    double m = record_every / dt;
    if (std::abs(m - std::round(m)) > 1e-9 * m) throw DomainError("record_every must be an integer multiple of dt");
  }
  int steps_per_record() const { return int(std::lround(record_every / dt)); }
};

/// N(u) = int |u|^2.
inline double mass(const ComplexField& u) { return std::pow(l2_norm(u), 2); }

/// H(u) = int |grad u|^2 + V |u|^2 + (2 alpha / (p + 1)) |u|^{p+1}.
inline double energy(const ComplexField& u, const Potential& V, const Nonlinearity& nl) {
  const Grid2D& g = u.grid();
  cvec uh = fft2(u);
  const auto& ksq = g.ksq();
  double kin = 0.0;
  for (std::size_t i = 0; i < uh.size(); ++i) kin += ksq[i] * std::norm(uh[i]);
  kin *= g.cell_area() / double(g.size());
  double pot = 0.0, nonl = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double a = std::abs(u[i]);
    pot += V.values[i] * a * a;
    nonl += std::pow(a, nl.p + 1);
  }
  return kin + g.cell_area() * (pot + 2.0 * nl.alpha / (nl.p + 1) * nonl);
}

struct ConservedReport {
  double n0 = 0, h0 = 0;
  double n = 0, h = 0;
  double drift_n = 0, drift_h = 0;  // max relative deviation over recorded times
  std::vector<double> times, n_series, h_series;
};

struct Snapshot {
  double t;
  ComplexField u;
};

struct Trajectory {
  std::vector<Snapshot> snapshots;
  ConservedReport conserved;
  long steps = 0;
  double wall_seconds = 0;
};

namespace detail {

inline void check_evolution_nonlinearity(const Nonlinearity& nl) {
  if (nl.alpha != 0.0 && nl.alpha != 1.0 && nl.alpha != -1.0) throw DomainError("alpha must be -1, 0 or +1");
  if (nl.alpha != 0.0 && !(nl.p >= 1.0)) throw DomainError("nonlinearity exponent must be >= 1");
}

/// u <- exp(-i (V + alpha |u|^{p-1}) tau) u; |u| is invariant under this substep.
inline void nonlinear_phase(ComplexField& u, const Potential& V, const Nonlinearity& nl, double tau) {
  if (nl.alpha == 0.0 || nl.p == 3.0) {
    for (std::size_t i = 0; i < u.size(); ++i) {
      double w = V.values[i] + nl.alpha * std::norm(u[i]);
      u[i] *= std::polar(1.0, -w * tau);
    }
    return;
  }
  for (std::size_t i = 0; i < u.size(); ++i) {
    double w = V.values[i] + nl.alpha * std::pow(std::abs(u[i]), nl.p - 1);
    u[i] *= std::polar(1.0, -w * tau);
  }
}

struct FreeStep {
  std::vector<cplx> phase;
  FreeStep(const Grid2D& g, double dt) : phase(g.size()) {
    for (std::size_t i = 0; i < phase.size(); ++i) phase[i] = std::polar(1.0, -g.ksq()[i] * dt);
  }
  void apply(ComplexField& u) const {
    cvec uh = fft2(u);
    for (std::size_t i = 0; i < uh.size(); ++i) uh[i] *= phase[i];
    u = ifft2(u.grid(), uh);
  }
};

}  // namespace detail

/// One Strang step: half nonlinear phase, exact free step, half nonlinear phase.
inline ComplexField strang_step(const ComplexField& u, const Potential& V, const Nonlinearity& nl, double dt) {
  detail::check_evolution_nonlinearity(nl);
  ComplexField w = u;
  detail::nonlinear_phase(w, V, nl, 0.5 * dt);
  detail::FreeStep(u.grid(), dt).apply(w);
  detail::nonlinear_phase(w, V, nl, 0.5 * dt);
  return w;
}

/// Max over the field of dt |u|^{p-1}; the nonlinear substep needs it below 0.1.
inline double nonlinear_step_size(const ComplexField& u, const Nonlinearity& nl, double dt) {
  if (nl.alpha == 0.0) return 0.0;
  return dt * std::pow(u.max_abs(), nl.p - 1);
}

using SnapshotObserver = std::function<void(double t, const ComplexField& u)>;

/// Strang-split integration of i u_t + Delta u = V u + alpha |u|^{p-1} u.
/// Snapshots are stored at multiples of record_every unless `keep_snapshots` is false
/// (the observer still sees every record).
inline Trajectory nls_evolve(const ComplexField& u0, const Potential& V, const Nonlinearity& nl,
                             const EvolutionConfig& cfg, const SnapshotObserver& observer = {},
                             bool keep_snapshots = true) {
  cfg.validate();
  detail::check_evolution_nonlinearity(nl);
  require_finite(u0, "initial data");
  if (!(u0.grid() == V.grid)) throw DomainError("initial data and potential live on different grids");
  auto start = std::chrono::steady_clock::now();
  Trajectory tr;
  auto& cr = tr.conserved;
  cr.n0 = cr.n = mass(u0);
  cr.h0 = cr.h = energy(u0, V, nl);
  auto record = [&](double t, const ComplexField& u) {
    double n = mass(u), h = energy(u, V, nl);
    cr.times.push_back(t);
    cr.n_series.push_back(n);
    cr.h_series.push_back(h);
    cr.n = n;
    cr.h = h;
    double dn = std::abs(n - cr.n0) / std::max(cr.n0, 1e-300);
    double dh = std::abs(h - cr.h0) / std::max(std::abs(cr.h0), 1e-300);
    cr.drift_n = std::max(cr.drift_n, dn);
    cr.drift_h = std::max(cr.drift_h, dh);
    if (keep_snapshots) tr.snapshots.push_back({t, u});
    if (observer) observer(t, u);
    if (cfg.abort_on_drift) {
      if (dn > cfg.max_drift_n) throw ConservationError("mass", t, dn);
      if (dh > cfg.max_drift_h) throw ConservationError("energy", t, dh);
    }
  };
  if (nonlinear_step_size(u0, nl, cfg.dt) >= 0.1) throw DomainError("dt * max|u|^{p-1} must stay below 0.1");
  ComplexField u = u0;
  record(0.0, u);
  const int m = cfg.steps_per_record();
  const long records = std::lround(std::floor(cfg.t_final / cfg.record_every + 1e-9));
  detail::FreeStep free(u.grid(), cfg.dt);
  for (long r = 1; r <= records; ++r) {
    // merged half-steps: N(dt/2) [L N(dt)]^{m-1} L N(dt/2)
    detail::nonlinear_phase(u, V, nl, 0.5 * cfg.dt);
    for (int s = 0; s < m; ++s) {
      free.apply(u);
      detail::nonlinear_phase(u, V, nl, s + 1 < m ? cfg.dt : 0.5 * cfg.dt);
    }
    tr.steps += m;
    const double t = r * m * cfg.dt;
    require_finite(u, "solution at t = " + std::to_string(t));
    if (nonlinear_step_size(u, nl, cfg.dt) >= 0.1)
      throw DomainError("dt * max|u|^{p-1} reached 0.1 at t = " + std::to_string(t));
    record(t, u);
  }
  tr.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return tr;
}

/// J_0(x), ..., J_M(x) by Miller's backward recurrence normalized with J_0 + 2 sum J_{2k} = 1.
inline std::vector<double> bessel_j_sequence(double x, int M) {
  if (!(x >= 0.0)) throw DomainError("bessel_j_sequence needs x >= 0");
  std::vector<double> J(M + 1, 0.0);
  if (x == 0.0) {
    J[0] = 1.0;
    return J;
  }
  int start = std::max(M, int(x)) + 30 + int(std::sqrt(60.0 * (std::max(double(M), x) + 1)));
  if (start % 2) ++start;
  double jp1 = 0.0, j = 1e-300, norm = 0.0;
  for (int k = start; k > 0; --k) {
    double jm1 = 2.0 * k / x * j - jp1;
    jp1 = j;
    j = jm1;
    // j now holds J_{k-1}
    if (k - 1 <= M) J[k - 1] = j;
    if ((k - 1) % 2 == 0) norm += (k - 1 == 0 ? 1.0 : 2.0) * j;
    if (std::abs(j) > 1e250) {
      jp1 *= 1e-250;
      j *= 1e-250;
      norm *= 1e-250;
      for (int q = k - 1; q <= M; ++q) J[q] *= 1e-250;
    }
  }
  for (auto& v : J) v /= norm;
  return J;
}

/// e^{-i t L} by a Chebyshev expansion on the spectral interval of the discrete L = -Delta + V.
/// Long times are split into chunks with t * (half spectral width) <= 200.
class LinearPropagator {
 public:
  explicit LinearPropagator(const Potential& V) : V_(V) {
    const Grid2D& g = V.grid;
    double lo = std::min(V.min(), 0.0) - 1.0;
    double hi = 2.0 * g.kmax() * g.kmax() + std::max(0.0, *std::max_element(V.values.begin(), V.values.end())) + 1.0;
    c_ = 0.5 * (hi + lo);
    r_ = 0.5 * (hi - lo);
  }

  ComplexField apply(const ComplexField& f, double t) const {
    if (!(f.grid() == V_.grid)) throw DomainError("field and potential live on different grids");
    require_finite(f, "linear flow input");
    ComplexField u = f;
    double left = t;
    const double chunk = 200.0 / r_;
    while (std::abs(left) > 0.0) {
      double s = std::abs(left) > chunk ? std::copysign(chunk, left) : left;
      u = chunk_apply(u, s);
      left -= s;
    }
    return u;
  }

  double half_width() const { return r_; }

 private:
  // (L - c) / r
  ComplexField normalized(const ComplexField& f) const {
    ComplexField r = laplacian(f);
    r *= -1.0;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] += (V_.values[i] - c_) * f[i];
    r *= 1.0 / r_;
    return r;
  }

  ComplexField chunk_apply(const ComplexField& f, double t) const {
    const double x = std::abs(t) * r_;
    const int M = int(x + 40 + 8 * std::cbrt(x));
    auto J = bessel_j_sequence(x, M);
    // e^{-i t (c + r y)} = e^{-i t c} sum_m eps_m (-i sgn t)^m J_m(|t| r) T_m(y)
    const cplx mi = t >= 0 ? cplx(0, -1) : cplx(0, 1);
    ComplexField tm1 = f, tm = normalized(f);
    ComplexField out = J[0] * f;
    out.axpy(2.0 * mi * J[1], tm);
    cplx ph = mi;
    const double fn = detail::norm2(f);
    for (int m = 2; m <= M; ++m) {
      ComplexField tn = normalized(tm);
      tn *= 2.0;
      tn -= tm1;
      ph *= mi;
      out.axpy(2.0 * ph * J[m], tn);
      tm1 = std::move(tm);
      tm = std::move(tn);
      if (m > x && std::abs(J[m]) * detail::norm2(tm) < 1e-17 * fn) break;
    }
    out *= std::polar(1.0, -t * c_);
    return out;
  }

  Potential V_;
  double c_ = 0, r_ = 1;
};

/// e^{-itL} f, or e^{-itL} P_c f when project_continuous (sd required).
inline ComplexField linear_flow(const ComplexField& f, const Potential& V, double t, bool project_continuous,
                                const SpectralData* sd = nullptr) {
  if (project_continuous && !sd) throw DomainError("continuous projection needs the ground state");
  ComplexField g = project_continuous ? project(f, SpectralPart::continuous, *sd) : f;
  return LinearPropagator(V).apply(g, t);
}

/// e^{i t Delta} f, exact on the grid.
inline ComplexField free_flow(const ComplexField& f, double t) {
  require_finite(f, "free flow input");
  detail::FreeStep s(f.grid(), t);
  ComplexField u = f;
  s.apply(u);
  return u;
}

struct DecayProbe {
  std::vector<double> t, l4;
  double exponent = NAN;  // fitted over [fit_lo, fit_hi]
  double fit_lo = 0, fit_hi = 0;
  std::optional<std::string> warning;
};

/// Samples t -> ||e^{-itL} P_c f||_{L^4} at increasing times and fits the
/// decay exponent over [fit_lo, fit_hi] (default fit_hi: half the last time).
inline DecayProbe dispersive_decay_probe(const ComplexField& f, const Potential& V, const SpectralData& sd,
                                         const std::vector<double>& t_samples, double fit_lo = 1.0,
                                         std::optional<double> fit_hi = std::nullopt) {
  if (t_samples.empty()) throw DomainError("no sample times");
  for (std::size_t i = 1; i < t_samples.size(); ++i)
    if (!(t_samples[i] > t_samples[i - 1])) throw DomainError("sample times must increase");
  if (t_samples.front() < 0) throw DomainError("sample times must be nonnegative");
  auto bc = boundary_check(f);
  if (!bc.pass) throw DomainError("probe field is not localized in the box");
  DecayProbe out;
  LinearPropagator prop(V);
  ComplexField u = project(f, SpectralPart::continuous, sd);
  double t = 0.0, running_min = INFINITY;
  for (double ts : t_samples) {
    u = prop.apply(u, ts - t);
    t = ts;
    double n4 = lp_norm(u, 4.0);
    if (n4 > 1.1 * running_min && running_min > 0) {
      out.warning = "box recurrence detected at t = " + std::to_string(ts) + "; later samples dropped";
      break;
    }
    running_min = std::min(running_min, n4);
    out.t.push_back(ts);
    out.l4.push_back(n4);
  }
  out.fit_lo = fit_lo;
  out.fit_hi = fit_hi.value_or(0.5 * t_samples.back());
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < out.t.size(); ++i)
    if (out.t[i] >= out.fit_lo && out.t[i] <= out.fit_hi && out.l4[i] > 0) {
      xs.push_back(out.t[i]);
      ys.push_back(out.l4[i]);
    }
  if (xs.size() >= 2) out.exponent = loglog_slope(xs, ys);
  return out;
}

}  // namespace nls2d
