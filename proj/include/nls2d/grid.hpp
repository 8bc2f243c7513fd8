#pragma once

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "nls2d/error.hpp"

namespace nls2d {

using cplx = std::complex<double>;

/// Allocator returning FFTW-aligned storage so that cached plans can be
/// executed on any field buffer.
template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() noexcept = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) {
    void* p = fftw_malloc(n * sizeof(T));
    if (!p) throw std::bad_alloc();
    return static_cast<T*>(p);
  }
  void deallocate(T* p, std::size_t) noexcept { fftw_free(p); }
  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

using cvec = std::vector<cplx, FftwAllocator<cplx>>;

inline bool fft_friendly(int n) {
  if (n <= 0) return false;
  while (n % 2 == 0) n /= 2;
  while (n % 3 == 0) n /= 3;
  return n == 1;
}

/// Periodic square grid on [-l/2, l/2)^2 with n points per axis.
/// Node (i, j) sits at (x[i], x[j]); storage is row-major with i along x1.
class Grid2D {
 public:
  Grid2D(int n, double l_dom) {
    if (n < 16 || !fft_friendly(n))
      throw DomainError("grid size must be >= 16 and of the form 2^a 3^b, got " + std::to_string(n));
    if (!(l_dom > 0.0) || !std::isfinite(l_dom)) throw DomainError("l_dom must be positive");
    auto d = std::make_shared<Data>();
    d->n = n;
    d->l = l_dom;
    d->h = l_dom / n;
    d->x.resize(n);
    d->k.resize(n);
    for (int j = 0; j < n; ++j) {
      d->x[j] = -0.5 * l_dom + j * d->h;
      int m = j <= n / 2 ? j : j - n;
      d->k[j] = 2.0 * std::numbers::pi * m / l_dom;
    }
    d->ksq.resize(std::size_t(n) * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) d->ksq[std::size_t(i) * n + j] = d->k[i] * d->k[i] + d->k[j] * d->k[j];
    d_ = std::move(d);
  }

  int n() const { return d_->n; }
  double l_dom() const { return d_->l; }
  double spacing() const { return d_->h; }
  double cell_area() const { return d_->h * d_->h; }
  std::size_t size() const { return std::size_t(d_->n) * d_->n; }
  const std::vector<double>& x() const { return d_->x; }
  const std::vector<double>& k() const { return d_->k; }
  /// |k|^2 per Fourier index, same layout as the field.
  const std::vector<double>& ksq() const { return d_->ksq; }
  double kmax() const { return std::numbers::pi / d_->h; }

  std::size_t index(int i, int j) const { return std::size_t(i) * d_->n + j; }
  double x1(std::size_t idx) const { return d_->x[idx / d_->n]; }
  double x2(std::size_t idx) const { return d_->x[idx % d_->n]; }
  double radius(std::size_t idx) const { return std::hypot(x1(idx), x2(idx)); }
  /// Japanese bracket <x> = (1 + |x|^2)^{1/2} measured from the box center.
  double bracket(std::size_t idx) const {
    double a = x1(idx), b = x2(idx);
    return std::sqrt(1.0 + a * a + b * b);
  }

  bool operator==(const Grid2D& o) const { return d_ == o.d_ || (d_->n == o.d_->n && d_->l == o.d_->l); }
  bool operator!=(const Grid2D& o) const { return !(*this == o); }

 private:
  struct Data {
    int n = 0;
    double l = 0, h = 0;
    std::vector<double> x, k, ksq;
  };
  std::shared_ptr<const Data> d_;
};

/// Complex samples on a Grid2D.
class ComplexField {
 public:
  explicit ComplexField(const Grid2D& g) : grid_(g), v_(g.size(), cplx(0.0, 0.0)) {}
  ComplexField(const Grid2D& g, cvec values) : grid_(g), v_(std::move(values)) {
    if (v_.size() != g.size()) throw DomainError("field length does not match grid");
  }
  template <class F>
  static ComplexField from_function(const Grid2D& g, F&& fn) {
    ComplexField f(g);
    const auto& x = g.x();
    int n = g.n();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) f.v_[g.index(i, j)] = cplx(fn(x[i], x[j]));
    return f;
  }

  const Grid2D& grid() const { return grid_; }
  std::size_t size() const { return v_.size(); }
  cplx* data() { return v_.data(); }
  const cplx* data() const { return v_.data(); }
  cvec& values() { return v_; }
  const cvec& values() const { return v_; }
  cplx& operator[](std::size_t i) { return v_[i]; }
  const cplx& operator[](std::size_t i) const { return v_[i]; }

  ComplexField& operator+=(const ComplexField& o) {
    same_grid(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }
  ComplexField& operator-=(const ComplexField& o) {
    same_grid(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
    return *this;
  }
  ComplexField& operator*=(cplx a) {
    for (auto& z : v_) z *= a;
    return *this;
  }
  /// this += a * o
  ComplexField& axpy(cplx a, const ComplexField& o) {
    same_grid(o);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += a * o.v_[i];
    return *this;
  }
  friend ComplexField operator+(ComplexField a, const ComplexField& b) { return a += b; }
  friend ComplexField operator-(ComplexField a, const ComplexField& b) { return a -= b; }
  friend ComplexField operator*(cplx s, ComplexField a) { return a *= s; }
  friend ComplexField operator*(ComplexField a, cplx s) { return a *= s; }

  ComplexField conj() const {
    ComplexField r(*this);
    for (auto& z : r.v_) z = std::conj(z);
    return r;
  }
  ComplexField real_part() const {
    ComplexField r(*this);
    for (auto& z : r.v_) z = cplx(z.real(), 0.0);
    return r;
  }
  ComplexField imag_part() const {
    ComplexField r(*this);
    for (auto& z : r.v_) z = cplx(z.imag(), 0.0);
    return r;
  }
  /// Pointwise product with a real array of the same layout.
  ComplexField times(const std::vector<double>& w) const {
    if (w.size() != v_.size()) throw DomainError("multiplier length does not match field");
    ComplexField r(*this);
    for (std::size_t i = 0; i < v_.size(); ++i) r.v_[i] *= w[i];
    return r;
  }
  double max_abs() const {
    double m = 0.0;
    for (const auto& z : v_) m = std::max(m, std::abs(z));
    return m;
  }

  void same_grid(const ComplexField& o) const {
    if (grid_ != o.grid_) throw DomainError("fields live on different grids");
  }

 private:
  Grid2D grid_;
  cvec v_;
};

/// Throws NonFiniteError naming the first non-finite entry.
inline void require_finite(const ComplexField& f, const std::string& what) {
  for (std::size_t i = 0; i < f.size(); ++i)
    if (!std::isfinite(f[i].real()) || !std::isfinite(f[i].imag())) throw NonFiniteError(what, i);
}

namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache c;
    return c;
  }
  fftw_plan get(int n, int sign) {
    std::lock_guard<std::mutex> lock(mu_);
    auto key = std::make_pair(n, sign);
    auto it = plans_.find(key);
    if (it != plans_.end()) return it->second;
    cvec a(std::size_t(n) * n), b(std::size_t(n) * n);
    auto* in = reinterpret_cast<fftw_complex*>(a.data());
    auto* out = reinterpret_cast<fftw_complex*>(b.data());
    fftw_plan p = fftw_plan_dft_2d(n, n, in, out, sign, FFTW_MEASURE);
    if (!p) throw Error("FFTW planning failed for n = " + std::to_string(n));
    plans_.emplace(key, p);
    return p;
  }
  ~PlanCache() {
    for (auto& kv : plans_) fftw_destroy_plan(kv.second);
  }

 private:
  std::mutex mu_;
  std::map<std::pair<int, int>, fftw_plan> plans_;
};

inline void execute(int n, int sign, const cplx* in, cplx* out) {
  fftw_plan p = PlanCache::instance().get(n, sign);
  // new-array execution is thread safe and leaves `in` untouched for out-of-place plans
  fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in)), reinterpret_cast<fftw_complex*>(out));
}

}  // namespace detail

/// Unnormalized forward transform: fhat[k] = sum_x f[x] e^{-i k.x}.
inline cvec fft2(const ComplexField& f) {
  cvec out(f.size());
  detail::execute(f.grid().n(), FFTW_FORWARD, f.data(), out.data());
  return out;
}

/// Inverse of fft2 (includes the 1/n^2 factor).
inline ComplexField ifft2(const Grid2D& g, const cvec& fhat) {
  ComplexField out(g);
  detail::execute(g.n(), FFTW_BACKWARD, fhat.data(), out.data());
  const double s = 1.0 / double(g.size());
  for (auto& z : out.values()) z *= s;
  return out;
}

/// Applies a Fourier multiplier m(|k|^2) given per index.
template <class M>
ComplexField apply_multiplier(const ComplexField& f, const M& m) {
  cvec fh = fft2(f);
  if (m.size() != fh.size()) throw DomainError("multiplier length does not match field");
  for (std::size_t i = 0; i < fh.size(); ++i) fh[i] *= m[i];
  return ifft2(f.grid(), fh);
}

/// Spectral Laplacian.
inline ComplexField laplacian(const ComplexField& f) {
  require_finite(f, "laplacian input");
  cvec fh = fft2(f);
  const auto& ksq = f.grid().ksq();
  for (std::size_t i = 0; i < fh.size(); ++i) fh[i] *= -ksq[i];
  return ifft2(f.grid(), fh);
}

/// Spectral gradient (d/dx1, d/dx2); the Nyquist mode of each odd derivative is zeroed.
inline std::pair<ComplexField, ComplexField> gradient(const ComplexField& f) {
  const Grid2D& g = f.grid();
  const int n = g.n();
  const auto& k = g.k();
  cvec fh = fft2(f);
  cvec a(fh.size()), b(fh.size());
  for (int i = 0; i < n; ++i) {
    double k1 = (i == n / 2) ? 0.0 : k[i];
    for (int j = 0; j < n; ++j) {
      double k2 = (j == n / 2) ? 0.0 : k[j];
      std::size_t idx = g.index(i, j);
      a[idx] = cplx(0.0, k1) * fh[idx];
      b[idx] = cplx(0.0, k2) * fh[idx];
    }
  }
  return {ifft2(g, a), ifft2(g, b)};
}

/// Weight <x>^{sign*s}; s = 0 selects the unweighted norms.
struct WeightSpec {
  double s = 1.5;
  int sign = -1;

  void validate() const {
    if (sign != 1 && sign != -1) throw DomainError("weight sign must be +1 or -1");
    if (!(s == 0.0 || (s > 1.0 && s <= 1.5))) throw DomainError("weight exponent must be 0 or lie in (1, 3/2]");
  }
};

/// sqrt(h^2 sum <x>^{2 sign s} (|f|^2 [+ |grad f|^2])).
inline double weighted_norm(const ComplexField& f, const WeightSpec& w = {}, int deriv_order = 0) {
  w.validate();
  if (deriv_order != 0 && deriv_order != 1) throw DomainError("deriv_order must be 0 or 1");
  const Grid2D& g = f.grid();
  const bool weighted = w.s != 0.0;
  auto weight = [&](std::size_t i) {
    double b2 = g.bracket(i);
    b2 *= b2;
    return std::pow(b2, w.sign * w.s);
  };
  double acc = 0.0;
  if (deriv_order == 0) {
    for (std::size_t i = 0; i < f.size(); ++i) {
      double a = std::norm(f[i]);
      acc += weighted ? weight(i) * a : a;
    }
  } else {
    auto [d1, d2] = gradient(f);
    for (std::size_t i = 0; i < f.size(); ++i) {
      double a = std::norm(f[i]) + std::norm(d1[i]) + std::norm(d2[i]);
      acc += weighted ? weight(i) * a : a;
    }
  }
  return std::sqrt(acc * g.cell_area());
}

inline double l2_norm(const ComplexField& f) { return weighted_norm(f, WeightSpec{0.0, 1}, 0); }
inline double h1_norm(const ComplexField& f) { return weighted_norm(f, WeightSpec{0.0, 1}, 1); }

inline double lp_norm(const ComplexField& f, double p) {
  if (!(p >= 1.0)) throw DomainError("L^p norm needs p >= 1");
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += std::pow(std::abs(f[i]), p);
  return std::pow(acc * f.grid().cell_area(), 1.0 / p);
}

/// W^{1,p} norm: (||f||_p^p + ||grad f||_p^p)^{1/p} with |grad f| the Euclidean length.
inline double w1p_norm(const ComplexField& f, double p) {
  auto [d1, d2] = gradient(f);
  double acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    double gabs = std::sqrt(std::norm(d1[i]) + std::norm(d2[i]));
    acc += std::pow(std::abs(f[i]), p) + std::pow(gabs, p);
  }
  return std::pow(acc * f.grid().cell_area(), 1.0 / p);
}

/// Bilinear pairing  integral f g  (no conjugate).
inline cplx inner_bilinear(const ComplexField& f, const ComplexField& g) {
  f.same_grid(g);
  cplx acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += f[i] * g[i];
  return acc * f.grid().cell_area();
}

/// Sesquilinear pairing  integral conj(f) g.
inline cplx inner_sesqui(const ComplexField& f, const ComplexField& g) {
  f.same_grid(g);
  cplx acc = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) acc += std::conj(f[i]) * g[i];
  return acc * f.grid().cell_area();
}

/// integral Re(f) Re(g) + Im(f) Im(g) = Re <f, g>_sesqui.
inline double inner_real(const ComplexField& f, const ComplexField& g) { return inner_sesqui(f, g).real(); }

/// Largest |f| on the box edge (first row and column; the periodic images coincide).
inline double boundary_amplitude(const ComplexField& f) {
  const Grid2D& g = f.grid();
  const int n = g.n();
  double m = 0.0;
  for (int j = 0; j < n; ++j) {
    m = std::max({m, std::abs(f[g.index(0, j)]), std::abs(f[g.index(j, 0)]), std::abs(f[g.index(n - 1, j)]),
                  std::abs(f[g.index(j, n - 1)])});
  }
  return m;
}

struct BoundaryReport {
  double amplitude = 0.0;
  double sup = 0.0;
  bool pass = true;
};

inline BoundaryReport boundary_check(const ComplexField& f, double rel_tol = 1e-6) {
  BoundaryReport r;
  r.amplitude = boundary_amplitude(f);
  r.sup = f.max_abs();
  r.pass = r.amplitude <= rel_tol * r.sup;
  return r;
}

}  // namespace nls2d
