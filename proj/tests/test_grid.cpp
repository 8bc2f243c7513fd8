#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include "nls2d/field_io.hpp"
#include "nls2d/grid.hpp"

using namespace nls2d;
using std::numbers::pi;

namespace {

ComplexField gaussian(const Grid2D& g, double a = 0.5) {
  return ComplexField::from_function(g, [a](double x, double y) { return std::exp(-a * (x * x + y * y)); });
}

// smooth, localized, complex, with no symmetry
ComplexField random_smooth(const Grid2D& g, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  ComplexField f(g);
  for (int m = 0; m < 4; ++m) {
    double cx = 2 * nd(rng), cy = 2 * nd(rng), w = 1.0 + std::abs(nd(rng));
    cplx amp(nd(rng), nd(rng));
    double kx = nd(rng), ky = nd(rng);
    f += ComplexField::from_function(g, [&](double x, double y) {
      double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
      return amp * std::exp(-r2 / (w * w)) * std::exp(cplx(0, kx * x + ky * y));
    });
  }
  return f;
}

}  // namespace

TEST(Grid2D, Invariants) {
  Grid2D g(64, 20.0);
  EXPECT_EQ(g.spacing() * g.n(), g.l_dom());
  const auto& k = g.k();
  for (int j = 1; j < g.n() / 2; ++j) EXPECT_DOUBLE_EQ(k[j], -k[g.n() - j]);
  EXPECT_DOUBLE_EQ(k[g.n() / 2], pi / g.spacing());
  EXPECT_DOUBLE_EQ(g.x()[g.n() / 2], 0.0);
  EXPECT_THROW(Grid2D(8, 1.0), DomainError);
  EXPECT_THROW(Grid2D(100, 1.0), DomainError);
  EXPECT_NO_THROW(Grid2D(96, 1.0));
  EXPECT_THROW(Grid2D(64, -1.0), DomainError);
}

TEST(Laplacian, ConstantGoesToZero) {
  Grid2D g(32, 10.0);
  ComplexField f = ComplexField::from_function(g, [](double, double) { return 1.0; });
  EXPECT_LT(laplacian(f).max_abs(), 1e-14);
}

TEST(Laplacian, FourierMode) {
  Grid2D g(32, 10.0);
  double k1 = 2 * pi / g.l_dom();
  auto f = ComplexField::from_function(g, [k1](double x, double) { return std::exp(cplx(0, k1 * x)); });
  auto lf = laplacian(f);
  lf.axpy(k1 * k1, f);
  EXPECT_LT(lf.max_abs(), 1e-13);
}

TEST(Laplacian, GaussianClosedForm) {
  Grid2D g(128, 24.0);
  auto f = gaussian(g);
  ASSERT_LT(boundary_amplitude(f), 1e-12);
  auto lf = laplacian(f);
  double err = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    double r2 = g.x1(i) * g.x1(i) + g.x2(i) * g.x2(i);
    err = std::max(err, std::abs(lf[i] - (r2 - 2.0) * std::exp(-r2 / 2)));
  }
  EXPECT_LT(err, 1e-8);
}

TEST(Laplacian, RejectsNonFiniteWithIndex) {
  Grid2D g(16, 4.0);
  ComplexField f(g);
  f[37] = cplx(std::nan(""), 0);
  try {
    laplacian(f);
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_EQ(e.index(), 37u);
  }
}

TEST(Laplacian, TranslationByGridStepCommutes) {
  Grid2D g(32, 8.0);
  auto f = random_smooth(g, 3);
  auto shift = [&](const ComplexField& u) {
    ComplexField r(g);
    int n = g.n();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) r[g.index((i + 3) % n, (j + 5) % n)] = u[g.index(i, j)];
    return r;
  };
  auto a = laplacian(shift(f));
  auto b = shift(laplacian(f));
  EXPECT_LT((a - b).max_abs(), 1e-10 * laplacian(f).max_abs());
}

TEST(Laplacian, SelfAdjoint) {
  Grid2D g(64, 20.0);
  for (unsigned s = 0; s < 5; ++s) {
    auto f = random_smooth(g, s), h = random_smooth(g, 100 + s);
    cplx a = inner_sesqui(laplacian(f), h), b = inner_sesqui(f, laplacian(h));
    EXPECT_LT(std::abs(a - b), 1e-10 * l2_norm(f) * l2_norm(h));
  }
}

TEST(Norms, Parseval) {
  Grid2D g(64, 20.0);
  auto f = random_smooth(g, 7);
  cvec fh = fft2(f);
  double spec = 0;
  for (auto z : fh) spec += std::norm(z);
  spec *= g.cell_area() / double(g.size());
  double phys = l2_norm(f);
  EXPECT_NEAR(phys * phys, spec, 1e-12 * spec);
}

TEST(Norms, WeightedZeroExponentIsPlainL2BitForBit) {
  Grid2D g(64, 20.0);
  auto f = random_smooth(g, 9);
  double plain = 0;
  for (std::size_t i = 0; i < f.size(); ++i) plain += std::norm(f[i]);
  plain = std::sqrt(plain * g.cell_area());
  EXPECT_EQ(weighted_norm(f, WeightSpec{0.0, 1}, 0), plain);
  EXPECT_EQ(weighted_norm(f, WeightSpec{0.0, -1}, 0), l2_norm(f));
}

TEST(Norms, ConstantHasBoxMeasure) {
  Grid2D g(32, 12.5);
  auto f = ComplexField::from_function(g, [](double, double) { return 1.0; });
  EXPECT_NEAR(weighted_norm(f, WeightSpec{0.0, 1}, 0), 12.5, 1e-12);
  EXPECT_EQ(weighted_norm(ComplexField(g), WeightSpec{}, 1), 0.0);
}

TEST(Norms, WeightedGaussianAgainstRadialQuadrature) {
  Grid2D g(256, 40.0);
  auto f = ComplexField::from_function(g, [](double x, double y) { return std::exp(-(x * x + y * y) / 2); });
  double got = weighted_norm(f, WeightSpec{1.5, -1}, 0);
  auto integrand = [](double r) { return std::pow(1 + r * r, -1.5) * std::exp(-r * r) * 2 * pi * r; };
  double oracle = std::sqrt(boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, 30.0, 15, 1e-14));
  EXPECT_NEAR(got / oracle, 1.0, 1e-6);
}

TEST(Norms, HomogeneousAndMonotone) {
  Grid2D g(64, 20.0);
  auto f = random_smooth(g, 11);
  WeightSpec w{1.2, 1};
  for (int d : {0, 1}) {
    double a = weighted_norm(f, w, d), b = weighted_norm(cplx(0, -3) * f, w, d);
    EXPECT_NEAR(b, 3 * a, 1e-12 * b);
  }
  ComplexField smaller = f;
  for (std::size_t i = 0; i < f.size(); i += 2) smaller[i] *= 0.5;
  EXPECT_LE(weighted_norm(smaller, w, 0), weighted_norm(f, w, 0));
  EXPECT_THROW(weighted_norm(f, WeightSpec{2.0, 1}, 0), DomainError);
}

TEST(Inner, ZeroAndSymmetry) {
  Grid2D g(32, 10.0);
  auto f = random_smooth(g, 1), h = random_smooth(g, 2);
  EXPECT_EQ(inner_bilinear(f, ComplexField(g)), cplx(0, 0));
  EXPECT_LT(std::abs(inner_bilinear(f, h) - inner_bilinear(h, f)), 1e-14 * l2_norm(f) * l2_norm(h));
}

TEST(Inner, FourierOrthonormality) {
  Grid2D g(32, 10.0);
  double k1 = 2 * pi / g.l_dom();
  auto e1 = ComplexField::from_function(g, [k1](double x, double) { return std::exp(cplx(0, k1 * x)); });
  cplx v = inner_bilinear(e1, e1.conj());
  EXPECT_NEAR(v.real(), 100.0, 1e-11);
  EXPECT_NEAR(v.imag(), 0.0, 1e-11);
}

TEST(Inner, GaussianIntegral) {
  Grid2D g(128, 30.0);
  auto f = gaussian(g, 1.0);
  EXPECT_NEAR(inner_bilinear(f, f).real(), pi / 2, 1e-8);
}

TEST(Inner, GridMismatchRejected) {
  Grid2D a(32, 10.0), b(32, 11.0);
  EXPECT_THROW(inner_bilinear(ComplexField(a), ComplexField(b)), DomainError);
}

TEST(Boundary, LocalizedPassesWideFails) {
  Grid2D g(64, 20.0);
  EXPECT_TRUE(boundary_check(gaussian(g, 1.0)).pass);
  EXPECT_FALSE(boundary_check(gaussian(g, 0.01)).pass);
}

TEST(FieldIo, BinaryRoundTripAndCsv) {
  Grid2D g(32, 7.5);
  auto f = random_smooth(g, 5);
  auto dir = std::filesystem::temp_directory_path();
  auto bin = (dir / "nls2d_grid_roundtrip.bin").string();
  write_field(bin, f);
  EXPECT_EQ(std::filesystem::file_size(bin), 4 + 4 + 4 + 8 + 16 * g.size());
  auto r = read_field(bin);
  EXPECT_EQ(r.grid().n(), 32);
  EXPECT_EQ(r.grid().l_dom(), 7.5);
  for (std::size_t i = 0; i < f.size(); ++i) ASSERT_EQ(r[i], f[i]);
  auto csv = (dir / "nls2d_grid_roundtrip.csv").string();
  write_field_csv(csv, f);
  EXPECT_GT(std::filesystem::file_size(csv), g.size() * 8);
  std::remove(bin.c_str());
  std::remove(csv.c_str());
}
