#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <string>

#include "nls2d/grid.hpp"

namespace nls2d {

// Binary snapshot layout: "NLS2", u32 version, u32 n, f64 l_dom, then n*n (re, im) f64 pairs.
// Everything little-endian.

inline constexpr std::uint32_t kFieldFormatVersion = 1;

namespace detail {

template <class T>
void put_le(std::ostream& os, T v) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(std::istream& is) {
  unsigned char b[sizeof(T)];
  is.read(reinterpret_cast<char*>(b), sizeof(T));
  if (!is) throw Error("truncated field file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace detail

inline void write_field(const std::string& path, const ComplexField& f) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path + " for writing");
  os.write("NLS2", 4);
  detail::put_le<std::uint32_t>(os, kFieldFormatVersion);
  detail::put_le<std::uint32_t>(os, std::uint32_t(f.grid().n()));
  detail::put_le<double>(os, f.grid().l_dom());
  for (std::size_t i = 0; i < f.size(); ++i) {
    detail::put_le<double>(os, f[i].real());
    detail::put_le<double>(os, f[i].imag());
  }
  if (!os) throw Error("write failed for " + path);
}

inline ComplexField read_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "NLS2", 4) != 0) throw Error(path + ": bad magic");
  auto version = detail::get_le<std::uint32_t>(is);
  if (version != kFieldFormatVersion) throw Error(path + ": unsupported version " + std::to_string(version));
  auto n = detail::get_le<std::uint32_t>(is);
  auto l = detail::get_le<double>(is);
  Grid2D g(int(n), l);
  ComplexField f(g);
  for (std::size_t i = 0; i < f.size(); ++i) {
    double re = detail::get_le<double>(is);
    double im = detail::get_le<double>(is);
    f[i] = cplx(re, im);
  }
  return f;
}

/// Plot-friendly dump with columns x1,x2,re,im.
inline void write_field_csv(const std::string& path, const ComplexField& f) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  os << "x1,x2,re,im\n" << std::setprecision(17);
  const Grid2D& g = f.grid();
  for (std::size_t i = 0; i < f.size(); ++i)
    os << g.x1(i) << ',' << g.x2(i) << ',' << f[i].real() << ',' << f[i].imag() << '\n';
}

}  // namespace nls2d
