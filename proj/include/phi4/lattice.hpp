#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "error.hpp"

namespace phi4 {

using cplx = std::complex<double>;

inline constexpr int kDim = 3;

// Periodic grid of mesh eps = 2^-N and side M, n_side = M 2^N sites per axis.
// Array index i maps to the centered coordinate eps * (i < n/2 ? i : i - n).
class Lattice {
 public:
  Lattice() = default;

  static Lattice make(int N, double M) {
    require(N >= 0 && N < 30, "lattice: level N must satisfy 0 <= N < 30");
    require(std::isfinite(M) && M > 0, "lattice: side M must be positive");
    double half = std::ldexp(M, N - 1);  // M / (2 eps)
    double r = std::round(half);
    require(r >= 1 && std::abs(half - r) < 1e-9 * std::max(1.0, half),
            "lattice: M/(2 eps) = M*2^(N-1) must be a positive integer");
    Lattice lat;
    lat.N_ = N;
    lat.M_ = M;
    lat.n_ = static_cast<int>(2 * r);
    lat.eps_ = std::ldexp(1.0, -N);
    return lat;
  }

  int level() const { return N_; }
  double side() const { return M_; }
  double spacing() const { return eps_; }
  int n_side() const { return n_; }
  std::size_t volume() const { return std::size_t(n_) * n_ * n_; }
  double cell() const { return eps_ * eps_ * eps_; }  // eps^3
  double mode_measure() const { return 1.0 / (M_ * M_ * M_); }

  std::size_t index(int i, int j, int k) const {
    return (std::size_t(wrap(k)) * n_ + wrap(j)) * n_ + wrap(i);
  }
  std::array<int, 3> coords(std::size_t idx) const {
    int i = int(idx % n_);
    int j = int((idx / n_) % n_);
    int k = int(idx / (std::size_t(n_) * n_));
    return {i, j, k};
  }
  int wrap(int i) const { return ((i % n_) + n_) % n_; }
  int centered(int i) const { return i < n_ / 2 ? i : i - n_; }

  // physical position of a site, centered in [-M/2, M/2)
  std::array<double, 3> position(std::size_t idx) const {
    auto c = coords(idx);
    return {eps_ * centered(c[0]), eps_ * centered(c[1]), eps_ * centered(c[2])};
  }
  // frequency k = q/M of a mode-grid slot
  std::array<double, 3> frequency(std::size_t idx) const {
    auto c = coords(idx);
    return {centered(c[0]) / M_, centered(c[1]) / M_, centered(c[2]) / M_};
  }
  // l_eps(k) = sum_j 4 sin^2(eps pi k_j) / eps^2
  double laplace_symbol(std::size_t idx) const {
    auto k = frequency(idx);
    double s = 0;
    for (double kj : k) {
      double v = std::sin(eps_ * std::numbers::pi * kj);
      s += 4 * v * v;
    }
    return s / (eps_ * eps_);
  }
  // site reached from idx by reflecting the first coordinate, x1 -> -x1
  std::size_t reflect1(std::size_t idx) const {
    auto c = coords(idx);
    return index(n_ - c[0], c[1], c[2]);
  }
  std::size_t shift(std::size_t idx, int di, int dj, int dk) const {
    auto c = coords(idx);
    return index(c[0] + di, c[1] + dj, c[2] + dk);
  }

  bool operator==(const Lattice& o) const { return N_ == o.N_ && M_ == o.M_; }
  bool operator!=(const Lattice& o) const { return !(*this == o); }

  std::string describe() const {
    return "N=" + std::to_string(N_) + " M=" + std::to_string(M_) + " (" +
           std::to_string(n_) + "^3)";
  }

 private:
  int N_ = 0;
  double M_ = 0;
  int n_ = 0;
  double eps_ = 1;
};

inline Lattice make_lattice(int N, double M) { return Lattice::make(N, M); }

inline void check_same(const Lattice& a, const Lattice& b) {
  if (a != b) throw MismatchError("lattice mismatch: " + a.describe() + " vs " + b.describe());
}

// Real physical-domain field. Value type; arithmetic is pointwise.
class Field {
 public:
  Field() = default;
  explicit Field(const Lattice& lat, double value = 0.0) : lat_(lat), v_(lat.volume(), value) {}
  Field(const Lattice& lat, std::vector<double> values) : lat_(lat), v_(std::move(values)) {
    if (v_.size() != lat_.volume()) throw MismatchError("field: value count does not match lattice");
  }
  template <class Fn>
  static Field from_function(const Lattice& lat, Fn&& fn) {
    Field f(lat);
    for (std::size_t i = 0; i < f.size(); ++i) f.v_[i] = fn(lat.position(i));
    return f;
  }

  const Lattice& lattice() const { return lat_; }
  std::size_t size() const { return v_.size(); }
  double* data() { return v_.data(); }
  const double* data() const { return v_.data(); }
  std::vector<double>& values() { return v_; }
  const std::vector<double>& values() const { return v_; }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  double at(int i, int j, int k) const { return v_[lat_.index(i, j, k)]; }
  double& at(int i, int j, int k) { return v_[lat_.index(i, j, k)]; }

  Field& operator+=(const Field& o) { return zip(o, [](double& a, double b) { a += b; }); }
  Field& operator-=(const Field& o) { return zip(o, [](double& a, double b) { a -= b; }); }
  Field& operator*=(const Field& o) { return zip(o, [](double& a, double b) { a *= b; }); }
  Field& operator*=(double c) {
    for (auto& x : v_) x *= c;
    return *this;
  }
  Field& operator+=(double c) {
    for (auto& x : v_) x += c;
    return *this;
  }
  // this += c * o
  Field& axpy(double c, const Field& o) { return zip(o, [c](double& a, double b) { a += c * b; }); }

  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator*(Field a, const Field& b) { return a *= b; }
  friend Field operator*(double c, Field a) { return a *= c; }
  friend Field operator*(Field a, double c) { return a *= c; }
  friend Field operator-(Field a) { return a *= -1.0; }

  template <class Fn>
  Field map(Fn&& fn) const {
    Field r(*this);
    for (auto& x : r.v_) x = fn(x);
    return r;
  }

  double sup_abs() const {
    double m = 0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
  }
  bool finite() const {
    for (double x : v_)
      if (!std::isfinite(x)) return false;
    return true;
  }

 private:
  template <class Op>
  Field& zip(const Field& o, Op op) {
    check_same(lat_, o.lat_);
    for (std::size_t i = 0; i < v_.size(); ++i) op(v_[i], o.v_[i]);
    return *this;
  }

  Lattice lat_;
  std::vector<double> v_;
};

// Complex Fourier-domain field on the full (non-Hermitian-packed) mode grid.
class Spectrum {
 public:
  Spectrum() = default;
  explicit Spectrum(const Lattice& lat) : lat_(lat), v_(lat.volume()) {}
  const Lattice& lattice() const { return lat_; }
  std::size_t size() const { return v_.size(); }
  cplx* data() { return v_.data(); }
  const cplx* data() const { return v_.data(); }
  cplx& operator[](std::size_t i) { return v_[i]; }
  const cplx& operator[](std::size_t i) const { return v_[i]; }
  std::vector<cplx>& values() { return v_; }
  const std::vector<cplx>& values() const { return v_; }

  Spectrum& operator*=(const std::vector<double>& mult) {
    if (mult.size() != v_.size()) throw MismatchError("spectrum: multiplier size mismatch");
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] *= mult[i];
    return *this;
  }
  Spectrum& operator+=(const Spectrum& o) {
    check_same(lat_, o.lat_);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
    return *this;
  }

  // max |f(-k) - conj f(k)|, zero for spectra of real fields
  double hermitian_defect() const {
    double d = 0;
    for (std::size_t i = 0; i < v_.size(); ++i) {
      auto c = lat_.coords(i);
      std::size_t j = lat_.index(-c[0], -c[1], -c[2]);
      d = std::max(d, std::abs(v_[j] - std::conj(v_[i])));
    }
    return d;
  }

 private:
  Lattice lat_;
  std::vector<cplx> v_;
};

// A real function sampled on the mode grid (Fourier multiplier).
using ModeFunction = std::vector<double>;

template <class Fn>
ModeFunction make_mode_function(const Lattice& lat, Fn&& fn) {
  ModeFunction m(lat.volume());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = fn(lat.frequency(i));
  return m;
}

inline ModeFunction laplace_symbol(const Lattice& lat) {
  ModeFunction m(lat.volume());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = lat.laplace_symbol(i);
  return m;
}

// <f, g>_eps = eps^3 sum_x f(x) g(x)
inline double duality_product(const Field& f, const Field& g) {
  check_same(f.lattice(), g.lattice());
  double s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * g[i];
  return s * f.lattice().cell();
}

// L^{p,eps} norm; p = infinity gives the sup norm
inline double lp_norm(const Field& f, double p) {
  if (std::isinf(p)) return f.sup_abs();
  double s = 0;
  if (p == 2) {
    for (double x : f.values()) s += x * x;
    return std::sqrt(s * f.lattice().cell());
  }
  for (double x : f.values()) s += std::pow(std::abs(x), p);
  return std::pow(s * f.lattice().cell(), 1.0 / p);
}

inline std::array<Field, 3> discrete_gradient(const Field& f) {
  const Lattice& lat = f.lattice();
  const int n = lat.n_side();
  const double inv = 1.0 / lat.spacing();
  std::array<Field, 3> g{Field(lat), Field(lat), Field(lat)};
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        std::size_t x = lat.index(i, j, k);
        double v = f[x];
        g[0][x] = (f[lat.index(i + 1, j, k)] - v) * inv;
        g[1][x] = (f[lat.index(i, j + 1, k)] - v) * inv;
        g[2][x] = (f[lat.index(i, j, k + 1)] - v) * inv;
      }
  return g;
}

// 7-point stencil
inline Field discrete_laplacian(const Field& f) {
  const Lattice& lat = f.lattice();
  const int n = lat.n_side();
  const double inv2 = 1.0 / (lat.spacing() * lat.spacing());
  Field r(lat);
  for (int k = 0; k < n; ++k)
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        double s = f[lat.index(i + 1, j, k)] + f[lat.index(i - 1, j, k)] +
                   f[lat.index(i, j + 1, k)] + f[lat.index(i, j - 1, k)] +
                   f[lat.index(i, j, k + 1)] + f[lat.index(i, j, k - 1)] -
                   6 * f[lat.index(i, j, k)];
        r[lat.index(i, j, k)] = s * inv2;
      }
  return r;
}

// <grad f, grad g>_eps summed over the three directions
inline double gradient_pairing(const Field& f, const Field& g) {
  auto a = discrete_gradient(f);
  auto b = discrete_gradient(g);
  return duality_product(a[0], b[0]) + duality_product(a[1], b[1]) + duality_product(a[2], b[2]);
}

// rho(x) = (1 + |h x|^2)^(-nu/2)
struct Weight {
  double h = 1.0;
  double nu = 0.0;

  double operator()(double r) const { return std::pow(1 + h * h * r * r, -nu / 2); }
  double at(const std::array<double, 3>& x) const {
    return std::pow(1 + h * h * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]), -nu / 2);
  }
  // rho(x)/rho(y) <= C rho(x-y)^-1 with C = 2^(nu/2) (Peetre)
  double admissibility_constant() const { return std::pow(2.0, nu / 2); }
};

inline Field weight_field(const Lattice& lat, const Weight& w, double power) {
  Field f(lat);
  if (power == 0 || w.nu == 0) return Field(lat, 1.0);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = std::pow(w.at(lat.position(i)), power);
  return f;
}

// eps^-3 times the indicator of one site, so that <delta, g>_eps = g(x)
inline Field point_mass(const Lattice& lat, std::size_t site) {
  Field f(lat);
  f[site] = 1.0 / lat.cell();
  return f;
}

}  // namespace phi4
