#pragma once

#include <cmath>
#include <vector>

#include "fft.hpp"

namespace phi4 {

// l_eps(k)^gamma on the mode grid; gamma = 1 returns the standard symbol untouched.
inline ModeFunction fractional_multiplier(const Lattice& lat, double gamma) {
  require(gamma > 0 && gamma <= 1, "fractional: gamma must lie in (0, 1]");
  ModeFunction m = laplace_symbol(lat);
  if (gamma != 1.0)
    for (auto& v : m) v = std::pow(v, gamma);
  return m;
}

// Q_eps = m^2 + (-Delta_eps)^gamma, diagonal in Fourier space.
class HeatOperator {
 public:
  HeatOperator() = default;
  HeatOperator(const Lattice& lat, double m2, double gamma = 1.0)
      : lat_(lat), m2_(m2), gamma_(gamma) {
    require(m2 > 0, "operator: m^2 must be positive (shift negative masses first)");
    sym_ = fractional_multiplier(lat, gamma);
    for (auto& v : sym_) v += m2;
  }
  const Lattice& lattice() const { return lat_; }
  double m2() const { return m2_; }
  double gamma() const { return gamma_; }
  // m^2 + l^gamma per mode
  const ModeFunction& symbol() const { return sym_; }
  double max_rate() const {
    double m = 0;
    for (double v : sym_) m = std::max(m, v);
    return m;
  }

 private:
  Lattice lat_;
  double m2_ = 1;
  double gamma_ = 1;
  ModeFunction sym_;
};

// Time-sampled fields on a shared, strictly increasing grid.
struct Trajectory {
  std::vector<double> times;
  std::vector<Field> slices;

  std::size_t size() const { return slices.size(); }
  const Lattice& lattice() const { return slices.front().lattice(); }
  void push(double t, Field f) {
    if (!times.empty() && !(t > times.back()))
      throw ConstraintError("trajectory: times must be strictly increasing");
    times.push_back(t);
    slices.push_back(std::move(f));
  }
  Trajectory window(std::size_t from) const {
    Trajectory w;
    w.times.assign(times.begin() + long(from), times.end());
    w.slices.assign(slices.begin() + long(from), slices.end());
    return w;
  }
};

inline void check_same_grid(const Trajectory& a, const Trajectory& b) {
  if (a.times != b.times) throw MismatchError("trajectory: time grids differ");
}

// Apply fn slice by slice.
template <class Fn>
Trajectory map_slices(const Trajectory& a, Fn&& fn) {
  Trajectory r;
  r.times = a.times;
  r.slices.reserve(a.size());
  for (const auto& s : a.slices) r.slices.push_back(fn(s));
  return r;
}

template <class Fn>
Trajectory zip_slices(const Trajectory& a, const Trajectory& b, Fn&& fn) {
  check_same_grid(a, b);
  Trajectory r;
  r.times = a.times;
  r.slices.reserve(a.size());
  for (std::size_t n = 0; n < a.size(); ++n) r.slices.push_back(fn(a.slices[n], b.slices[n]));
  return r;
}

// P_t f: mode k multiplied by e^{-t(m^2 + l(k))}
inline Field heat_step(const HeatOperator& op, const Field& f, double t) {
  require(t >= 0, "heat_step: t must be nonnegative");
  check_same(op.lattice(), f.lattice());
  if (t == 0) return f;
  ModeFunction m(op.symbol().size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = std::exp(-t * op.symbol()[i]);
  return apply_multiplier(f, m);
}

inline Field q_inverse(const HeatOperator& op, const Field& f) {
  check_same(op.lattice(), f.lattice());
  ModeFunction m(op.symbol().size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = 1.0 / op.symbol()[i];
  return apply_multiplier(f, m);
}

inline Field q_apply(const HeatOperator& op, const Field& f) {
  check_same(op.lattice(), f.lattice());
  return apply_multiplier(f, op.symbol());
}

// Solves d/dt v + Q v = f, v(t_0) = v0, holding f at its left value on each
// step and integrating the linear part exactly.
inline Trajectory l_inverse(const HeatOperator& op, const Trajectory& src, const Field& v0) {
  check_same(op.lattice(), v0.lattice());
  Trajectory out;
  if (src.size() == 0) return out;
  const auto& q = op.symbol();
  Spectrum v = forward_fourier(v0);
  out.push(src.times[0], v0);
  ModeFunction decay(q.size()), gain(q.size());
  double last_dt = -1;
  for (std::size_t n = 0; n + 1 < src.size(); ++n) {
    double dt = src.times[n + 1] - src.times[n];
    if (dt != last_dt) {
      for (std::size_t i = 0; i < q.size(); ++i) {
        decay[i] = std::exp(-q[i] * dt);
        gain[i] = -std::expm1(-q[i] * dt) / q[i];
      }
      last_dt = dt;
    }
    Spectrum f = forward_fourier(src.slices[n]);
    for (std::size_t i = 0; i < q.size(); ++i) v[i] = decay[i] * v[i] + gain[i] * f[i];
    out.push(src.times[n + 1], inverse_fourier(v));
  }
  return out;
}

inline Trajectory l_inverse(const HeatOperator& op, const Trajectory& src) {
  return l_inverse(op, src, Field(op.lattice()));
}

}  // namespace phi4
