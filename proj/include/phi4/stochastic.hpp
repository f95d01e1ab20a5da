#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "besov.hpp"
#include "rng.hpp"

namespace phi4 {

// a = E[X(t,x)^2] = M^-3 sum_k 1 / (2 (m^2 + l(k)^gamma))
inline double compute_a(const HeatOperator& op) {
  double s = 0;
  for (double q : op.symbol()) s += 0.5 / q;
  return s * op.lattice().mode_measure();
}

// Stationary covariance kernel G(x) = E[X(t,x) X(t,0)], and its time-lagged
// version G_tau(x) = E[X(t+tau,x) X(t,0)] = F^-1[e^{-q tau} / (2q)].
inline Field covariance_kernel(const HeatOperator& op, double tau = 0) {
  Spectrum s(op.lattice());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::exp(-op.symbol()[i] * tau) / (2 * op.symbol()[i]);
  return inverse_fourier(s);
}

// W(k) = sum_{|i-j| <= 1} phi_i(k) phi_j(k): the resonant pairing weight
inline ModeFunction resonant_weight(const DyadicPartition& part) {
  ModeFunction w(part.lattice().volume(), 0.0);
  for (int i = part.jmin(); i <= part.jmax(); ++i)
    for (int j = std::max(part.jmin(), i - 1); j <= std::min(part.jmax(), i + 1); ++j) {
      const auto& a = part.block(i);
      const auto& b = part.block(j);
      for (std::size_t k = 0; k < w.size(); ++k) w[k] += a[k] * b[k];
    }
  return w;
}

// The covariance of Z = [[X^2]] is 2 G^2; its transform is S(k) = F(2 G_tau^2)(k).
inline ModeFunction wick_square_spectrum(const HeatOperator& op, double tau = 0) {
  Field G = covariance_kernel(op, tau);
  Spectrum s = forward_fourier(2.0 * (G * G));
  ModeFunction r(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) r[i] = s[i].real();
  return r;
}

// b = 3 E[[[X^2]] o Q^-1 [[X^2]]](x) = 3 M^-3 sum_k W(k) S(k) / q(k)
inline double compute_b(const HeatOperator& op, const DyadicPartition& part) {
  check_same(op.lattice(), part.lattice());
  ModeFunction W = resonant_weight(part), S = wick_square_spectrum(op);
  double s = 0;
  for (std::size_t k = 0; k < W.size(); ++k) s += W[k] * S[k] / op.symbol()[k];
  return 3 * s * op.lattice().mode_measure();
}

// b~(t) = 3 M^-3 sum_k W(k) int_0^t e^{-q(k) tau} S_tau(k) dtau, the mean of
// 3 [[X^2]] o X^{2,1}(t) with X^{2,1} = L^-1 [[X^2]] started from zero at time 0.
// The tau integral uses Gauss-Legendre panels on a geometric grid.
class BTilde {
 public:
  BTilde() = default;
  BTilde(const HeatOperator& op, const DyadicPartition& part, double t_max) : op_(op) {
    check_same(op.lattice(), part.lattice());
    W_ = resonant_weight(part);
    double eps2 = std::pow(op.lattice().spacing(), 2);
    edges_ = {0.0};
    double e = std::min(eps2 / 64, t_max);
    while (true) {
      edges_.push_back(e);
      if (e >= t_max) break;
      e = std::min(2 * e, t_max);
    }
    cum_ = {0.0};
    for (std::size_t i = 0; i + 1 < edges_.size(); ++i) cum_.push_back(cum_.back() + panel(edges_[i], edges_[i + 1]));
  }

  double operator()(double t) const {
    if (t <= 0) return 0;
    if (t > edges_.back() * (1 + 1e-12)) throw ConstraintError("btilde: t beyond precomputed range");
    std::size_t i = 0;
    while (i + 1 < edges_.size() && edges_[i + 1] <= t) ++i;
    double v = cum_[i];
    if (t > edges_[i]) v += panel(edges_[i], t);
    return v;
  }

  // integrand 3 M^-3 sum_k W e^{-q tau} S_tau
  double integrand(double tau) const {
    ModeFunction S = wick_square_spectrum(op_, tau);
    double s = 0;
    for (std::size_t k = 0; k < S.size(); ++k) s += W_[k] * std::exp(-op_.symbol()[k] * tau) * S[k];
    return 3 * s * op_.lattice().mode_measure();
  }

 private:
  double panel(double a, double b) const {
    static constexpr std::array<double, 6> x = {-0.9324695142031521, -0.6612093864662645, -0.2386191860831969,
                                                0.2386191860831969,  0.6612093864662645,  0.9324695142031521};
    static constexpr std::array<double, 6> w = {0.1713244923791704, 0.3607615730481386, 0.4679139345726910,
                                                0.4679139345726910, 0.3607615730481386, 0.1713244923791704};
    double s = 0;
    for (int i = 0; i < 6; ++i) s += w[i] * integrand(0.5 * (a + b) + 0.5 * (b - a) * x[i]);
    return 0.5 * (b - a) * s;
  }

  HeatOperator op_;
  ModeFunction W_;
  std::vector<double> edges_, cum_;
};

// Spectral Ornstein-Uhlenbeck sampling. Site noise eta = eps^{-3/2} xi per unit
// time; each mode relaxes at rate q(k) = m^2 + l(k)^gamma, so the stationary
// law has E|F X(k)|^2 = M^3 / (2 q(k)) and E[X(x)^2] = compute_a.
class OuSampler {
 public:
  OuSampler(const HeatOperator& op, const CounterRng& rng) : op_(op), rng_(rng) {}

  const HeatOperator& op() const { return op_; }

  // F(eta) for the given step, eta = eps^{-3/2} xi
  Spectrum noise(std::uint64_t step, Purpose p = Purpose::noise) const {
    const Lattice& lat = op_.lattice();
    Field xi(lat);
    rng_.fill_normal(xi.values(), p, step);
    xi *= 1.0 / std::sqrt(lat.cell());
    return forward_fourier(xi);
  }

  Spectrum stationary_spectrum(std::uint64_t draw) const {
    Spectrum s = noise(draw, Purpose::initial);
    for (std::size_t i = 0; i < s.size(); ++i) s[i] /= std::sqrt(2 * op_.symbol()[i]);
    return s;
  }
  Field stationary(std::uint64_t draw) const { return inverse_fourier(stationary_spectrum(draw)); }

  // exact transition over dt driven by noise(step)
  void advance(Spectrum& X, double dt, std::uint64_t step) const {
    set_dt(dt);
    Spectrum w = noise(step);
    for (std::size_t i = 0; i < X.size(); ++i) X[i] = decay_[i] * X[i] + amp_[i] * w[i];
  }

  // per-mode factors for a step of size dt: e^{-q dt} and sqrt((1 - e^{-2 q dt}) / (2q))
  const ModeFunction& decay(double dt) const {
    set_dt(dt);
    return decay_;
  }
  const ModeFunction& noise_amplitude(double dt) const {
    set_dt(dt);
    return amp_;
  }

 private:
  void set_dt(double dt) const {
    if (dt == dt_) return;
    require(dt > 0, "ou: dt must be positive");
    const auto& q = op_.symbol();
    decay_.resize(q.size());
    amp_.resize(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      decay_[i] = std::exp(-q[i] * dt);
      amp_[i] = std::sqrt(-std::expm1(-2 * q[i] * dt) / (2 * q[i]));
    }
    dt_ = dt;
  }

  HeatOperator op_;
  CounterRng rng_;
  mutable double dt_ = -1;
  mutable ModeFunction decay_, amp_;
};

// Stationary X on the given grid: exact draw at t_0, exact OU transitions after.
inline Trajectory sample_stationary_X(const HeatOperator& op, const std::vector<double>& t_grid,
                                      const CounterRng& rng) {
  require(!t_grid.empty(), "sample_stationary_X: empty time grid");
  OuSampler ou(op, rng);
  Spectrum X = ou.stationary_spectrum(0);
  Trajectory tr;
  tr.push(t_grid[0], inverse_fourier(X));
  for (std::size_t n = 1; n < t_grid.size(); ++n) {
    require(t_grid[n] > t_grid[n - 1], "sample_stationary_X: time grid must be strictly increasing");
    ou.advance(X, t_grid[n] - t_grid[n - 1], n);
    tr.push(t_grid[n], inverse_fourier(X));
  }
  return tr;
}

inline std::vector<double> uniform_grid(double t0, double dt, std::size_t steps) {
  std::vector<double> t(steps + 1);
  for (std::size_t n = 0; n <= steps; ++n) t[n] = t0 + dt * double(n);
  return t;
}

inline Field wick_square(const Field& X, double a) {
  return X.map([a](double x) { return x * x - a; });
}
inline Field wick_cube(const Field& X, double a) {
  return X.map([a](double x) { return x * x * x - 3 * a * x; });
}

// Stateful exact-exponential integrator for d/dt v + Q v = f (source held at
// its left value on each step); same scheme as l_inverse.
class ExpIntegrator {
 public:
  ExpIntegrator(const HeatOperator& op, const Field& v0) : op_(op), v_(forward_fourier(v0)), field_(v0) {}

  void step(const Field& f, double dt) {
    if (dt != dt_) {
      const auto& q = op_.symbol();
      decay_.resize(q.size());
      gain_.resize(q.size());
      for (std::size_t i = 0; i < q.size(); ++i) {
        decay_[i] = std::exp(-q[i] * dt);
        gain_[i] = -std::expm1(-q[i] * dt) / q[i];
      }
      dt_ = dt;
    }
    Spectrum fs = forward_fourier(f);
    for (std::size_t i = 0; i < v_.size(); ++i) v_[i] = decay_[i] * v_[i] + gain_[i] * fs[i];
    field_ = inverse_fourier(v_);
  }
  const Field& value() const { return field_; }

 private:
  HeatOperator op_;
  Spectrum v_;
  Field field_;
  double dt_ = -1;
  ModeFunction decay_, gain_;
};

struct RenormConstants {
  double a = 0;
  double b = 0;
  BTilde btilde;
};

inline RenormConstants renorm_constants(const HeatOperator& op, const DyadicPartition& part, double t_max) {
  return {compute_a(op), compute_b(op, part), BTilde(op, part, std::max(t_max, 1e-12))};
}

// The renormalized objects on the reporting window; X21 starts from zero at
// the window start, X31 is integrated from the first (burn-in) slice.
struct StochasticBasket {
  Trajectory X, X2, X21, X31, X32, X23, X23t, X33;
  double a = 0, b = 0;
  std::vector<double> btilde;  // b~(t - t_window) per window slice
};

// Streaming construction: feed X slices in time order.
class TreeBuilder {
 public:
  TreeBuilder(const HeatOperator& op, const DyadicPartition& part, const RenormConstants& rc)
      : op_(op), part_(part), rc_(rc) {
    basket_.a = rc.a;
    basket_.b = rc.b;
  }

  // `record` marks slices in the reporting window; the first recorded slice fixes t = 0 for X21 and b~.
  void feed(double t, const Field& X, bool record) {
    Field X3 = wick_cube(X, rc_.a);
    Field X2 = wick_square(X, rc_.a);
    if (!X31_) {
      X31_.emplace(op_, Field(X.lattice()));
    } else {
      X31_->step(prev_X3_, t - prev_t_);
    }
    if (record) {
      if (!X21_) {
        X21_.emplace(op_, Field(X.lattice()));
        t_window_ = t;
      } else {
        X21_->step(prev_X2_, t - prev_t_);
      }
      emit(t, X, X2);
    }
    prev_X3_ = std::move(X3);
    prev_X2_ = std::move(X2);
    prev_t_ = t;
  }

  const StochasticBasket& basket() const { return basket_; }
  StochasticBasket take() { return std::move(basket_); }

 private:
  void emit(double t, const Field& X, const Field& X2) {
    const Field& X31 = X31_->value();
    const Field& X21 = X21_->value();
    auto bX = lp_all(part_, X);
    auto bX2 = lp_all(part_, X2);
    auto bX31 = lp_all(part_, X31);
    auto bQX2 = lp_all(part_, q_inverse(op_, X2));
    auto bX21 = lp_all(part_, X21);
    double bt = rc_.btilde(t - t_window_);
    auto& B = basket_;
    B.X.push(t, X);
    B.X2.push(t, X2);
    B.X21.push(t, X21);
    B.X31.push(t, X31);
    B.X32.push(t, resonant_blocks(bX, bX31));
    Field x23 = 9.0 * resonant_blocks(bX2, bQX2);
    x23 += -3 * rc_.b;
    B.X23.push(t, std::move(x23));
    Field x23t = 9.0 * resonant_blocks(bX2, bX21);
    x23t += -3 * bt;
    B.X23t.push(t, std::move(x23t));
    B.X33.push(t, 3.0 * resonant_blocks(bX2, bX31) - (3 * rc_.b) * X);
    B.btilde.push_back(bt);
  }

  HeatOperator op_;
  DyadicPartition part_;
  RenormConstants rc_;
  std::optional<ExpIntegrator> X31_, X21_;
  Field prev_X3_, prev_X2_;
  double prev_t_ = 0, t_window_ = 0;
  StochasticBasket basket_;
};

// X_traj covers burn-in plus window; slices from `window_start` on are reported.
inline StochasticBasket build_trees(const Trajectory& X_traj, std::size_t window_start, const HeatOperator& op,
                                    const DyadicPartition& part, const RenormConstants& rc, double T_burn) {
  require(window_start < X_traj.size(), "build_trees: window start beyond trajectory");
  if (X_traj.times[window_start] - X_traj.times[0] < T_burn * (1 - 1e-12))
    throw ConstraintError("build_trees: insufficient burn-in before the reporting window");
  TreeBuilder tb(op, part, rc);
  for (std::size_t n = 0; n < X_traj.size(); ++n) tb.feed(X_traj.times[n], X_traj.slices[n], n >= window_start);
  return tb.take();
}

struct BasketNormParams {
  double kappa = 0.05;
  double beta = 0.2;   // time-Holder exponent beta/2 for X31
  double sigma = 0.1;  // weight power rho^sigma
  Weight weight{1.0, 3.0};
  std::size_t max_time_slices = 256;  // thinning for the time-Holder seminorm
};

struct BasketNormReport {
  std::array<double, 8> entries{};  // powered norms in the order of the definition
  double value = 1;
};

inline Trajectory thin(const Trajectory& tr, std::size_t max_slices) {
  if (tr.size() <= max_slices || max_slices < 2) return tr;
  Trajectory out;
  for (std::size_t k = 0; k < max_slices; ++k) {
    std::size_t n = k * (tr.size() - 1) / (max_slices - 1);
    out.push(tr.times[n], tr.slices[n]);
  }
  return out;
}

// max(1, ||X||, ||[[X^2]]||^(1/2), ||X31||^(1/3), ||X31||_{time}^(1/3), ||X32||^(1/4),
//        ||X23||^(1/4), ||X23~||^(1/4), ||X33||^(1/5))
inline BasketNormReport basket_norm(const StochasticBasket& B, const DyadicPartition& part,
                                    const BasketNormParams& p = {}) {
  BasketNormReport r;
  if (B.X.size() == 0) return r;
  const double k = p.kappa;
  auto C = [&](const Trajectory& tr, double alpha) { return sup_in_time(part, tr, holder(alpha, p.weight, p.sigma)); };
  r.entries[0] = C(B.X, -0.5 - k);
  r.entries[1] = std::sqrt(C(B.X2, -1 - k));
  r.entries[2] = std::cbrt(C(B.X31, 0.5 - k));
  r.entries[3] = std::cbrt(holder_in_time(thin(B.X31, p.max_time_slices), p.beta / 2, p.weight, p.sigma));
  r.entries[4] = std::pow(C(B.X32, -k), 0.25);
  r.entries[5] = std::pow(C(B.X23, -k), 0.25);
  r.entries[6] = std::pow(C(B.X23t, -k), 0.25);
  r.entries[7] = std::pow(C(B.X33, -0.5 - k), 0.2);
  r.value = 1;
  for (double e : r.entries) r.value = std::max(r.value, e);
  return r;
}

// Time bump v on [0, 1] with unit mass; v_K(t) = 2^K v(2^K t).
inline std::vector<double> time_bump_weights(int K, double dt) {
  double width = std::exp2(-double(K));
  int L = int(std::floor(width / dt + 1e-12));
  if (L < 1) return {1.0};
  std::vector<double> w(L + 1);
  double s = 0;
  for (int l = 0; l <= L; ++l) {
    double u = 2 * (l * dt / width) - 1;
    w[l] = std::abs(u) < 1 ? std::exp(-1 / (1 - u * u)) : 0;
    s += w[l];
  }
  for (auto& x : w) x /= s;
  return w;
}

struct CubeSplit {
  Trajectory low, high;  // [[X^3]]_<= and [[X^3]]_>
};

// [[X^3]]_<= = v_K *_t Delta_{<= K} [[X^3]] and its complement.
inline CubeSplit wick_cube_lowpass(const Trajectory& X, double a, const DyadicPartition& part, int K) {
  require(K >= 0, "wick_cube_lowpass: K must be nonnegative");
  double dt = uniform_step(X);
  ModeFunction low = part.low_pass(K);
  Trajectory cube = map_slices(X, [&](const Field& x) { return wick_cube(x, a); });
  Trajectory spatial = map_slices(cube, [&](const Field& c) { return apply_multiplier(c, low); });
  CubeSplit out;
  out.low = time_convolve(spatial, time_bump_weights(K, dt));
  out.high = zip_slices(cube, out.low, [](const Field& c, const Field& l) { return c - l; });
  return out;
}

}  // namespace phi4
