#pragma once

#include <deque>
#include <limits>
#include <optional>
#include <sstream>

#include "stochastic.hpp"

namespace phi4 {

struct Couplings {
  double m2 = 1;
  double lambda = 0;
  double gamma = 1;
};

// Lattice model with its counterterms. The linear operator always carries a
// positive mass m_lin (m^2 itself when positive, 1 otherwise); the difference
// goes into the explicit drift.
class Model {
 public:
  Model() = default;
  Model(const Lattice& lat, Couplings c, int J = -1)
      : c_(c),
        op_(lat, c.m2 > 0 ? c.m2 : 1.0, c.gamma),
        part_(J < 0 ? build_partition(lat) : build_partition(lat, J)) {
    require(c.lambda >= 0, "model: lambda must be nonnegative");
    a_ = compute_a(op_);
    b_ = c.lambda == 0 ? 0.0 : compute_b(op_, part_);
  }

  const Lattice& lattice() const { return op_.lattice(); }
  const Couplings& couplings() const { return c_; }
  double lambda() const { return c_.lambda; }
  const HeatOperator& op() const { return op_; }
  const DyadicPartition& partition() const { return part_; }
  double a() const { return a_; }
  double b() const { return b_; }
  // -3 lambda a + 3 lambda^2 b
  double counterterm() const { return -3 * c_.lambda * a_ + 3 * c_.lambda * c_.lambda * b_; }
  // coefficient of phi in the explicit drift besides the cubic
  double linear_drift() const { return counterterm() + (c_.m2 - op_.m2()); }

  // -lambda phi^3 - (counterterm + m^2 - m_lin) phi
  Field drift(const Field& phi) const {
    const double l = c_.lambda, c = linear_drift();
    return phi.map([l, c](double x) { return -l * x * x * x - c * x; });
  }

  // override the counterterm constants (for fixed-constant comparisons)
  Model with_constants(double a, double b) const {
    Model m = *this;
    m.a_ = a;
    m.b_ = b;
    return m;
  }

 private:
  Couplings c_;
  HeatOperator op_;
  DyadicPartition part_;
  double a_ = 0, b_ = 0;
};

struct LangevinOptions {
  double guard = 0.1;  // substep so that (lambda |phi|_inf^2 + |linear drift|) h < guard
  bool noise = true;
};

// Exponential Euler for d phi = -(Q phi - drift(phi)) dt + eta. The noise part
// is carried by an exact OU field X driven by the same increments, so
// phi = X + v with v solving a random ODE; X is the Gaussian reference field.
class Langevin {
 public:
  Langevin(const Model& m, const CounterRng& rng, LangevinOptions o = {})
      : m_(m), ou_(m.op(), rng), o_(o), Xs_(m.lattice()), X_(m.lattice()), v_(m.lattice()) {}

  void init_stationary(std::uint64_t draw = 0) {
    Xs_ = ou_.stationary_spectrum(draw);
    X_ = inverse_fourier(Xs_);
    v_ = Field(m_.lattice());
    if (!o_.noise) init(X_);
  }
  // X starts stationary (or zero without noise), v = phi0 - X
  void init(const Field& phi0, std::uint64_t draw = 0) {
    check_same(phi0.lattice(), m_.lattice());
    if (o_.noise) {
      Xs_ = ou_.stationary_spectrum(draw);
      X_ = inverse_fourier(Xs_);
    } else {
      Xs_ = Spectrum(m_.lattice());
      X_ = Field(m_.lattice());
    }
    v_ = phi0 - X_;
  }

  void step(double dt) {
    require(dt > 0, "langevin: dt must be positive");
    Spectrum next = Xs_;
    if (o_.noise) ou_.advance(next, dt, step_ + 1);
    step_to(dt, std::move(next));
  }

  // Step with a prescribed X at the end of the step (coupling to another chain's noise).
  void step_to(double dt, Spectrum X_next) {
    require(dt > 0, "langevin: dt must be positive");
    const Field X0 = X_;
    if (o_.noise) {
      Xs_ = std::move(X_next);
      X_ = inverse_fourier(Xs_);
    }
    double left = dt;
    while (left > 0) {
      Field phi = X0 + v_;
      double s = phi.sup_abs();
      double rate = m_.lambda() * s * s + std::abs(m_.linear_drift());
      double h = left;
      if (rate * h >= o_.guard) h = std::min(left, 0.5 * o_.guard / rate);
      if (left - h < 1e-12 * dt) h = left;
      advance_v(m_.drift(phi), h);
      left -= h;
      if (h < dt) ++substeps_;
    }
    ++step_;
    t_ += dt;
    if (!v_.finite() || !(v_.sup_abs() < 1e150)) {
      std::ostringstream os;
      os << "langevin: non-finite field at t = " << t_ << " (step " << step_ << ", lambda = " << m_.lambda()
         << ", dt = " << dt << ")";
      throw NumericalAbort(os.str());
    }
  }

  Field phi() const { return X_ + v_; }
  const Field& X() const { return X_; }
  const Spectrum& X_spectrum() const { return Xs_; }
  const Field& v() const { return v_; }
  double time() const { return t_; }
  std::uint64_t steps() const { return step_; }
  std::uint64_t substeps() const { return substeps_; }
  const Model& model() const { return m_; }

 private:
  void advance_v(const Field& f, double h) {
    if (h != h_) {
      const auto& q = m_.op().symbol();
      decay_.resize(q.size());
      gain_.resize(q.size());
      for (std::size_t i = 0; i < q.size(); ++i) {
        decay_[i] = std::exp(-q[i] * h);
        gain_[i] = -std::expm1(-q[i] * h) / q[i];
      }
      h_ = h;
    }
    Spectrum vs = forward_fourier(v_), fs = forward_fourier(f);
    for (std::size_t i = 0; i < vs.size(); ++i) vs[i] = decay_[i] * vs[i] + gain_[i] * fs[i];
    v_ = inverse_fourier(vs);
  }

  Model m_;
  OuSampler ou_;
  LangevinOptions o_;
  Spectrum Xs_;
  Field X_, v_;
  double t_ = 0;
  std::uint64_t step_ = 0, substeps_ = 0;
  double h_ = -1;
  ModeFunction decay_, gain_;
};

struct JointPath {
  Trajectory phi, X;
};

// phi and X recorded every `every` steps (and at t = 0); starts from the stationary X draw.
inline JointPath run_joint(const Model& m, const CounterRng& rng, double dt, std::size_t steps,
                           std::size_t every = 1, LangevinOptions o = {}) {
  Langevin L(m, rng, o);
  L.init_stationary();
  JointPath p;
  p.phi.push(0, L.phi());
  p.X.push(0, L.X());
  for (std::size_t n = 1; n <= steps; ++n) {
    L.step(dt);
    if (n % every == 0) {
      p.phi.push(double(n) * dt, L.phi());
      p.X.push(double(n) * dt, L.X());
    }
  }
  return p;
}

// ----- Y fixed point -----

struct YOptions {
  double delta = 0.5;  // target contraction
  double C_delta = 4;
  double tol = 1e-6;
  int max_iter = 200;
  BasketNormParams norm{};
};

struct YResult {
  Trajectory Y;
  double L = 0;
  int iterations = 0;
  double contraction = 0;  // largest ratio of successive iterate differences
  double residual = 0;     // |Y - K(Y)| in C_T C^{1/2-kappa}(rho^sigma)
  std::vector<double> diffs;
};

inline LocalizerExponents y_localizer_exponents(double kappa, double sigma) {
  return {-1.5 - kappa, -1 - kappa, -0.5 - kappa, 0, sigma, 2 * sigma};
}

// 2^{L/2} = C_delta (1 + lambda |[[X^2]]|_{C_T C^{-1-kappa}(rho^sigma)})
inline double localizer_level(double x2_norm, double lambda, double C_delta) {
  require(C_delta > 0, "solve_Y: C_delta must be positive");
  return 2 * std::log2(C_delta * (1 + lambda * x2_norm));
}

inline double y_norm(const DyadicPartition& part, const Trajectory& Y, const BasketNormParams& p) {
  return sup_in_time(part, Y, holder(0.5 - p.kappa, p.weight, p.sigma));
}

// Y = -lambda X31 - L^-1[3 lambda (U_> [[X^2]]) > Y] on the basket window.
inline YResult solve_Y(const StochasticBasket& B, const HeatOperator& op, const DyadicPartition& part,
                       double lambda, const YOptions& o = {}) {
  require(o.delta > 0 && o.delta < 1, "solve_Y: delta must lie in (0, 1)");
  require(B.X.size() > 0, "solve_Y: empty basket");
  const auto& p = o.norm;
  YResult r;
  double x2 = sup_in_time(part, B.X2, holder(-1 - p.kappa, p.weight, p.sigma));
  r.L = localizer_level(x2, lambda, o.C_delta);
  auto ex = y_localizer_exponents(p.kappa, p.sigma);
  Trajectory U = map_slices(B.X2, [&](const Field& f) { return localizer_split(part, f, r.L, p.weight, ex).greater; });
  Trajectory base = map_slices(B.X31, [&](const Field& f) { return -lambda * f; });

  auto K = [&](const Trajectory& Y) {
    Trajectory src = zip_slices(U, Y, [&](const Field& u, const Field& y) {
      return (3 * lambda) * paraproduct_succ(part, u, y);
    });
    Trajectory I = l_inverse(op, src);
    return zip_slices(base, I, [](const Field& b, const Field& i) { return b - i; });
  };
  auto dist = [&](const Trajectory& a, const Trajectory& b) {
    return y_norm(part, zip_slices(a, b, [](const Field& x, const Field& y) { return x - y; }), p);
  };

  Trajectory Y = map_slices(B.X, [](const Field& f) { return 0.0 * f; });
  for (r.iterations = 1; r.iterations <= o.max_iter; ++r.iterations) {
    Trajectory next = K(Y);
    double d = dist(next, Y);
    r.diffs.push_back(d);
    if (r.diffs.size() >= 2 && r.diffs[r.diffs.size() - 2] > 0)
      r.contraction = std::max(r.contraction, d / r.diffs[r.diffs.size() - 2]);
    Y = std::move(next);
    if (d < o.tol) break;
  }
  if (r.iterations > o.max_iter) {
    std::ostringstream os;
    os << "solve_Y: Picard iteration did not converge, measured contraction " << r.contraction << " (target "
       << o.delta << ", L = " << r.L << ")";
    throw NumericalAbort(os.str());
  }
  r.residual = dist(K(Y), Y);
  r.Y = std::move(Y);
  return r;
}

// ----- remainder fields -----

struct Remainders {
  Field phi_rem, psi, chi, zeta;
};

// phi_rem = phi - X - Y; psi = phi_rem + Q^-1[3 lambda X2 > phi_rem];
// chi = phi_rem + 3 lambda X21 > phi_rem; zeta = phi - X + lambda X31
inline Remainders remainder_fields(const DyadicPartition& part, const HeatOperator& op, double lambda,
                                   const Field& phi, const Field& X, const Field& Y, const Field& X2,
                                   const Field& X21, const Field& X31) {
  Remainders r;
  r.phi_rem = phi - X - Y;
  r.psi = r.phi_rem + q_inverse(op, (3 * lambda) * paraproduct_succ(part, X2, r.phi_rem));
  r.chi = r.phi_rem + (3 * lambda) * paraproduct_succ(part, X21, r.phi_rem);
  r.zeta = phi - X + lambda * X31;
  return r;
}

// ----- streaming decomposition -----

struct TrajectoryState {
  double t = 0;  // time since the window start
  Field phi, X, X2, X21, X31, Y, phi_rem;
  double lambda = 0, m2 = 1;
  double L = 0;
};

struct PathwiseOptions {
  double dt = 1e-3;
  double T_burn = -1;         // X31 integrates from here; window opens after. < 0: 10 / m_lin
  double C_delta = 4;
  std::optional<double> L;    // localizer level; estimated from burn-in when unset
  std::size_t norm_every = 20;  // burn-in slices used for the L estimate
  BasketNormParams norm{};
  LangevinOptions langevin{};
};

// Runs phi and X jointly and maintains X2, X21, X31 and Y by the same
// left-held exponential steps that build_trees and solve_Y use.
class PathwiseRun {
 public:
  PathwiseRun(const Model& m, const CounterRng& rng, PathwiseOptions o = {})
      : m_(m), o_(o), lang_(m, rng, o.langevin), x31_(m.op(), Field(m.lattice())), x21_(m.op(), Field(m.lattice())),
        I_(m.op(), Field(m.lattice())) {
    require(o.dt > 0, "pathwise: dt must be positive");
    lang_.init_stationary();
    const auto& p = o_.norm;
    double x2sup = 0;
    const double T_burn = o.T_burn < 0 ? 10 / m.op().m2() : o.T_burn;
    std::size_t n_burn = std::size_t(std::ceil(T_burn / o.dt - 1e-9));
    for (std::size_t n = 0; n < n_burn; ++n) {
      Field X3 = wick_cube(lang_.X(), m_.a());
      if (!o_.L && n % o_.norm_every == 0)
        x2sup = std::max(x2sup, besov_norm(m_.partition(), wick_square(lang_.X(), m_.a()),
                                           holder(-1 - p.kappa, p.weight, p.sigma)));
      lang_.step(o.dt);
      x31_.step(X3, o.dt);
    }
    s_.lambda = m.lambda();
    s_.m2 = m.couplings().m2;
    s_.L = o_.L ? *o_.L : localizer_level(x2sup, m.lambda(), o.C_delta);
    ex_ = y_localizer_exponents(p.kappa, p.sigma);
    s_.t = 0;
    s_.X31 = x31_.value();
    s_.X21 = x21_.value();
    s_.Y = -m.lambda() * s_.X31;
    refresh();
  }

  void step() {
    const double dt = o_.dt, l = m_.lambda();
    Field X3 = wick_cube(s_.X, m_.a());
    Field src = l == 0 ? Field(m_.lattice())
                       : (3 * l) * paraproduct_succ(m_.partition(),
                                                    localizer_split(m_.partition(), s_.X2, s_.L, o_.norm.weight, ex_).greater,
                                                    s_.Y);
    lang_.step(dt);
    x31_.step(X3, dt);
    x21_.step(s_.X2, dt);
    I_.step(src, dt);
    s_.t += dt;
    s_.X31 = x31_.value();
    s_.X21 = x21_.value();
    s_.Y = -l * s_.X31 - I_.value();
    refresh();
  }

  const TrajectoryState& state() const { return s_; }
  const Model& model() const { return m_; }
  const PathwiseOptions& options() const { return o_; }
  const Langevin& langevin() const { return lang_; }

 private:
  void refresh() {
    s_.X = lang_.X();
    s_.phi = lang_.phi();
    s_.X2 = wick_square(s_.X, m_.a());
    s_.phi_rem = s_.phi - s_.X - s_.Y;
  }

  Model m_;
  PathwiseOptions o_;
  Langevin lang_;
  ExpIntegrator x31_, x21_, I_;
  LocalizerExponents ex_{};
  TrajectoryState s_;
};

// ----- energy monitor -----

struct EnergyParams {
  double kappa = 0.05;
  double iota = 0.5;
  Weight weight{1.0, 3.0};
  int poly_degree = 4;  // RHS proxy uses basket^degree
};

struct EnergyRecord {
  double t = 0;
  double half_ddt = 0;  // 1/2 d/dt |rho^2 phi_rem|^2_{L2}
  double quartic = 0;   // lambda |rho phi_rem|^4_{L4}
  double mass = 0;      // m^2 |rho^2 psi|^2_{L2}
  double grad = 0;      // |rho^2 grad psi|^2_{L2}
  double sobolev = 0;   // |rho^2 phi_rem|^2_{H^{1-2kappa}}
  double lhs = 0, rhs = 0, ratio = 0;
  double rem_l2 = 0;    // |rho^2 phi_rem|_{L2}
  double zeta_h = 0;    // |rho^2 zeta|_{H^{1-2kappa}}
  double chi_b11 = 0;   // |rho^4 chi|_{B^{1+3kappa}_{1,1}}

  static std::vector<std::string> columns() {
    return {"t", "half_ddt", "quartic", "mass", "grad", "sobolev", "lhs", "rhs", "ratio", "rem_l2", "zeta_h", "chi_b11"};
  }
  std::vector<double> values() const {
    return {t, half_ddt, quartic, mass, grad, sobolev, lhs, rhs, ratio, rem_l2, zeta_h, chi_b11};
  }
};

inline double weighted_l2_sq(const Field& rho, const Field& f) {
  double n = lp_norm(rho * f, 2);
  return n * n;
}

inline double energy_rhs_proxy(double lambda, double t, double basket, const EnergyParams& p) {
  const double k = p.kappa;
  const double theta = (0.5 - 4 * k) / (1 - 2 * k);
  double lt = std::abs(std::log(t));
  double poly = std::pow(basket, p.poly_degree);
  return (std::pow(lambda, 3) + std::pow(lambda, (12 - theta) / (2 + theta)) * std::pow(lt, 4 / (2 + theta)) +
          std::pow(lambda, 7)) *
         poly;
}

// Record at the middle state; prev and next are one step dt either side.
inline EnergyRecord energy_report(const DyadicPartition& part, const HeatOperator& op, const TrajectoryState& prev,
                                  const TrajectoryState& s, const TrajectoryState& next, double basket,
                                  const EnergyParams& p = {}) {
  require(4 * p.iota * p.weight.nu > 3, "energy: rho^iota must lie in L^4 (need 4 iota nu > 3)");
  const Lattice& lat = s.phi.lattice();
  Field r1 = weight_field(lat, p.weight, 1), r2 = weight_field(lat, p.weight, 2);
  auto rem = remainder_fields(part, op, s.lambda, s.phi, s.X, s.Y, s.X2, s.X21, s.X31);
  EnergyRecord e;
  e.t = s.t;
  double dt = next.t - prev.t;
  e.half_ddt = 0.5 * (weighted_l2_sq(r2, next.phi_rem) - weighted_l2_sq(r2, prev.phi_rem)) / dt;
  double q4 = lp_norm(r1 * rem.phi_rem, 4);
  e.quartic = s.lambda * q4 * q4 * q4 * q4;
  e.mass = op.m2() * weighted_l2_sq(r2, rem.psi);
  auto g = discrete_gradient(rem.psi);
  e.grad = weighted_l2_sq(r2, g[0]) + weighted_l2_sq(r2, g[1]) + weighted_l2_sq(r2, g[2]);
  double h = besov_norm(part, rem.phi_rem, sobolev(1 - 2 * p.kappa, p.weight, 2));
  e.sobolev = h * h;
  e.lhs = e.half_ddt + e.quartic + e.mass + e.grad + e.sobolev;
  e.rhs = energy_rhs_proxy(s.lambda, s.t, basket, p);
  e.ratio = e.rhs > 0 ? e.lhs / e.rhs : 0;
  e.rem_l2 = lp_norm(r2 * rem.phi_rem, 2);
  e.zeta_h = besov_norm(part, rem.zeta, sobolev(1 - 2 * p.kappa, p.weight, 2));
  e.chi_b11 = besov_norm(part, rem.chi, BesovParams{1 + 3 * p.kappa, 1, 1, p.weight, 4});
  return e;
}

// Running max of the per-slice basket entries (the time-Holder entry is left out).
inline double basket_slice_norm(const DyadicPartition& part, const HeatOperator& op, const TrajectoryState& s,
                                double b, double btilde, const BasketNormParams& p = {}) {
  const double k = p.kappa;
  Field rho = weight_field(s.X.lattice(), p.weight, p.sigma);
  auto N = [&](const Field& f, double alpha) { return besov_norm_blocks(lp_all(part, f), rho, holder(alpha, p.weight, p.sigma)); };
  auto bX = lp_all(part, s.X), bX2 = lp_all(part, s.X2), bX31 = lp_all(part, s.X31);
  Field x32 = resonant_blocks(bX, bX31);
  Field x23 = 9.0 * resonant_blocks(bX2, lp_all(part, q_inverse(op, s.X2)));
  x23 += -3 * b;
  Field x23t = 9.0 * resonant_blocks(bX2, lp_all(part, s.X21));
  x23t += -3 * btilde;
  Field x33 = 3.0 * resonant_blocks(bX2, bX31) - (3 * b) * s.X;
  double v = 1;
  v = std::max(v, N(s.X, -0.5 - k));
  v = std::max(v, std::sqrt(N(s.X2, -1 - k)));
  v = std::max(v, std::cbrt(N(s.X31, 0.5 - k)));
  v = std::max(v, std::pow(N(x32, -k), 0.25));
  v = std::max(v, std::pow(N(x23, -k), 0.25));
  v = std::max(v, std::pow(N(x23t, -k), 0.25));
  v = std::max(v, std::pow(N(x33, -0.5 - k), 0.2));
  return v;
}

struct MonitorOptions {
  double T = 10;
  std::size_t report_every = 50;
  EnergyParams energy{};
};

// Runs the decomposition over [0, T] of the window and reports the energy terms.
inline std::vector<EnergyRecord> energy_monitor(PathwiseRun& run, const MonitorOptions& mo = {}) {
  const Model& m = run.model();
  const double dt = run.options().dt;
  BTilde bt(m.op(), m.partition(), mo.T + dt);
  std::vector<EnergyRecord> out;
  std::size_t steps = std::size_t(std::llround(mo.T / dt));
  double basket = 1;
  std::optional<TrajectoryState> prev;
  for (std::size_t n = 0; n < steps; ++n) {
    if (n > 0 && n % mo.report_every == 0 && prev) {
      TrajectoryState cur = run.state();
      basket = std::max(basket, basket_slice_norm(m.partition(), m.op(), cur, m.b(), bt(cur.t), run.options().norm));
      run.step();
      out.push_back(energy_report(m.partition(), m.op(), *prev, cur, run.state(), basket, mo.energy));
      prev.reset();
      continue;
    }
    if ((n + 1) % mo.report_every == 0) prev = run.state();
    run.step();
  }
  return out;
}

}  // namespace phi4
