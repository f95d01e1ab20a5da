#pragma once

#include "dynamics.hpp"

namespace phi4 {

// Lattice measure exp(-2 S(phi)) with
// S = eps^3 sum_x [ lambda/4 phi^4 + (c + m^2)/2 phi^2 + 1/2 phi (-Delta)^gamma phi ],
// c = -3 lambda a + 3 lambda^2 b. For gamma = 1 the kinetic term is |grad phi|^2 / 2.
struct GibbsSpec {
  Lattice lat;
  double lambda = 0;
  double m2 = 1;
  double a = 0, b = 0;
  double gamma = 1;
  bool factor_two = true;  // exp(-2 S); fixed

  double counterterm() const { return -3 * lambda * a + 3 * lambda * lambda * b; }
  // coefficient of phi^2 / 2 in the potential
  double mass() const { return m2 + counterterm(); }
  void validate() const {
    require(lambda >= 0, "gibbs: lambda must be nonnegative");
    require(gamma > 0 && gamma <= 1, "gibbs: gamma must lie in (0, 1]");
    require(factor_two, "gibbs: only the exp(-2S) convention is supported");
  }
};

inline GibbsSpec gibbs_spec(const Model& m) {
  GibbsSpec s{m.lattice(), m.lambda(), m.couplings().m2, m.a(), m.b(), m.couplings().gamma};
  s.validate();
  return s;
}

// (-Delta)^gamma as a convolution kernel: K(z) so that (A phi)(x) = sum_y K(x - y) phi(y)
inline Field kinetic_kernel(const Lattice& lat, double gamma) {
  Field d(lat);
  d[0] = 1.0;
  return apply_multiplier(d, fractional_multiplier(lat, gamma));
}

inline Field kinetic_apply(const Lattice& lat, double gamma, const Field& phi) {
  if (gamma == 1.0) return -1.0 * discrete_laplacian(phi);
  return apply_multiplier(phi, fractional_multiplier(lat, gamma));
}

inline double gibbs_action(const GibbsSpec& s, const Field& phi) {
  check_same(s.lat, phi.lattice());
  const double mu = s.mass();
  double pot = 0;
  for (double x : phi.values()) {
    double x2 = x * x;
    pot += 0.25 * s.lambda * x2 * x2 + 0.5 * mu * x2;
  }
  pot *= s.lat.cell();
  double kin;
  if (s.gamma == 1.0) {
    kin = 0.5 * gradient_pairing(phi, phi);
  } else {
    kin = 0.5 * duality_product(phi, kinetic_apply(s.lat, s.gamma, phi));
  }
  return pot + kin;
}

// unnormalized log density, -2 S(phi)
inline double gibbs_log_density(const GibbsSpec& s, const Field& phi) { return -2 * gibbs_action(s, phi); }

// Single-site Metropolis with Gaussian proposals in fixed site order. For
// gamma != 1 the field A phi is kept up to date after each accepted move.
class MetropolisChain {
 public:
  MetropolisChain(const GibbsSpec& s, const Field& phi0, const CounterRng& rng, double step_sigma = 0.5)
      : s_(s), rng_(rng), phi_(phi0), sigma_(step_sigma) {
    s.validate();
    check_same(s.lat, phi0.lattice());
    require(step_sigma > 0, "metropolis: step_sigma must be positive");
    if (s.gamma != 1.0) {
      K_ = kinetic_kernel(s.lat, s.gamma);
      Aphi_ = kinetic_apply(s.lat, s.gamma, phi_);
    }
  }

  // log-density change of setting phi(x) = y
  double delta_log_density(std::size_t x, double y) const {
    const Lattice& lat = s_.lat;
    const double p = phi_[x], d = y - p;
    const double y2 = y * y, p2 = p * p;
    double dS = lat.cell() * (0.25 * s_.lambda * (y2 * y2 - p2 * p2) + 0.5 * s_.mass() * (y2 - p2));
    if (s_.gamma == 1.0) {
      double nb = 0;
      for (int dir = 0; dir < 3; ++dir) {
        int e[3] = {0, 0, 0};
        e[dir] = 1;
        nb += phi_[lat.shift(x, e[0], e[1], e[2])] + phi_[lat.shift(x, -e[0], -e[1], -e[2])];
      }
      dS += 0.5 * lat.spacing() * (6 * (y2 - p2) - 2 * nb * d);
    } else {
      dS += lat.cell() * (d * Aphi_[x] + 0.5 * K_[0] * d * d);
    }
    return -2 * dS;
  }

  // one sweep; returns the acceptance rate
  double sweep() {
    RngStream r(rng_, Purpose::metropolis, sweeps_++);
    std::size_t acc = 0;
    for (std::size_t x = 0; x < phi_.size(); ++x) {
      double y = phi_[x] + sigma_ * r.normal();
      double dl = delta_log_density(x, y);
      double u = r.uniform();
      if (dl >= 0 || u < std::exp(dl)) {
        set(x, y);
        ++acc;
      }
    }
    if (!phi_.finite()) throw NumericalAbort("metropolis: non-finite field after sweep " + std::to_string(sweeps_));
    return double(acc) / double(phi_.size());
  }

  // burn-in sweeps that steer the acceptance into [lo, hi]; sigma is frozen afterwards
  double tune(std::size_t sweeps, double lo = 0.4, double hi = 0.6) {
    double rate = 0;
    for (std::size_t k = 0; k < sweeps; ++k) {
      rate = sweep();
      if (rate < lo) sigma_ *= 0.9;
      if (rate > hi) sigma_ *= 1.1;
    }
    return rate;
  }

  // next sweep draws from RngStream(metropolis, n)
  void seek(std::uint64_t n) { sweeps_ = n; }

  const Field& phi() const { return phi_; }
  double step_sigma() const { return sigma_; }
  std::uint64_t sweeps() const { return sweeps_; }
  const GibbsSpec& spec() const { return s_; }

 private:
  void set(std::size_t x, double y) {
    if (s_.gamma != 1.0) {
      const Lattice& lat = s_.lat;
      const double d = y - phi_[x];
      auto cx = lat.coords(x);
      for (std::size_t z = 0; z < phi_.size(); ++z) {
        auto cz = lat.coords(z);
        Aphi_[z] += d * K_[lat.index(cz[0] - cx[0], cz[1] - cx[1], cz[2] - cx[2])];
      }
    }
    phi_[x] = y;
  }

  GibbsSpec s_;
  CounterRng rng_;
  Field phi_;
  double sigma_;
  std::uint64_t sweeps_ = 0;
  Field K_, Aphi_;
};

inline double metropolis_sweep(const GibbsSpec& s, Field& phi, double step_sigma, const CounterRng& rng,
                               std::uint64_t sweep_index = 0) {
  MetropolisChain c(s, phi, rng, step_sigma);
  c.seek(sweep_index);
  double rate = c.sweep();
  phi = c.phi();
  return rate;
}

// Metropolis transition density for a single-site move x: phi(x) -> y (y != phi(x))
inline double metropolis_move_density(const MetropolisChain& c, std::size_t x, double y) {
  const double d = (y - c.phi()[x]) / c.step_sigma();
  double q = std::exp(-0.5 * d * d) / (std::sqrt(2 * M_PI) * c.step_sigma());
  return q * std::min(1.0, std::exp(c.delta_log_density(x, y)));
}

// Exact draw from the lambda = 0 measure: covariance (2 (m^2 + l^gamma))^-1.
inline Field sample_exact_gaussian(const GibbsSpec& s, const CounterRng& rng, std::uint64_t draw) {
  s.validate();
  require(s.lambda == 0, "sample_exact_gaussian: requires lambda = 0");
  require(s.m2 > 0, "sample_exact_gaussian: requires m^2 > 0");
  return OuSampler(HeatOperator(s.lat, s.m2, s.gamma), rng).stationary(draw);
}

// Fourier Green's function E[phi(0) phi(r)] of the lambda = 0 measure
inline Field gaussian_two_point(const GibbsSpec& s) {
  return covariance_kernel(HeatOperator(s.lat, s.m2, s.gamma));
}

}  // namespace phi4
