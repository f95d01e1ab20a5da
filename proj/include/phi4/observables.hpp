#pragma once

#include <complex>
#include <functional>
#include <map>
#include <optional>

#include <Eigen/Dense>

#include "gibbs.hpp"
#include "stats.hpp"

namespace phi4 {

using SampleSet = std::vector<Field>;

// ----- cylinder functions -----

// F(phi) = Phi(<f_1, phi>, ..., <f_n, phi>) with Phi a polynomial.
struct Monomial {
  double coef = 1;
  std::vector<int> powers;  // one per pairing; missing entries mean 0
};

class Cylinder {
 public:
  Cylinder() = default;
  Cylinder(std::vector<Field> f, std::vector<Monomial> terms) : f_(std::move(f)), terms_(std::move(terms)) {
    for (const auto& t : terms_)
      require(t.powers.size() <= f_.size(), "cylinder: monomial refers to a missing test function");
    for (const auto& t : terms_)
      for (int p : t.powers) require(p >= 0, "cylinder: negative power");
  }

  // parse "2*u0^2*u1 - 0.5*u1 + 1"
  static Cylinder parse(const std::string& text, std::vector<Field> f) {
    std::vector<Monomial> terms;
    std::string s;
    for (char c : text)
      if (!std::isspace(static_cast<unsigned char>(c))) s += c;
    require(!s.empty(), "cylinder: empty polynomial");
    std::size_t i = 0;
    while (i < s.size()) {
      double sign = 1;
      if (s[i] == '+' || s[i] == '-') {
        sign = s[i] == '-' ? -1 : 1;
        ++i;
      }
      Monomial m;
      m.coef = sign;
      bool any = false;
      while (i < s.size() && s[i] != '+' && s[i] != '-') {
        if (s[i] == '*') {
          ++i;
          continue;
        }
        if (s[i] == 'u') {
          std::size_t k = ++i;
          while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
          require(i > k, "cylinder: expected an index after 'u' in '" + text + "'");
          std::size_t idx = std::stoul(s.substr(k, i - k));
          int pw = 1;
          if (i < s.size() && s[i] == '^') {
            std::size_t b = ++i;
            while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
            require(i > b, "cylinder: expected an exponent in '" + text + "'");
            pw = std::stoi(s.substr(b, i - b));
          }
          if (m.powers.size() <= idx) m.powers.resize(idx + 1, 0);
          m.powers[idx] += pw;
        } else {
          std::size_t used = 0;
          double c = 0;
          try {
            c = std::stod(s.substr(i), &used);
          } catch (const std::exception&) {
            throw ConstraintError("cylinder: malformed polynomial '" + text + "'");
          }
          m.coef *= c;
          i += used;
        }
        any = true;
      }
      require(any, "cylinder: malformed polynomial '" + text + "'");
      terms.push_back(m);
    }
    return Cylinder(std::move(f), std::move(terms));
  }

  std::size_t arity() const { return f_.size(); }
  const std::vector<Field>& test_functions() const { return f_; }
  const std::vector<Monomial>& terms() const { return terms_; }

  std::vector<double> pairings(const Field& phi) const {
    std::vector<double> u;
    for (const auto& f : f_) u.push_back(duality_product(f, phi));
    return u;
  }
  double value(const std::vector<double>& u) const {
    double v = 0;
    for (const auto& t : terms_) {
      double m = t.coef;
      for (std::size_t i = 0; i < t.powers.size(); ++i) m *= std::pow(u[i], t.powers[i]);
      v += m;
    }
    return v;
  }
  double partial(std::size_t i, const std::vector<double>& u) const {
    double v = 0;
    for (const auto& t : terms_) {
      if (i >= t.powers.size() || t.powers[i] == 0) continue;
      double m = t.coef * t.powers[i];
      for (std::size_t k = 0; k < t.powers.size(); ++k) m *= std::pow(u[k], k == i ? t.powers[k] - 1 : t.powers[k]);
      v += m;
    }
    return v;
  }
  double operator()(const Field& phi) const { return value(pairings(phi)); }
  // eps^-3 dF/dphi(x) = sum_i d_i Phi f_i(x)
  double gradient_at(const std::vector<double>& u, std::size_t x) const {
    double g = 0;
    for (std::size_t i = 0; i < f_.size(); ++i) g += partial(i, u) * f_[i][x];
    return g;
  }

 private:
  std::vector<Field> f_;
  std::vector<Monomial> terms_;
};

// ----- test functions -----

// periodic Gaussian bump amp * exp(-|x - c|^2 / (2 w^2))
inline Field bump(const Lattice& lat, std::array<double, 3> c, double w, double amp = 1) {
  const double M = lat.side();
  return Field::from_function(lat, [&](const std::array<double, 3>& x) {
    double r2 = 0;
    for (int d = 0; d < 3; ++d) {
      double z = std::remainder(x[d] - c[d], M);
      r2 += z * z;
    }
    return amp * std::exp(-r2 / (2 * w * w));
  });
}

// zero outside the open half 0 < x_1 < M/2
inline Field restrict_positive_half(const Field& f) {
  const Lattice& lat = f.lattice();
  Field g = f;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (lat.centered(lat.coords(i)[0]) <= 0) g[i] = 0;
  return g;
}

inline Field translate(const Field& f, int di, int dj, int dk) {
  const Lattice& lat = f.lattice();
  Field g(lat);
  for (std::size_t i = 0; i < f.size(); ++i) g[lat.shift(i, di, dj, dk)] = f[i];
  return g;
}

inline Field reflect(const Field& f) {
  const Lattice& lat = f.lattice();
  Field g(lat);
  for (std::size_t i = 0; i < f.size(); ++i) g[lat.reflect1(i)] = f[i];
  return g;
}

// ----- Gaussian closed forms -----

// Cov(<f, phi>, <g, phi>) under the lambda = 0 measure
inline double gaussian_covariance(const GibbsSpec& s, const Field& f, const Field& g) {
  HeatOperator op(s.lat, s.m2, s.gamma);
  ModeFunction m(op.symbol().size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = 1 / (2 * op.symbol()[i]);
  return duality_product(f, apply_multiplier(g, m));
}

// E[prod_k <h_k, phi>] by Isserlis from the pair covariances C[a][b]
inline double wick_expectation(const std::vector<std::vector<double>>& C, std::vector<int> idx) {
  if (idx.empty()) return 1;
  if (idx.size() % 2) return 0;
  int first = idx.front();
  double s = 0;
  for (std::size_t k = 1; k < idx.size(); ++k) {
    std::vector<int> rest;
    for (std::size_t r = 1; r < idx.size(); ++r)
      if (r != k) rest.push_back(idx[r]);
    s += C[first][idx[k]] * wick_expectation(C, rest);
  }
  return s;
}

// ----- estimators -----

inline ObservableEstimate estimate(const std::vector<double>& series, std::string label, std::size_t nb = 20) {
  return batch_means(series, nb, std::move(label));
}

// E[phi(x) phi(x + r)] averaged over x
inline std::vector<ObservableEstimate> schwinger_two_point(const SampleSet& samples,
                                                           const std::vector<std::array<int, 3>>& offsets) {
  require(!samples.empty(), "schwinger_two_point: no samples");
  const Lattice& lat = samples.front().lattice();
  std::vector<ObservableEstimate> out;
  for (const auto& r : offsets) {
    std::vector<double> v;
    for (const auto& f : samples) {
      double acc = 0;
      for (std::size_t x = 0; x < f.size(); ++x) acc += f[x] * f[lat.shift(x, r[0], r[1], r[2])];
      v.push_back(acc / double(f.size()));
    }
    out.push_back(estimate(v, "S2(" + std::to_string(r[0]) + "," + std::to_string(r[1]) + "," +
                                  std::to_string(r[2]) + ")"));
  }
  return out;
}

// Per-sample site means of (Delta_j phi)^2 and (Delta_j phi)^4; feeds U4 without keeping the samples.
class BlockMoments {
 public:
  BlockMoments(const DyadicPartition& part, int j) : part_(&part), j_(j) {
    require(j >= part.jmin() && j <= part.jmax(), "connected_four_point: block index out of range");
  }
  void add(const Field& f) {
    Field d = lp_block(*part_, f, j_);
    Field d2 = d * d;
    m2_.push_back(mean(d2.values()));
    m4_.push_back(mean((d2 * d2).values()));
  }
  std::size_t size() const { return m2_.size(); }
  // E[(Delta_j phi)^4] - 3 E[(Delta_j phi)^2]^2
  ObservableEstimate u4(std::size_t nb = 20) const {
    require(!m2_.empty(), "connected_four_point: no samples");
    return jackknife_batches({m2_, m4_}, [](const std::vector<double>& m) { return m[1] - 3 * m[0] * m[0]; }, nb,
                             "U4(j=" + std::to_string(j_) + ")");
  }

 private:
  const DyadicPartition* part_;
  int j_;
  std::vector<double> m2_, m4_;
};

// base point averaged over the lattice
inline ObservableEstimate connected_four_point_smeared(const SampleSet& samples, const DyadicPartition& part, int j,
                                                       std::size_t nb = 20) {
  require(!samples.empty(), "connected_four_point: no samples");
  BlockMoments b(part, j);
  for (const auto& f : samples) b.add(f);
  return b.u4(nb);
}

struct RpResult {
  Eigen::MatrixXcd gram;
  double min_eig = 0;
  double bootstrap_sigma = 0;
  double lo = 0, hi = 0;  // 2.5% / 97.5% bootstrap quantiles of the min eigenvalue
};

inline void check_rp_support(const Field& f) {
  const Lattice& lat = f.lattice();
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f[i] != 0 && lat.centered(lat.coords(i)[0]) <= 0)
      throw ConstraintError("rp_gram: test function not supported in the open half x_1 > 0");
}

// G_kl = E[conj(theta F_k) F_l], F_k = exp(i <f_k, phi>), Hermitian part
inline RpResult rp_gram(const SampleSet& samples, const std::vector<Field>& f, const CounterRng& rng,
                        std::size_t resamples = 1000) {
  require(!samples.empty(), "rp_gram: no samples");
  for (const auto& g : f) check_rp_support(g);
  const std::size_t K = f.size(), S = samples.size();
  std::vector<Field> tf;
  for (const auto& g : f) tf.push_back(reflect(g));
  // per-sample phases u_k = <f_k, phi>, w_k = <theta f_k, phi>
  std::vector<std::vector<double>> u(S, std::vector<double>(K)), w(S, std::vector<double>(K));
  for (std::size_t s = 0; s < S; ++s)
    for (std::size_t k = 0; k < K; ++k) {
      u[s][k] = duality_product(f[k], samples[s]);
      w[s][k] = duality_product(tf[k], samples[s]);
    }
  auto gram = [&](const std::vector<std::size_t>& idx) {
    Eigen::MatrixXcd G = Eigen::MatrixXcd::Zero(long(K), long(K));
    for (std::size_t s : idx)
      for (std::size_t k = 0; k < K; ++k)
        for (std::size_t l = 0; l < K; ++l) G(long(k), long(l)) += std::polar(1.0, u[s][l] - w[s][k]);
    G /= double(idx.size());
    return Eigen::MatrixXcd(0.5 * (G + G.adjoint()));
  };
  auto min_eig = [](const Eigen::MatrixXcd& G) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(G, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
  };
  std::vector<std::size_t> all(S);
  std::iota(all.begin(), all.end(), 0);
  RpResult r;
  r.gram = gram(all);
  r.min_eig = min_eig(r.gram);
  std::vector<double> boot;
  RngStream st(rng, Purpose::bootstrap);
  std::vector<std::size_t> idx(S);
  for (std::size_t b = 0; b < resamples; ++b) {
    for (auto& i : idx) i = st.below(S);
    boot.push_back(min_eig(gram(idx)));
  }
  r.bootstrap_sigma = std::sqrt(variance(boot));
  std::sort(boot.begin(), boot.end());
  if (!boot.empty()) {
    r.lo = boot[std::size_t(0.025 * double(boot.size() - 1))];
    r.hi = boot[std::size_t(0.975 * double(boot.size() - 1))];
  }
  return r;
}

// drift density at x: (lambda phi^3 + (c + m^2) phi + (-Delta)^gamma phi)(x)
inline Field gibbs_drift(const GibbsSpec& s, const Field& phi) {
  Field d = kinetic_apply(s.lat, s.gamma, phi);
  const double l = s.lambda, mu = s.mass();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += l * phi[i] * phi[i] * phi[i] + mu * phi[i];
  return d;
}

// R(x) = E[eps^-3 dF/dphi(x)] - 2 E[F drift(x)] at each site in `sites`
inline std::vector<ObservableEstimate> ibp_residual(const SampleSet& samples, const GibbsSpec& s, const Cylinder& F,
                                                    const std::vector<std::size_t>& sites) {
  require(!samples.empty(), "ibp_residual: no samples");
  std::vector<std::vector<double>> series(sites.size());
  for (const auto& phi : samples) {
    auto u = F.pairings(phi);
    double Fv = F.value(u);
    Field d = gibbs_drift(s, phi);
    for (std::size_t k = 0; k < sites.size(); ++k)
      series[k].push_back(F.gradient_at(u, sites[k]) - 2 * Fv * d[sites[k]]);
  }
  std::vector<ObservableEstimate> out;
  for (std::size_t k = 0; k < sites.size(); ++k) out.push_back(estimate(series[k], "ibp@" + std::to_string(sites[k])));
  return out;
}

// the same residual evaluated exactly under the lambda = 0 measure (Isserlis)
inline double ibp_gaussian_closed_form(const GibbsSpec& s, const Cylinder& F, std::size_t x) {
  require(s.lambda == 0, "ibp closed form: requires lambda = 0");
  const Lattice& lat = s.lat;
  // linear forms: the f_i, then g_x with <g_x, phi> = ((m^2 + (-Delta)^gamma) phi)(x)
  std::vector<Field> h = F.test_functions();
  Field gx = kinetic_apply(lat, s.gamma, point_mass(lat, x));
  gx += s.m2 * point_mass(lat, x);
  h.push_back(gx);
  const std::size_t n = h.size();
  std::vector<std::vector<double>> C(n, std::vector<double>(n));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a; b < n; ++b) C[a][b] = C[b][a] = gaussian_covariance(s, h[a], h[b]);
  double lhs = 0, rhs = 0;
  for (const auto& t : F.terms()) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < t.powers.size(); ++i)
      for (int p = 0; p < t.powers[i]; ++p) idx.push_back(int(i));
    // derivative terms
    for (std::size_t i = 0; i < t.powers.size(); ++i) {
      if (t.powers[i] == 0) continue;
      std::vector<int> di;
      bool dropped = false;
      for (int v : idx) {
        if (v == int(i) && !dropped) {
          dropped = true;
          continue;
        }
        di.push_back(v);
      }
      lhs += t.coef * t.powers[i] * F.test_functions()[i][x] * wick_expectation(C, di);
    }
    idx.push_back(int(n - 1));
    rhs += t.coef * wick_expectation(C, idx);
  }
  return lhs - 2 * rhs;
}

// eps^-3 1_{x=y} - 2 E[phi(y) drift(x)], averaged over common translations of (x, y)
inline ObservableEstimate ds_two_point_residual(const SampleSet& samples, const GibbsSpec& s, std::array<int, 3> r) {
  require(!samples.empty(), "ds_two_point_residual: no samples");
  const Lattice& lat = s.lat;
  const double delta = (r[0] % lat.n_side() == 0 && r[1] % lat.n_side() == 0 && r[2] % lat.n_side() == 0)
                           ? 1 / lat.cell()
                           : 0.0;
  std::vector<double> v;
  for (const auto& phi : samples) {
    Field d = gibbs_drift(s, phi);
    double acc = 0;
    for (std::size_t x = 0; x < phi.size(); ++x) acc += phi[lat.shift(x, r[0], r[1], r[2])] * d[x];
    v.push_back(delta - 2 * acc / double(phi.size()));
  }
  return estimate(v, "ds(" + std::to_string(r[0]) + "," + std::to_string(r[1]) + "," + std::to_string(r[2]) + ")");
}

// 2 (m^2 + (-Delta)^gamma) G (r) - eps^-3 1_{r=0}, from the Fourier Green's function
inline double ds_gaussian_closed_form(const GibbsSpec& s, std::array<int, 3> r) {
  const Lattice& lat = s.lat;
  Field G = gaussian_two_point(s);
  Field LG = kinetic_apply(lat, s.gamma, G);
  LG += s.m2 * G;
  std::size_t i = lat.index(r[0], r[1], r[2]);
  return (i == 0 ? 1 / lat.cell() : 0.0) - 2 * LG[i];
}

// ----- renormalized cube -----

struct CubeConstants {
  double variance = 0;  // E[(Delta_{<=N} X)^2]
  double resonant = 0;  // E[[[.]] o Q^-1 [[.]]] with [[.]] the centered square
  double c = 0;         // 3 lambda variance - 18 lambda^2 resonant
};

// Fourier-sum evaluation of the cube constants at low-pass level N
inline CubeConstants cube_constants(const HeatOperator& op, const DyadicPartition& part, int N, double lambda) {
  const Lattice& lat = op.lattice();
  ModeFunction chi = part.low_pass(N);
  Spectrum g(lat);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = chi[k] * chi[k] / (2 * op.symbol()[k]);
  Field G = inverse_fourier(g);
  Spectrum S = forward_fourier(2.0 * (G * G));
  ModeFunction W = resonant_weight(part);
  CubeConstants cc;
  cc.variance = G[0];
  double s = 0;
  for (std::size_t k = 0; k < W.size(); ++k) s += W[k] * S[k].real() / op.symbol()[k];
  cc.resonant = s * lat.mode_measure();
  cc.c = 3 * lambda * cc.variance - 18 * lambda * lambda * cc.resonant;
  return cc;
}

struct OpeEstimate {
  int N = 0;
  CubeConstants exact;
  ObservableEstimate c_mc;  // same constant from the paired X samples
  ObservableEstimate value;
};

// E[F(phi) <g, (Delta_{<=N} phi)^3 - c_N Delta_{<=N} phi>] for each N
inline std::vector<OpeEstimate> renormalized_cube_ope(const SampleSet& phi, const SampleSet& X, const HeatOperator& op,
                                                      const DyadicPartition& part, double lambda,
                                                      const std::vector<int>& Ns, const Cylinder& F, const Field& g) {
  require(!phi.empty(), "renormalized_cube_ope: no samples");
  if (X.size() != phi.size()) throw ConstraintError("renormalized_cube_ope: missing paired X samples");
  std::vector<OpeEstimate> out;
  for (int N : Ns) {
    OpeEstimate e;
    e.N = N;
    e.exact = cube_constants(op, part, N, lambda);
    ModeFunction chi = part.low_pass(N);
    std::vector<double> v, cv;
    for (std::size_t s = 0; s < phi.size(); ++s) {
      Field d = apply_multiplier(phi[s], chi);
      Field body = d * d * d - e.exact.c * d;
      v.push_back(F(phi[s]) * duality_product(g, body));
      Field dx = apply_multiplier(X[s], chi);
      Field z = (dx * dx).map([&](double t) { return t - e.exact.variance; });
      cv.push_back(3 * lambda * mean((dx * dx).values()) -
                   18 * lambda * lambda * mean(resonant(part, z, q_inverse(op, z)).values()));
    }
    e.value = estimate(v, "ope(N=" + std::to_string(N) + ")");
    e.c_mc = estimate(cv, "c_N(N=" + std::to_string(N) + ")");
    out.push_back(std::move(e));
  }
  return out;
}

// ----- moments and symmetry residuals -----

struct ExpMoment {
  ObservableEstimate value;
  double half_value = 0;     // estimate from the first half of the samples
  double relative_change = 0;
  bool cauchy_stable = false;  // relative change below 20%
};

// <phi>_* = (1 + |rho^2 phi|^2_{H^{-1/2-2kappa}})^{1/2}; estimates E[exp(beta <phi>_*^{1-upsilon})]
inline ExpMoment exp_moment(const SampleSet& samples, const DyadicPartition& part, double beta, double upsilon,
                            const Weight& rho, double kappa = 0.05) {
  require(beta >= 0 && beta < 1 && upsilon > 0 && upsilon < 1, "exp_moment: need beta in [0,1), upsilon in (0,1)");
  require(!samples.empty(), "exp_moment: no samples");
  std::vector<double> v;
  for (const auto& f : samples) {
    double h = besov_norm(part, f, sobolev(-0.5 - 2 * kappa, rho, 2));
    double star = std::sqrt(1 + h * h);
    v.push_back(std::exp(beta * std::pow(star, 1 - upsilon)));
  }
  ExpMoment m;
  m.value = estimate(v, "exp_moment");
  std::vector<double> half(v.begin(), v.begin() + long(v.size() / 2));
  m.half_value = mean(half);
  m.relative_change = half.empty() ? 0 : std::abs(m.value.value / m.half_value - 1);
  m.cauchy_stable = m.relative_change < 0.2;
  return m;
}

// E[Phi(<f, phi>)] - E[Phi(<T_h f, phi>)] per shift, from paired differences
inline std::vector<ObservableEstimate> translation_invariance_residual(
    const SampleSet& samples, const Field& f, const std::vector<std::array<int, 3>>& shifts,
    const std::function<double(double)>& Phi = [](double u) { return u * u; }) {
  require(!samples.empty(), "translation_invariance_residual: no samples");
  std::vector<ObservableEstimate> out;
  for (const auto& h : shifts) {
    Field th = translate(f, h[0], h[1], h[2]);
    std::vector<double> v;
    for (const auto& phi : samples) v.push_back(Phi(duality_product(f, phi)) - Phi(duality_product(th, phi)));
    out.push_back(estimate(v, "shift(" + std::to_string(h[0]) + "," + std::to_string(h[1]) + "," +
                                  std::to_string(h[2]) + ")"));
  }
  return out;
}

// ----- sample streams -----

struct StreamOptions {
  std::size_t burn_in = 500;  // sweeps (Metropolis) or steps (Langevin)
  std::size_t samples = 1000;
  std::size_t thin = 1;
  double dt = 1e-3;           // Langevin only
};

inline SampleSet exact_gaussian_samples(const GibbsSpec& s, const CounterRng& rng, std::size_t n) {
  SampleSet out;
  for (std::size_t d = 0; d < n; ++d) out.push_back(sample_exact_gaussian(s, rng, d));
  return out;
}

inline SampleSet metropolis_samples(const GibbsSpec& s, const CounterRng& rng, const StreamOptions& o,
                                    double* step_sigma = nullptr) {
  MetropolisChain c(s, Field(s.lat), rng);
  c.tune(o.burn_in);
  if (step_sigma) *step_sigma = c.step_sigma();
  SampleSet out;
  for (std::size_t k = 0; k < o.samples; ++k) {
    for (std::size_t t = 0; t < o.thin; ++t) c.sweep();
    out.push_back(c.phi());
  }
  return out;
}

// phi samples with the paired X samples
inline std::pair<SampleSet, SampleSet> langevin_samples(const Model& m, const CounterRng& rng, const StreamOptions& o) {
  Langevin L(m, rng);
  L.init_stationary();
  for (std::size_t k = 0; k < o.burn_in; ++k) L.step(o.dt);
  SampleSet phi, X;
  for (std::size_t k = 0; k < o.samples; ++k) {
    for (std::size_t t = 0; t < o.thin; ++t) L.step(o.dt);
    phi.push_back(L.phi());
    X.push_back(L.X());
  }
  return {phi, X};
}

}  // namespace phi4
