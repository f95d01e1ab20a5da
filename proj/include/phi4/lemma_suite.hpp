#pragma once

#include <cstdio>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "besov.hpp"
#include "pool.hpp"
#include "random_fields.hpp"

namespace phi4 {

// ----- exact identities -----

struct IdentityRow {
  std::string name;
  double error = 0;  // relative
  double tol = 0;
  bool pass() const { return std::isfinite(error) && error <= tol; }
};

inline double relative_error(const Field& a, const Field& b) {
  double d = 0, n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += (a[i] - b[i]) * (a[i] - b[i]);
    n += b[i] * b[i];
  }
  return n == 0 ? std::sqrt(d) : std::sqrt(d / n);
}

// Machine-precision identities on white-noise inputs. `members` random draws each.
inline std::vector<IdentityRow> identity_suite(const DyadicPartition& part, std::uint64_t seed = 1,
                                               int members = 3, double m2 = 1.0) {
  const Lattice& lat = part.lattice();
  HeatOperator op(lat, m2);
  std::vector<IdentityRow> rows = {{"fourier_round_trip", 0, 1e-12},
                                   {"block_sum", 0, 1e-11},
                                   {"paraproduct_decomposition", 0, 1e-10},
                                   {"summation_by_parts", 0, 1e-10},
                                   {"localizer_complement", 0, 1e-10},
                                   {"heat_step_zero", 0, 1e-12},
                                   {"q_inverse", 0, 1e-10},
                                   {"extension_constant", 0, 1e-12}};
  auto bump = [&](std::size_t r, double e) { rows[r].error = std::max(rows[r].error, e); };
  for (int m = 0; m < members; ++m) {
    Field f = white_field(lat, seed, 2 * std::uint64_t(m)), g = white_field(lat, seed, 2 * std::uint64_t(m) + 1);
    bump(0, relative_error(inverse_fourier(forward_fourier(f)), f));
    Field sum(lat);
    for (const auto& b : lp_all(part, f)) sum += b;
    bump(1, relative_error(sum, f));
    Field dec = paraproduct_prec(part, f, g) + resonant(part, f, g) + paraproduct_succ(part, f, g);
    bump(2, relative_error(dec, f * g));
    double lhs = duality_product(discrete_laplacian(f), g), rhs = -gradient_pairing(f, g);
    bump(3, std::abs(lhs - rhs) / std::abs(rhs));
    auto split = localizer_split(part, f, 0.5, Weight{1, 2}, {-1.5, -1, -0.5, 0, 0.5, 1});
    bump(4, relative_error(split.greater + split.lesser, f));
    bump(5, relative_error(heat_step(op, f, 0.0), f));
    bump(6, relative_error(q_inverse(op, q_apply(op, f)), f));
    // w is supported in B_{1/2}, so E(c) = c holds at lattice sites only
    const double c = 1.5 + m;
    Extension E(Field(lat, c));
    for (std::size_t x = std::size_t(m); x < lat.volume(); x += 7) bump(7, std::abs(E(lat.position(x)) - c) / c);
  }
  return rows;
}

// ----- calibrated inequalities -----

// One ensemble member on one lattice: three band-limited inputs and cached
// blocks / weight powers.
class LemmaSample {
 public:
  LemmaSample(const DyadicPartition& part, const Weight& w, std::array<Field, 3> in,
              const DyadicPartition* fine = nullptr)
      : part_(&part), fine_(fine), w_(w), in_(std::move(in)) {
    for (int k = 0; k < 3; ++k) blocks_[k] = lp_all(part, in_[k]);
  }
  const DyadicPartition& part() const { return *part_; }
  const Lattice& lattice() const { return part_->lattice(); }
  const Weight& weight() const { return w_; }
  const Field& f() const { return in_[0]; }
  const Field& g() const { return in_[1]; }
  const Field& h() const { return in_[2]; }
  const Field& rho(double power) const {
    auto it = rho_.find(power);
    if (it == rho_.end()) it = rho_.emplace(power, weight_field(lattice(), w_, power)).first;
    return it->second;
  }
  // norm of input k (0, 1, 2) in B^alpha_{p,q}(rho^power)
  double norm(int k, double alpha, double p, double q, double power = 0) const {
    return besov_norm_blocks(blocks_[k], rho(power), {alpha, p, q, w_, power});
  }
  double norm(const Field& x, double alpha, double p, double q, double power = 0) const {
    return besov_norm_blocks(lp_all(*part_, x), rho(power), {alpha, p, q, w_, power});
  }
  double lp(const Field& x, double p, double power = 0) const { return lp_norm(rho(power) * x, p); }

  // B^alpha_{p,q}(rho) norm of the extension of f, sampled on the lattice refined once
  double extension_norm(double alpha, double p, double q) const {
    if (!ext_) {
      Field e = Extension(f()).materialize(1);
      if (!fine_) {
        own_fine_ = build_partition(e.lattice(), part_->J());
        fine_ = &*own_fine_;
      }
      ext_ = lp_all(*fine_, e);
      ext_rho_ = weight_field(e.lattice(), w_, 1);
    }
    return besov_norm_blocks(*ext_, ext_rho_, {alpha, p, q, w_, 1});
  }

 private:
  const DyadicPartition* part_;
  mutable const DyadicPartition* fine_;
  mutable std::optional<DyadicPartition> own_fine_;
  mutable std::optional<std::vector<Field>> ext_;
  mutable Field ext_rho_;
  Weight w_;
  std::array<Field, 3> in_;
  std::array<std::vector<Field>, 3> blocks_;
  mutable std::map<double, Field> rho_;
};

enum class LemmaKind {
  upper,      // constant = max ratio
  two_sided,  // constant = max(ratio, 1/ratio)
  exact       // ratio <= 1 on every sample
};

struct LemmaProbe {
  std::string name;
  LemmaKind kind = LemmaKind::upper;
  double drift_limit = 2;
  std::function<std::vector<double>(const LemmaSample&)> ratios;
};

struct LemmaRow {
  std::string name;
  LemmaKind kind = LemmaKind::upper;
  double drift_limit = 2;
  std::vector<double> eps;
  std::vector<double> constant;
  double drift = 0;  // max over finer eps of C(eps) / C(eps_0)
  bool pass = false;
};

struct LemmaSuiteOptions {
  std::vector<int> levels{3, 4, 5};  // eps = M 2^-N
  double M = 1;
  int J = 1;
  int ensemble = 100;
  int cutoff = 3;
  double decay = 1;
  std::uint64_t seed = 20;
  Weight weight{4, 2};
  double m2 = 1;
  int threads = 1;
};

// (f * g)(x) = eps^3 sum_y f(x - y) g(y), periodic
inline Field lattice_convolution(const Field& f, const Field& g) {
  check_same(f.lattice(), g.lattice());
  Spectrum a = forward_fourier(f), b = forward_fourier(g);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] *= b[i];
  return inverse_fourier(a);
}

inline double lp_convolution_norm_ratio(const LemmaSample& s, double p, double q, double r) {
  Field fg = lattice_convolution(s.f(), s.g());
  return s.lp(fg, r, 1) / (s.lp(s.f(), p, -1) * s.lp(s.g(), q, 1));
}

inline std::vector<LemmaProbe> standard_lemma_probes(double m2 = 1) {
  using V = std::vector<double>;
  std::vector<LemmaProbe> P;

  for (auto [a, p, q] : {std::array<double, 3>{-0.5, kInf, kInf}, {0.5, 2, 2}, {0.25, 4, kInf}, {1, 1, 1}}) {
    char name[64];
    std::snprintf(name, sizeof name, "norm_equivalence[a=%g,p=%g,q=%g]", a, p, q);
    P.push_back({name, LemmaKind::two_sided, 2, [=](const LemmaSample& s) {
                   return V{s.norm(0, a, p, q, 1) / s.norm(s.rho(1) * s.f(), a, p, q)};
                 }});
  }
  for (auto [a, p, q] : {std::array<double, 3>{0.5, 2, 2}, {0.3, 1, kInf}, {-0.4, kInf, 1}}) {
    auto conj = [](double x) { return x == 1 ? kInf : std::isinf(x) ? 1.0 : x / (x - 1); };
    double pp = conj(p), qq = conj(q);
    char name[64];
    std::snprintf(name, sizeof name, "duality[a=%g,p=%g,q=%g]", a, p, q);
    P.push_back({name, LemmaKind::upper, 2, [=](const LemmaSample& s) {
                   return V{std::abs(duality_product(s.f(), s.g())) /
                            (s.norm(0, a, p, q, 1) * s.norm(1, -a, pp, qq, -1))};
                 }});
  }
  // theta-interpolation between two Besov scales; pure Hoelder, constant 1
  P.push_back({"interpolation", LemmaKind::exact, 1, [](const LemmaSample& s) {
                 V out;
                 struct Case { double a0, a1, b0, b1, p0, p1, q0, q1, th; };
                 for (Case c : {Case{-1, 1, 0, 2, 2, 2, 2, 2, 0.5}, Case{-0.5, 1.5, 1, -1, 1, kInf, 1, kInf, 0.3},
                                Case{0, 2, 0.5, 0.5, 4, 2, kInf, 2, 0.7}}) {
                   auto mix = [&](double x0, double x1) { return c.th * x0 + (1 - c.th) * x1; };
                   auto inv = [](double x) { return std::isinf(x) ? 0.0 : 1 / x; };
                   double ip = mix(inv(c.p0), inv(c.p1)), iq = mix(inv(c.q0), inv(c.q1));
                   double lhs = s.norm(0, mix(c.a0, c.a1), ip == 0 ? kInf : 1 / ip, iq == 0 ? kInf : 1 / iq,
                                       mix(c.b0, c.b1));
                   double rhs = std::pow(s.norm(0, c.a0, c.p0, c.q0, c.b0), c.th) *
                                std::pow(s.norm(0, c.a1, c.p1, c.q1, c.b1), 1 - c.th);
                   out.push_back(lhs / rhs);
                 }
                 return out;
               }});
  P.push_back({"embedding_l2", LemmaKind::two_sided, 2,
               [](const LemmaSample& s) { return V{s.norm(0, 0, 2, 2, 1) / s.lp(s.f(), 2, 1)}; }});
  P.push_back({"embedding_l4", LemmaKind::upper, 2,
               [](const LemmaSample& s) { return V{s.norm(0, 0, 4, kInf, 1) / s.lp(s.f(), 4, 1)}; }});
  for (double p : {2.0, kInf}) {
    char name[64];
    std::snprintf(name, sizeof name, "gradient[p=%g]", p);
    P.push_back({name, LemmaKind::upper, 2, [=](const LemmaSample& s) {
                   const double k = 0.5;
                   auto D = discrete_gradient(s.f());
                   double grad = 0;
                   for (const auto& d : D) grad += s.norm(d, -k, p, p, 1);
                   return V{s.norm(0, 1 - k, p, p, 1) / (s.norm(0, -k, p, p, 1) + grad)};
                 }});
  }
  // rho^{1+iota} f in L2 against rho f in L4, constant ||rho^iota||_L4 exactly
  P.push_back({"weighted_hoelder", LemmaKind::exact, 1, [](const LemmaSample& s) {
                 const double iota = 0.5;
                 double C = lp_norm(s.rho(iota), 4);
                 return V{s.lp(s.f(), 2, 1 + iota) / (C * s.lp(s.f(), 4, 1))};
               }});
  P.push_back({"product_square", LemmaKind::upper, 2, [](const LemmaSample& s) {
                 const double a = 0.5, b = 0.1;
                 return V{s.norm(s.f() * s.f(), a, 1, 1, 2) / (s.lp(s.f(), 2, 1) * s.norm(0, a + 2 * b, 2, 2, 1))};
               }});
  P.push_back({"product_cube", LemmaKind::upper, 2, [](const LemmaSample& s) {
                 const double a = 0.5, b = 0.1;
                 double l4 = s.lp(s.f(), 4, 1);
                 return V{s.norm(s.f() * s.f() * s.f(), a, 1, 1, 3) / (l4 * l4 * s.norm(0, a + 2 * b, 2, 2, 1))};
               }});
  for (auto [p, q, r] : {std::array<double, 3>{1, 2, 2}, {1, 4, 4}, {2, 2, kInf}, {1.5, 1.5, 3}}) {
    char name[64];
    std::snprintf(name, sizeof name, "young[p=%g,q=%g,r=%g]", p, q, r);
    P.push_back({name, LemmaKind::upper, 2,
                 [=](const LemmaSample& s) { return V{lp_convolution_norm_ratio(s, p, q, r)}; }});
  }
  // ||P_t Delta_j f||_L1(rho) <= C e^{-t(m^2 + c 4^j)} ||Delta_j f||_L1(rho), c fixed to 1
  P.push_back({"heat_block_decay", LemmaKind::upper, 4, [m2](const LemmaSample& s) {
                 HeatOperator op(s.lattice(), m2);
                 const double c = 1;
                 V out;
                 for (int j = s.part().jmin(); j <= s.part().jmax(); ++j) {
                   Field b = lp_block(s.part(), s.f(), j);
                   double base = s.lp(b, 1, 1);
                   if (base == 0) continue;
                   for (double t : {0.005, 0.02, 0.1}) {
                     double rate = m2 + c * std::exp2(2.0 * j);
                     out.push_back(s.lp(heat_step(op, b, t), 1, 1) / (std::exp(-t * rate) * base));
                   }
                 }
                 return out;
               }});
  // ||v||_{L1_T B^a_{1,1}} against ||v0||_{B^{a-2}} + ||f||_{L1_T B^{a-2}} for L v = f
  P.push_back({"schauder", LemmaKind::upper, 4, [m2](const LemmaSample& s) {
                 HeatOperator op(s.lattice(), m2);
                 const double a = 0.5, T = 0.4;
                 const int steps = 8;
                 Trajectory src;
                 for (int n = 0; n <= steps; ++n) {
                   double t = T * n / steps;
                   src.push(t, std::cos(2 * std::numbers::pi * t / T) * s.g() + (t / T) * s.h());
                 }
                 Trajectory v = l_inverse(op, src, s.f());
                 auto integral = [&](const Trajectory& tr, double alpha) {
                   double acc = 0;
                   for (int n = 0; n <= steps; ++n)
                     acc += (n == 0 || n == steps ? 0.5 : 1.0) * s.norm(tr.slices[n], alpha, 1, 1, 1);
                   return acc * T / steps;
                 };
                 return V{integral(v, a) / (s.norm(0, a - 2, 1, 1, 1) + integral(src, a - 2))};
               }});
  {
    // c_k = -log2 rho(2^k) is read on the index scale |m| ~ 2^k, so a steep weight
    // pushes every L_k above the top block; this one keeps U_> nontrivial
    const Weight w{0.1, 2};
    const LocalizerExponents ex{-1.5, -1, -0.5, 0, 0.5, 1};
    auto nrm = [w](const LemmaSample& s, const Field& x, double alpha, double power) {
      return besov_norm(s.part(), x, {alpha, kInf, kInf, w, power});
    };
    for (double L : {0.5, 1.5}) {
      char name[64];
      std::snprintf(name, sizeof name, "localizer[L=%g]", L);
      P.push_back({std::string(name) + "_high", LemmaKind::upper, 4, [=](const LemmaSample& s) {
                     auto u = localizer_split(s.part(), s.f(), L, w, ex);
                     return V{nrm(s, u.greater, ex.alpha, ex.a) /
                              (std::exp2(-(ex.beta - ex.alpha) * L) * nrm(s, s.f(), ex.beta, ex.b))};
                   }});
      P.push_back({std::string(name) + "_low", LemmaKind::upper, 4, [=](const LemmaSample& s) {
                     auto u = localizer_split(s.part(), s.f(), L, w, ex);
                     return V{nrm(s, u.lesser, ex.gamma, ex.c) /
                              (std::exp2((ex.gamma - ex.beta) * L) * nrm(s, s.f(), ex.beta, ex.b))};
                   }});
    }
  }
  P.push_back({"commutator", LemmaKind::upper, 4, [](const LemmaSample& s) {
                 const double a = 0.6, b = -0.4, c = 0.2;
                 Field C = commutator_C(s.part(), s.f(), s.g(), s.h());
                 return V{s.norm(C, b + c, 2, kInf, 1) /
                          (s.norm(0, a, kInf, kInf, 1) * s.norm(1, b, kInf, kInf) * s.norm(2, c, 2, kInf))};
               }});
  P.push_back({"duality_defect", LemmaKind::upper, 4, [](const LemmaSample& s) {
                 const double a = 0.6, b = -0.5, c = 0.3;
                 double D = duality_defect_D(s.part(), s.rho(1), s.f(), s.g(), s.h());
                 return V{std::abs(D) / (s.norm(0, a, 2, 2, 1) * s.norm(1, b, kInf, kInf) * s.norm(2, c, 2, 2))};
               }});
  P.push_back({"commutator_tilde", LemmaKind::upper, 4, [m2](const LemmaSample& s) {
                 const double a = 0.6, b = -1.2, c = -1.0, d = 0.1;
                 HeatOperator op(s.lattice(), m2);
                 Field C = commutator_tilde(s.part(), op, s.f(), s.g(), s.h());
                 return V{s.norm(C, b + c + 2, 2, 2, 1) /
                          (s.norm(0, a, 2, 2, 1) * s.norm(1, b, kInf, kInf) * s.norm(2, c + d, kInf, kInf))};
               }});
  P.push_back({"commutator_bar", LemmaKind::upper, 4, [m2](const LemmaSample& s) {
                 const double a = 0.6, b = -1.2, c = -1.0, d = 0.1;
                 HeatOperator op(s.lattice(), m2);
                 Trajectory F, G, H;
                 for (int n = 0; n <= 4; ++n) {
                   double t = 0.05 * n;
                   F.push(t, (1 + t) * s.f());
                   G.push(t, std::cos(10 * t) * s.g());
                   H.push(t, s.h());
                 }
                 Trajectory C = commutator_bar(s.part(), op, F, G, H);
                 auto sup = [&](const Trajectory& tr, double alpha, double power) {
                   double m = 0;
                   for (const auto& x : tr.slices) m = std::max(m, s.norm(x, alpha, kInf, kInf, power));
                   return m;
                 };
                 return V{sup(C, b + c + 2, 1) / (sup(F, a, 1) * sup(G, b, 0) * sup(H, c + d, 0))};
               }});
  for (auto [a, p, q] : {std::array<double, 3>{0.5, 2, 2}, {-0.5, kInf, kInf}, {0, 1, 1}}) {
    char name[64];
    std::snprintf(name, sizeof name, "extension[a=%g,p=%g,q=%g]", a, p, q);
    P.push_back({name, LemmaKind::upper, 4, [=](const LemmaSample& s) {
                   return V{s.extension_norm(a, p, q) / s.norm(0, a, p, q, 1)};
                 }});
  }
  return P;
}

struct LemmaReport {
  std::vector<LemmaRow> rows;
  std::vector<std::pair<double, std::vector<IdentityRow>>> identities;  // per eps
  bool all_pass() const {
    for (const auto& r : rows)
      if (!r.pass) return false;
    for (const auto& [e, ids] : identities)
      for (const auto& i : ids)
        if (!i.pass()) return false;
    return true;
  }
  void write_csv(std::ostream& os) const;
};

inline const char* lemma_kind_name(LemmaKind k) {
  return k == LemmaKind::upper ? "upper" : k == LemmaKind::two_sided ? "two_sided" : "exact";
}

inline void LemmaReport::write_csv(std::ostream& os) const {
  char buf[256];
  os << "lemma,kind,eps,constant,drift,limit,pass\n";
  for (const auto& r : rows)
    for (std::size_t e = 0; e < r.eps.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%s,%s,%.6g,%.10g,%.6g,%.6g,%d\n", r.name.c_str(), lemma_kind_name(r.kind),
                    r.eps[e], r.constant[e], r.drift, r.drift_limit, int(r.pass));
      os << buf;
    }
  for (const auto& [eps, ids] : identities)
    for (const auto& i : ids) {
      std::snprintf(buf, sizeof buf, "%s,identity,%.6g,%.6e,0,%.3g,%d\n", i.name.c_str(), eps, i.error, i.tol,
                    int(i.pass()));
      os << buf;
    }
}

inline double lemma_constant(LemmaKind kind, const std::vector<double>& ratios) {
  double c = 0;
  for (double r : ratios) {
    if (!std::isfinite(r)) return kInf;
    c = std::max(c, kind == LemmaKind::two_sided ? std::max(r, 1 / r) : r);
  }
  return c;
}

inline LemmaRow finish_row(const LemmaProbe& p, std::vector<double> eps, std::vector<double> C) {
  LemmaRow row{p.name, p.kind, p.drift_limit, std::move(eps), std::move(C)};
  const double c0 = row.constant.front();
  row.drift = 1;
  bool finite = true;
  for (double c : row.constant) {
    finite = finite && std::isfinite(c);
    if (c0 > 0) row.drift = std::max(row.drift, c / c0);
    else if (c > 0) row.drift = kInf;
  }
  if (row.kind == LemmaKind::exact) {
    row.pass = finite;
    for (double c : row.constant) row.pass = row.pass && c <= 1 + 1e-12;
  } else {
    row.pass = finite && c0 > 0 && row.drift <= row.drift_limit;
  }
  return row;
}

// Measures every probe on the seeded band-limited ensemble at each level.
// Constants are calibrated at the first (coarsest) level.
inline LemmaReport run_lemma_suite(const LemmaSuiteOptions& o, const std::vector<LemmaProbe>& probes) {
  require(!o.levels.empty() && o.ensemble > 0, "lemma suite: need at least one level and one member");
  LemmaReport rep;
  std::vector<std::vector<double>> C(probes.size());
  std::vector<double> eps;
  for (int N : o.levels) {
    Lattice lat = make_lattice(N, o.M);
    auto part = build_partition(lat, o.J);
    eps.push_back(lat.spacing());
    auto fine = build_partition(make_lattice(N + 1, o.M), o.J);
    // per-member ratios; members are independent, merged in member order
    std::vector<std::vector<std::vector<double>>> out(std::size_t(o.ensemble));
    auto work = [&](int m) {
      auto member = [&](int k) { return band_limited_field(lat, o.cutoff, o.decay, o.seed, 3 * std::uint64_t(m) + k); };
      LemmaSample s(part, o.weight, {member(0), member(1), member(2)}, &fine);
      for (const auto& p : probes) out[std::size_t(m)].push_back(p.ratios(s));
    };
    parallel_for(o.ensemble, o.threads, work);
    for (std::size_t p = 0; p < probes.size(); ++p) {
      std::vector<double> ratios;
      for (const auto& mo : out) ratios.insert(ratios.end(), mo[p].begin(), mo[p].end());
      C[p].push_back(lemma_constant(probes[p].kind, ratios));
    }
    rep.identities.emplace_back(lat.spacing(), identity_suite(part, o.seed));
  }
  for (std::size_t p = 0; p < probes.size(); ++p) rep.rows.push_back(finish_row(probes[p], eps, C[p]));
  return rep;
}

inline LemmaReport run_lemma_suite(const LemmaSuiteOptions& o = {}) {
  return run_lemma_suite(o, standard_lemma_probes(o.m2));
}

}  // namespace phi4
