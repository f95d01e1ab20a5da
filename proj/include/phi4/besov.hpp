#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "operators.hpp"

namespace phi4 {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {
// smooth step: 0 for t <= 0, 1 for t >= 1, built from e^{-1/t}
inline double smooth_step(double t) {
  if (t <= 0) return 0;
  if (t >= 1) return 1;
  double a = std::exp(-1 / t), b = std::exp(-1 / (1 - t));
  return a / (a + b);
}
}  // namespace detail

// chi(r) = 1 for r <= 1/2 - 1/16, 0 for r >= 1/2
inline double dyadic_chi(double r) {
  constexpr double lo = 0.5 - 1.0 / 16, hi = 0.5;
  return detail::smooth_step((hi - r) / (hi - lo));
}
inline double dyadic_phi0(double r) { return dyadic_chi(r / 2) - dyadic_chi(r); }

// Outer support radius of phi_0, measured by scanning the profile.
inline double phi0_support_radius() {
  double R = 0;
  for (int i = 1; i <= 40000; ++i) {
    double r = i * 1e-4;
    if (dyadic_phi0(r) > 0) R = r;
  }
  return R;
}

// J_eps: first block index whose support leaves the mode cube. N for this profile.
inline int support_level(const Lattice& lat) {
  // phi_j is nonzero only for |k| < 2^j; the cube reaches 2^(N-1) per axis
  int N = lat.level();
  int j = 0;
  while (std::ldexp(1.0, j) <= std::ldexp(1.0, N - 1) * (1 + 1e-12)) ++j;
  return j;
}

// Smallest J with c2 2^(-J-1) < 1, c2 = 2 pi sqrt(3) R, clamped to the lattice (J <= N).
inline int default_partition_offset(const Lattice& lat) {
  double c2 = 2 * std::numbers::pi * std::sqrt(3.0) * phi0_support_radius();
  int J = 0;
  while (c2 * std::ldexp(1.0, -J - 1) >= 1) ++J;
  return std::min(J, lat.level());
}

class DyadicPartition {
 public:
  DyadicPartition() = default;
  DyadicPartition(const Lattice& lat, int J) : lat_(lat), J_(J) {
    int N = lat.level();
    int top = N - J;
    require(J >= 0 && top >= 0 && top <= support_level(lat),
            "partition: J must satisfy 0 <= N - J <= J_eps");
    mult_.assign(top + 2, ModeFunction(lat.volume(), 0.0));
    maxq_.assign(top + 2, 0);
    for (std::size_t i = 0; i < lat.volume(); ++i) {
      auto k = lat.frequency(i);
      double r = std::sqrt(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
      double acc = 0;
      for (int j = -1; j < top; ++j) {
        double v = j < 0 ? dyadic_chi(r) : dyadic_phi0(std::ldexp(r, -j));
        mult_[j + 1][i] = v;
        acc += v;
      }
      mult_[top + 1][i] = 1 - acc;
    }
    for (int j = -1; j <= top; ++j)
      for (std::size_t i = 0; i < lat.volume(); ++i)
        if (mult_[j + 1][i] != 0) {
          auto c = lat.coords(i);
          for (int d = 0; d < 3; ++d) maxq_[j + 1] = std::max(maxq_[j + 1], std::abs(lat.centered(c[d])));
        }
  }

  const Lattice& lattice() const { return lat_; }
  int J() const { return J_; }
  int jmin() const { return -1; }
  int jmax() const { return lat_.level() - J_; }
  int count() const { return jmax() + 2; }
  const ModeFunction& block(int j) const {
    check(j);
    return mult_[j + 1];
  }
  // largest |q_i| (integer mode coordinate) where block j is nonzero
  int max_mode(int j) const {
    check(j);
    return maxq_[j + 1];
  }
  // sum of blocks j <= K
  ModeFunction low_pass(int K) const {
    ModeFunction m(lat_.volume(), 0.0);
    for (int j = -1; j <= std::min(K, jmax()); ++j)
      for (std::size_t i = 0; i < m.size(); ++i) m[i] += mult_[j + 1][i];
    return m;
  }

 private:
  void check(int j) const {
    if (j < -1 || j > jmax()) throw ConstraintError("partition: block index out of range");
  }
  Lattice lat_;
  int J_ = 0;
  std::vector<ModeFunction> mult_;
  std::vector<int> maxq_;
};

inline DyadicPartition build_partition(const Lattice& lat, int J) { return DyadicPartition(lat, J); }
inline DyadicPartition build_partition(const Lattice& lat) {
  return DyadicPartition(lat, default_partition_offset(lat));
}

inline Field lp_block(const DyadicPartition& part, const Field& f, int j) {
  check_same(part.lattice(), f.lattice());
  return apply_multiplier(f, part.block(j));
}

// Blocks -1..jmax, entry j+1 holds Delta_j f.
inline std::vector<Field> lp_all(const DyadicPartition& part, const Field& f) {
  check_same(part.lattice(), f.lattice());
  Spectrum s = forward_fourier(f);
  std::vector<Field> out;
  out.reserve(part.count());
  for (int j = part.jmin(); j <= part.jmax(); ++j) {
    Spectrum b = s;
    b *= part.block(j);
    out.push_back(inverse_fourier(b));
  }
  return out;
}

struct BesovParams {
  double alpha = 0;
  double p = 2;  // kInf for the sup norm
  double q = 2;
  Weight weight{};
  double power = 0;  // norm uses rho^power
};

inline BesovParams holder(double alpha, Weight w = {}, double power = 0) {
  return {alpha, kInf, kInf, w, power};
}
inline BesovParams sobolev(double alpha, Weight w = {}, double power = 0) {
  return {alpha, 2, 2, w, power};
}

// Norm from precomputed blocks and weight field.
inline double besov_norm_blocks(const std::vector<Field>& blocks, const Field& rho, const BesovParams& bp) {
  double acc = 0;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    int j = int(b) - 1;
    double v = lp_norm(rho * blocks[b], bp.p) * std::exp2(bp.alpha * j);
    if (std::isinf(bp.q))
      acc = std::max(acc, v);
    else
      acc += std::pow(v, bp.q);
  }
  return std::isinf(bp.q) ? acc : std::pow(acc, 1 / bp.q);
}

inline double besov_norm(const DyadicPartition& part, const Field& f, const BesovParams& bp) {
  require(bp.p >= 1 && bp.q >= 1, "besov: exponents must lie in [1, inf]");
  Field rho = weight_field(f.lattice(), bp.weight, bp.power);
  return besov_norm_blocks(lp_all(part, f), rho, bp);
}

// ----- paraproducts -----

inline Field prec_blocks(const std::vector<Field>& F, const std::vector<Field>& G) {
  const Lattice& lat = F.front().lattice();
  Field low(lat), out(lat);
  for (std::size_t b = 0; b < G.size(); ++b) {
    // low = S_{j-2} f = sum_{i <= j-2} Delta_i f, with j = b - 1
    if (b >= 2) low += F[b - 2];
    if (b >= 2) out += low * G[b];
  }
  return out;
}

inline Field resonant_blocks(const std::vector<Field>& F, const std::vector<Field>& G) {
  const Lattice& lat = F.front().lattice();
  Field out(lat);
  const long nb = long(G.size());
  for (long j = 0; j < nb; ++j) {
    Field near(lat);
    for (long i = std::max(0L, j - 1); i <= std::min(nb - 1, j + 1); ++i) near += F[i];
    out += near * G[j];
  }
  return out;
}

inline Field paraproduct_prec(const DyadicPartition& part, const Field& f, const Field& g) {
  return prec_blocks(lp_all(part, f), lp_all(part, g));
}
inline Field paraproduct_succ(const DyadicPartition& part, const Field& f, const Field& g) {
  return paraproduct_prec(part, g, f);
}
inline Field resonant(const DyadicPartition& part, const Field& f, const Field& g) {
  return resonant_blocks(lp_all(part, f), lp_all(part, g));
}

// ----- commutators -----

// C(f,g,h) = h o (f < g) - f (h o g)
inline Field commutator_C(const DyadicPartition& part, const Field& f, const Field& g, const Field& h) {
  return resonant(part, h, paraproduct_prec(part, f, g)) - f * resonant(part, h, g);
}

// D(rho,f,g,h) = <rho f, g o h> - <rho (f < g), h>
inline double duality_defect_D(const DyadicPartition& part, const Field& rho, const Field& f,
                               const Field& g, const Field& h) {
  return duality_product(rho * f, resonant(part, g, h)) -
         duality_product(rho * paraproduct_prec(part, f, g), h);
}

// C~(f,g,h) = h o Q^-1(f < g) - f (h o Q^-1 g)
inline Field commutator_tilde(const DyadicPartition& part, const HeatOperator& op, const Field& f,
                              const Field& g, const Field& h) {
  return resonant(part, h, q_inverse(op, paraproduct_prec(part, f, g))) -
         f * resonant(part, h, q_inverse(op, g));
}

// C-bar(f,g,h) = h o L^-1(f < g) - f (h o L^-1 g), L^-1 started from zero.
inline Trajectory commutator_bar(const DyadicPartition& part, const HeatOperator& op, const Trajectory& f,
                                 const Trajectory& g, const Trajectory& h) {
  check_same_grid(f, g);
  check_same_grid(f, h);
  Trajectory fg = zip_slices(f, g, [&](const Field& a, const Field& b) { return paraproduct_prec(part, a, b); });
  Trajectory Lfg = l_inverse(op, fg);
  Trajectory Lg = l_inverse(op, g);
  Trajectory out;
  out.times = f.times;
  for (std::size_t n = 0; n < f.size(); ++n)
    out.slices.push_back(resonant(part, h.slices[n], Lfg.slices[n]) -
                         f.slices[n] * resonant(part, h.slices[n], Lg.slices[n]));
  return out;
}

// ----- time-mollified paraproduct -----

// Kernel Q(s) = 2(1-s) on [0,1]; Q_i f(t) = int 2^{2i} Q(2^{2i}(t-s)) f(max(s,t0)) ds,
// discretized on the uniform grid and renormalized to unit mass.
inline std::vector<double> time_kernel_weights(int i, double dt) {
  double width = std::exp2(-2.0 * i);
  int L = int(std::floor(width / dt + 1e-12));
  if (L < 1) return {1.0};
  std::vector<double> w(L + 1);
  double s = 0;
  for (int l = 0; l <= L; ++l) {
    double u = l * dt / width;
    w[l] = std::max(0.0, 2 * (1 - u)) * (l == 0 ? 0.5 : 1.0);
    s += w[l];
  }
  for (auto& x : w) x /= s;
  return w;
}

inline double uniform_step(const Trajectory& tr) {
  if (tr.size() < 2) return 1.0;
  double dt = tr.times[1] - tr.times[0];
  for (std::size_t n = 1; n + 1 < tr.size(); ++n)
    if (std::abs(tr.times[n + 1] - tr.times[n] - dt) > 1e-9 * dt)
      throw MismatchError("time-mollified paraproduct needs a uniform time grid");
  return dt;
}

// Causal convolution of slices with the given weights, clamping at the first slice.
inline Trajectory time_convolve(const Trajectory& f, const std::vector<double>& w) {
  Trajectory out;
  out.times = f.times;
  for (std::size_t n = 0; n < f.size(); ++n) {
    Field acc(f.lattice());
    for (std::size_t l = 0; l < w.size(); ++l) {
      std::size_t m = n >= l ? n - l : 0;
      acc.axpy(w[l], f.slices[m]);
    }
    out.slices.push_back(std::move(acc));
  }
  return out;
}

// f << g = sum_{i < j-1} (Q_i Delta_i f) Delta_j g
inline Trajectory paraproduct_prec_mollified(const DyadicPartition& part, const Trajectory& f,
                                             const Trajectory& g) {
  check_same_grid(f, g);
  double dt = uniform_step(f);
  const int nb = part.count();
  // blocks of f per time, then mollify each block series in time
  std::vector<Trajectory> fb(nb);
  for (int b = 0; b < nb; ++b) fb[b].times = f.times;
  for (const auto& s : f.slices) {
    auto bl = lp_all(part, s);
    for (int b = 0; b < nb; ++b) fb[b].slices.push_back(std::move(bl[b]));
  }
  for (int b = 0; b < nb; ++b) fb[b] = time_convolve(fb[b], time_kernel_weights(b - 1, dt));
  Trajectory out;
  out.times = f.times;
  for (std::size_t n = 0; n < f.size(); ++n) {
    std::vector<Field> F(nb, Field(part.lattice()));
    for (int b = 0; b < nb; ++b) F[b] = fb[b].slices[n];
    out.slices.push_back(prec_blocks(F, lp_all(part, g.slices[n])));
  }
  return out;
}

// C-bar assembled from the four pieces of the mollified splitting:
// h o [L^-1(f<<g) - f<<L^-1 g] + h o L^-1(f<g - f<<g) + h o (f<<L^-1 g - f<L^-1 g) + C(f, L^-1 g, h)
inline Trajectory commutator_bar_split(const DyadicPartition& part, const HeatOperator& op,
                                       const Trajectory& f, const Trajectory& g, const Trajectory& h) {
  check_same_grid(f, g);
  check_same_grid(f, h);
  Trajectory fmg = paraproduct_prec_mollified(part, f, g);
  Trajectory fg = zip_slices(f, g, [&](const Field& a, const Field& b) { return paraproduct_prec(part, a, b); });
  Trajectory Lg = l_inverse(op, g);
  Trajectory L_fmg = l_inverse(op, fmg);
  Trajectory fm_Lg = paraproduct_prec_mollified(part, f, Lg);
  Trajectory L_diff = l_inverse(op, zip_slices(fg, fmg, [](const Field& a, const Field& b) { return a - b; }));
  Trajectory out;
  out.times = f.times;
  for (std::size_t n = 0; n < f.size(); ++n) {
    const Field& hn = h.slices[n];
    Field t1 = resonant(part, hn, L_fmg.slices[n] - fm_Lg.slices[n]);
    Field t2 = resonant(part, hn, L_diff.slices[n]);
    Field t3 = resonant(part, hn, fm_Lg.slices[n] - paraproduct_prec(part, f.slices[n], Lg.slices[n]));
    Field t4 = commutator_C(part, f.slices[n], Lg.slices[n], hn);
    out.slices.push_back(t1 + t2 + t3 + t4);
  }
  return out;
}

// ----- localizer -----

struct LocalizerExponents {
  double alpha, beta, gamma, a, b, c;
  double ratio() const {
    require(alpha < beta && beta < gamma && a < b && b < c,
            "localizer: need alpha < beta < gamma and a < b < c");
    double r1 = (b - a) / (beta - alpha), r2 = (c - b) / (gamma - beta);
    require(std::abs(r1 - r2) <= 1e-12 * std::max(std::abs(r1), std::abs(r2)) && r1 > 0,
            "localizer: inconsistent exponent ratios (b-a)/(beta-alpha) != (c-b)/(gamma-beta)");
    return r1;
  }
};

struct LocalizedPair {
  Field greater;  // U_> f
  Field lesser;   // U_<= f
};

namespace detail {

// Reconstruct a field band-limited to |q_i| < nsub/2 from its samples on the
// sublattice of the given stride.
inline Field reconstruct_from_samples(const Lattice& lat, int stride, const std::vector<double>& samples) {
  if (stride == 1) return Field(lat, samples);
  const int n = lat.n_side(), ns = n / stride;
  const std::size_t vs = std::size_t(ns) * ns * ns;
  std::vector<cplx> in(vs), S(vs);
  for (std::size_t i = 0; i < vs; ++i) in[i] = samples[i];
  dft_raw(ns, in.data(), S.data(), FFTW_FORWARD);
  std::vector<cplx> F(lat.volume(), 0.0), out(lat.volume());
  const double s3 = double(stride) * stride * stride;
  const double inv = 1.0 / double(lat.volume());
  for (int k = 0; k < n; ++k) {
    int qk = lat.centered(k);
    if (2 * std::abs(qk) >= ns) continue;
    for (int j = 0; j < n; ++j) {
      int qj = lat.centered(j);
      if (2 * std::abs(qj) >= ns) continue;
      for (int i = 0; i < n; ++i) {
        int qi = lat.centered(i);
        if (2 * std::abs(qi) >= ns) continue;
        std::size_t p = (std::size_t((qk + ns) % ns) * ns + std::size_t((qj + ns) % ns)) * ns +
                        std::size_t((qi + ns) % ns);
        F[lat.index(i, j, k)] = s3 * S[p];
      }
    }
  }
  dft_raw(n, F.data(), out.data(), FFTW_BACKWARD);
  Field f(lat);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = out[i].real() * inv;
  return f;
}

// Sample stride for block j: nominal 2^{N-j-J} sites, reduced until it
// divides n and the block is alias-free on the sublattice.
inline int localizer_stride(const DyadicPartition& part, int j) {
  const Lattice& lat = part.lattice();
  const int n = lat.n_side();
  int e = lat.level() - j - part.J();
  int s = e >= 0 ? (1 << e) : 1;
  while (s > 1 && (n % s != 0 || 2 * part.max_mode(j) >= n / s)) s /= 2;
  return s;
}

}  // namespace detail

// Splits f by thresholding the point-evaluation coefficients lambda_{j,m} =
// Delta_j f(2^{-j-J} m): coefficient goes to U_> when j > L + r c_k, with
// c_k = -log2 rho(2^k) and |m| ~ 2^k.
inline LocalizedPair localizer_split(const DyadicPartition& part, const Field& f, double L, const Weight& rho,
                                     const LocalizerExponents& ex) {
  check_same(part.lattice(), f.lattice());
  const double r = ex.ratio();
  const Lattice& lat = part.lattice();
  const int n = lat.n_side();
  auto blocks = lp_all(part, f);
  LocalizedPair out{Field(lat), Field(lat)};
  for (int j = part.jmin(); j <= part.jmax(); ++j) {
    const Field& bj = blocks[j + 1];
    int s = detail::localizer_stride(part, j);
    int ns = n / s;
    double nominal = std::exp2(-double(j) - part.J());  // physical spacing 2^{-j-J}
    std::vector<double> gt(std::size_t(ns) * ns * ns), le(gt.size());
    bool any_gt = false, any_le = false;
    for (int c = 0; c < ns; ++c)
      for (int b = 0; b < ns; ++b)
        for (int a = 0; a < ns; ++a) {
          std::size_t site = lat.index(a * s, b * s, c * s);
          auto x = lat.position(site);
          double m = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / nominal;
          int k = m < 1 ? 0 : int(std::floor(std::log2(m)));
          double ck = -std::log2(rho(std::exp2(double(k))));
          double Lk = L + r * ck;
          std::size_t p = (std::size_t(c) * ns + b) * ns + a;
          double v = bj[site];
          if (double(j) > Lk) {
            gt[p] = v;
            any_gt = any_gt || v != 0;
          } else {
            le[p] = v;
            any_le = any_le || v != 0;
          }
        }
    if (any_gt) out.greater += detail::reconstruct_from_samples(lat, s, gt);
    if (any_le) out.lesser += detail::reconstruct_from_samples(lat, s, le);
  }
  return out;
}

// ----- extension -----

// w(z) = exp(1 - 1/(1 - 4|z|^2)) on |z| < 1/2; w(0) = 1 so the lattice sum eps^3 sum_y w^eps(y) = 1.
inline double mollifier(double r) {
  if (r >= 0.5) return 0;
  return std::exp(1 - 1 / (1 - 4 * r * r));
}

// (E f)(x) = eps^3 sum_y w^eps(x - y) f(y), periodic.
class Extension {
 public:
  explicit Extension(Field f) : f_(std::move(f)) {}

  double operator()(const std::array<double, 3>& x) const {
    const Lattice& lat = f_.lattice();
    const double eps = lat.spacing(), M = lat.side();
    int base[3];
    for (int d = 0; d < 3; ++d) base[d] = int(std::floor(x[d] / eps));
    double s = 0;
    for (int dk = 0; dk <= 1; ++dk)
      for (int dj = 0; dj <= 1; ++dj)
        for (int di = 0; di <= 1; ++di) {
          int idx[3] = {base[0] + di, base[1] + dj, base[2] + dk};
          double r2 = 0;
          for (int d = 0; d < 3; ++d) {
            double z = x[d] - idx[d] * eps;
            z -= M * std::round(z / M);
            r2 += z * z;
          }
          double w = mollifier(std::sqrt(r2) / eps);
          if (w != 0) s += w * f_[lat.index(idx[0], idx[1], idx[2])];
        }
    return s;
  }

  // sample on the lattice refined by 2^levels
  Field materialize(int levels = 1) const {
    const Lattice& lat = f_.lattice();
    Lattice fine = Lattice::make(lat.level() + levels, lat.side());
    Field g(fine);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (*this)(fine.position(i));
    return g;
  }

 private:
  Field f_;
};

inline Extension extension(const Field& f) { return Extension(f); }

// ----- time-Hölder / sup norms of trajectories -----

inline double sup_in_time(const DyadicPartition& part, const Trajectory& tr, const BesovParams& bp) {
  if (tr.size() == 0) return 0;
  Field rho = weight_field(tr.lattice(), bp.weight, bp.power);
  double m = 0;
  for (const auto& s : tr.slices) m = std::max(m, besov_norm_blocks(lp_all(part, s), rho, bp));
  return m;
}

// sup_{s != t} ||rho (f(t) - f(s))||_inf / |t - s|^theta
inline double holder_in_time(const Trajectory& tr, double theta, const Weight& w, double power) {
  if (tr.size() < 2) return 0;
  Field rho = weight_field(tr.lattice(), w, power);
  std::vector<Field> ws;
  for (const auto& s : tr.slices) ws.push_back(rho * s);
  double m = 0;
  for (std::size_t a = 0; a < ws.size(); ++a)
    for (std::size_t b = a + 1; b < ws.size(); ++b) {
      double d = 0;
      for (std::size_t i = 0; i < ws[a].size(); ++i) d = std::max(d, std::abs(ws[a][i] - ws[b][i]));
      m = std::max(m, d / std::pow(tr.times[b] - tr.times[a], theta));
    }
  return m;
}

}  // namespace phi4
