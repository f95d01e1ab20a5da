#include <gtest/gtest.h>

#include <phi4/observables.hpp>
#include <phi4/random_fields.hpp>

using namespace phi4;

namespace {

GibbsSpec free_spec(const Lattice& lat, double m2 = 1.0) { return gibbs_spec(Model(lat, {m2, 0.0})); }

const SampleSet& gaussian_8() {
  static SampleSet s = exact_gaussian_samples(free_spec(make_lattice(3, 1)), CounterRng(40), 4000);
  return s;
}

}  // namespace

TEST(Cylinder, ParseAndDerivatives) {
  auto lat = make_lattice(1, 2);
  Field f0 = bump(lat, {0.5, 0, 0}, 0.5), f1 = bump(lat, {0, 0.5, 0}, 0.5);
  auto F = Cylinder::parse("2*u0^2*u1 - 0.5*u1 + 1", {f0, f1});
  std::vector<double> u = {1.5, -2.0};
  EXPECT_DOUBLE_EQ(F.value(u), 2 * 2.25 * -2.0 + 1.0 + 1);
  EXPECT_DOUBLE_EQ(F.partial(0, u), 4 * 1.5 * -2.0);
  EXPECT_DOUBLE_EQ(F.partial(1, u), 2 * 2.25 - 0.5);
  // gradient against a finite difference of F(phi)
  Field phi = white_field(lat, 2, 0);
  std::size_t x = 9;
  Field p = phi;
  const double h = 1e-6;
  p[x] += h;
  double fd = (F(p) - F(phi)) / h / lat.cell();
  EXPECT_NEAR(F.gradient_at(F.pairings(phi), x), fd, 1e-4 * (1 + std::abs(fd)));
  EXPECT_THROW(Cylinder::parse("u", {f0}), ConstraintError);
  EXPECT_THROW(Cylinder::parse("u2", {f0}), ConstraintError);
  EXPECT_THROW(Cylinder::parse("3*x", {f0}), ConstraintError);
  EXPECT_EQ(Cylinder::parse("1", {}).value({}), 1.0);
}

TEST(TwoPoint, GaussianOracleParityAndPeak) {
  auto lat = make_lattice(3, 1);
  auto s = free_spec(lat);
  Field G = gaussian_two_point(s);
  std::vector<std::array<int, 3>> offs = {{0, 0, 0}, {1, 0, 0}, {-1, 0, 0}, {0, 2, 1}, {0, -2, -1}, {3, 1, 0}};
  auto est = schwinger_two_point(gaussian_8(), offs);
  for (std::size_t k = 0; k < offs.size(); ++k)
    EXPECT_LT(std::abs(est[k].z(G[lat.index(offs[k][0], offs[k][1], offs[k][2])])), 3) << est[k].label;
  EXPECT_LT(std::abs(est[1].value - est[2].value), 3 * std::hypot(est[1].stderr_, est[2].stderr_));
  EXPECT_LT(std::abs(est[3].value - est[4].value), 3 * std::hypot(est[3].stderr_, est[4].stderr_));
  for (std::size_t k = 1; k < offs.size(); ++k) EXPECT_GT(est[0].value, est[k].value);
}

TEST(FourPoint, GaussianNullAndEvenness) {
  auto lat = make_lattice(3, 1);
  auto part = build_partition(lat, 1);
  SampleSet neg;
  for (const auto& f : gaussian_8()) neg.push_back(-1.0 * f);
  for (int j = part.jmin(); j <= part.jmax(); ++j) {
    auto u = connected_four_point_smeared(gaussian_8(), part, j);
    EXPECT_LT(std::abs(u.z(0)), 3) << j << " " << u.value;
    auto un = connected_four_point_smeared(neg, part, j);
    EXPECT_EQ(u.value, un.value);
  }
  EXPECT_THROW(connected_four_point_smeared(gaussian_8(), part, part.jmax() + 1), ConstraintError);
}

TEST(ReflectionPositivity, TrivialAndGaussian) {
  auto lat = make_lattice(3, 1);
  auto r1 = rp_gram(gaussian_8(), {Field(lat)}, CounterRng(1), 50);
  EXPECT_NEAR(r1.gram(0, 0).real(), 1.0, 1e-15);
  EXPECT_NEAR(r1.min_eig, 1.0, 1e-12);
  std::vector<Field> f;
  for (int k = 0; k < 4; ++k)
    f.push_back(restrict_positive_half(bump(lat, {0.125 * (k + 1), 0.125 * k, 0}, 0.15, 1.5)));
  auto r = rp_gram(gaussian_8(), f, CounterRng(2), 1000);
  EXPECT_GE(r.min_eig, -3 * r.bootstrap_sigma) << r.min_eig << " " << r.bootstrap_sigma;
  EXPECT_GT(r.bootstrap_sigma, 0);
  EXPECT_TRUE(r.gram.isApprox(r.gram.adjoint()));
  EXPECT_THROW(rp_gram(gaussian_8(), {bump(lat, {0, 0, 0}, 0.1)}, CounterRng(1), 10), ConstraintError);
}

TEST(IntegrationByParts, GaussianClosedForm) {
  auto lat = make_lattice(2, 1);
  for (double gamma : {1.0, 0.96}) {
    auto s = gibbs_spec(Model(lat, {1.2, 0.0, gamma}));
    Field f = bump(lat, {0.25, 0, 0}, 0.2), g = bump(lat, {0, -0.25, 0.25}, 0.3);
    for (const char* poly : {"1", "u0", "u0^2", "u0*u1^3 - 2*u1^2 + u0"}) {
      auto F = Cylinder::parse(poly, {f, g});
      for (std::size_t x : {0ul, 3ul, 17ul, 40ul}) {
        double scale = 1 + std::abs(f[x]) + std::abs(g[x]);
        EXPECT_NEAR(ibp_gaussian_closed_form(s, F, x), 0.0, 1e-10 * scale) << poly << " " << x;
      }
    }
  }
}

TEST(IntegrationByParts, GaussianMonteCarlo) {
  auto lat = make_lattice(3, 1);
  auto s = free_spec(lat);
  Field f = bump(lat, {0.25, 0.125, 0}, 0.15);
  RngStream r(CounterRng(3), Purpose::ensemble);
  std::vector<std::size_t> sites;
  for (int k = 0; k < 20; ++k) sites.push_back(r.below(lat.volume()));
  int bad = 0;
  for (const char* poly : {"1", "u0", "u0^2"}) {
    auto res = ibp_residual(gaussian_8(), s, Cylinder::parse(poly, {f}), sites);
    for (const auto& e : res) bad += std::abs(e.z(0)) >= 3;
  }
  EXPECT_LE(bad, 3);
}

TEST(DysonSchwinger, ClosedFormAndMonteCarlo) {
  auto lat = make_lattice(3, 1);
  auto s = free_spec(lat);
  for (std::array<int, 3> r : {std::array<int, 3>{0, 0, 0}, {1, 0, 0}, {2, 3, 1}})
    EXPECT_NEAR(ds_gaussian_closed_form(s, r), 0.0, 1e-9 / lat.cell());
  for (std::array<int, 3> r : {std::array<int, 3>{0, 0, 0}, {1, 0, 0}, {4, 4, 4}}) {
    auto e = ds_two_point_residual(gaussian_8(), s, r);
    EXPECT_LT(std::abs(e.z(0)), 3) << e.label << " " << e.value;
  }
}

TEST(RenormalizedCube, ConstantsAndFreeNull) {
  auto lat = make_lattice(3, 1);
  HeatOperator op(lat, 1.0);
  auto part = build_partition(lat, 1);
  double prev = -1e300;
  for (int N = part.jmin(); N <= part.jmax(); ++N) {
    auto c = cube_constants(op, part, N, 1.0);
    // nondecreasing; levels that add no lattice modes leave it unchanged
    EXPECT_GE(c.c, prev) << N;
    prev = c.c;
    EXPECT_EQ(cube_constants(op, part, N, 0.0).c, 0.0);
  }
  EXPECT_GT(cube_constants(op, part, part.jmax(), 1.0).c, cube_constants(op, part, part.jmin(), 1.0).c);
  // the top level recovers the full variance
  EXPECT_NEAR(cube_constants(op, part, part.jmax(), 1.0).variance, compute_a(op), 1e-12);
  auto F = Cylinder::parse("1", {});
  SampleSet X = gaussian_8();
  auto est = renormalized_cube_ope(gaussian_8(), X, op, part, 0.0, {0, 1, 2}, F, point_mass(lat, 0));
  for (const auto& e : est) EXPECT_LT(std::abs(e.value.z(0)), 3) << e.N;
  EXPECT_THROW(renormalized_cube_ope(gaussian_8(), {}, op, part, 0.0, {0}, F, point_mass(lat, 0)), ConstraintError);
}

TEST(RenormalizedCube, MonteCarloConstantMatchesFourierSum) {
  auto lat = make_lattice(3, 1);
  HeatOperator op(lat, 1.0);
  auto part = build_partition(lat, 1);
  SampleSet X(gaussian_8().begin(), gaussian_8().begin() + 2000);
  auto est = renormalized_cube_ope(X, X, op, part, 1.0, {0, 2}, Cylinder::parse("1", {}), point_mass(lat, 0));
  for (const auto& e : est) EXPECT_LT(std::abs(e.c_mc.z(e.exact.c)), 3) << e.N << " " << e.c_mc.value << " " << e.exact.c;
}

TEST(ExpMoment, TrivialAndMonotone) {
  auto lat = make_lattice(3, 1);
  auto part = build_partition(lat);
  SampleSet s(gaussian_8().begin(), gaussian_8().begin() + 400);
  auto m0 = exp_moment(s, part, 0.0, 0.1, Weight{1, 3});
  EXPECT_EQ(m0.value.value, 1.0);
  EXPECT_EQ(m0.value.stderr_, 0.0);
  double last = 0;
  for (double beta : {0.01, 0.05, 0.2, 0.5}) {
    double v = exp_moment(s, part, beta, 0.1, Weight{1, 3}).value.value;
    EXPECT_GE(v, last);
    last = v;
  }
  EXPECT_TRUE(exp_moment(s, part, 0.05, 0.1, Weight{1, 3}).cauchy_stable);
}

TEST(TranslationInvariance, ZeroShiftAndGaussian) {
  auto lat = make_lattice(3, 1);
  Field f = bump(lat, {0.1, 0.2, -0.1}, 0.15);
  auto r = translation_invariance_residual(gaussian_8(), f, {{0, 0, 0}, {1, 0, 0}, {3, -2, 5}});
  EXPECT_EQ(r[0].value, 0.0);
  EXPECT_EQ(r[0].stderr_, 0.0);
  EXPECT_LT(std::abs(r[1].z(0)), 3);
  EXPECT_LT(std::abs(r[2].z(0)), 3);
}
