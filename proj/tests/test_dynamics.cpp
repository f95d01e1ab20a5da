#include <gtest/gtest.h>

#include <phi4/dynamics.hpp>
#include <phi4/random_fields.hpp>
#include <phi4/stats.hpp>

using namespace phi4;

namespace {

double site_mean(const Field& f) { return mean(f.values()); }

// E[phi^2] and E[phi^4] site averages along one chain, sampled every `every` steps after burn-in
std::pair<ObservableEstimate, ObservableEstimate> langevin_moments(const Model& m, std::uint64_t seed, double dt,
                                                                   double T_burn, double T, std::size_t every) {
  Langevin L(m, CounterRng(seed));
  L.init_stationary();
  std::size_t nb = std::size_t(T_burn / dt), n = std::size_t(T / dt);
  for (std::size_t k = 0; k < nb; ++k) L.step(dt);
  std::vector<double> p2, p4;
  for (std::size_t k = 0; k < n; ++k) {
    L.step(dt);
    if (k % every == 0) {
      Field f = L.phi();
      Field f2 = f * f;
      p2.push_back(site_mean(f2));
      p4.push_back(site_mean(f2 * f2));
    }
  }
  return {batch_means(p2), batch_means(p4)};
}

}  // namespace

TEST(Model, CountertermAndDrift) {
  auto lat = make_lattice(2, 1);
  Model m(lat, {1.0, 0.5});
  EXPECT_DOUBLE_EQ(m.counterterm(), -1.5 * m.a() + 0.75 * m.b());
  Field f = Field::from_function(lat, [](auto x) { return x[0] - x[1] * x[2]; });
  Field d = m.drift(f);
  for (std::size_t i = 0; i < f.size(); ++i)
    EXPECT_NEAR(d[i], -0.5 * std::pow(f[i], 3) - m.counterterm() * f[i], 1e-14);
  Model neg(lat, {-0.5, 1.0});
  EXPECT_EQ(neg.op().m2(), 1.0);
  EXPECT_DOUBLE_EQ(neg.linear_drift(), neg.counterterm() - 1.5);
  EXPECT_THROW(Model(lat, {1.0, -1.0}), ConstraintError);
}

TEST(Langevin, FreeCaseIsExactOu) {
  auto lat = make_lattice(2, 1);
  Model m(lat, {1.0, 0.0});
  Langevin L(m, CounterRng(3));
  L.init_stationary();
  OuSampler ou(m.op(), CounterRng(3));
  Spectrum X = ou.stationary_spectrum(0);
  for (int n = 1; n <= 50; ++n) {
    L.step(0.01);
    ou.advance(X, 0.01, std::uint64_t(n));
  }
  EXPECT_EQ(L.phi().values(), inverse_fourier(X).values());
  EXPECT_EQ(L.v().sup_abs(), 0.0);
}

TEST(Langevin, PlaneWaveDecay) {
  auto lat = make_lattice(2, 1);
  Model m(lat, {0.8, 0.0});
  LangevinOptions o;
  o.noise = false;
  Langevin L(m, CounterRng(1), o);
  std::size_t idx = lat.index(1, 2, 0);
  Field pw = Field::from_function(lat, [](auto x) { return std::cos(2 * M_PI * (x[0] + 2 * x[1])); });
  L.init(pw);
  const double dt = 0.003;
  for (int n = 0; n < 10; ++n) L.step(dt);
  double q = 0.8 + lat.laplace_symbol(idx);
  Field expect = std::exp(-q * 10 * dt) * pw;
  EXPECT_LT((L.phi() - expect).sup_abs(), 1e-8);
  EXPECT_GT(expect.sup_abs(), 1e-8);
}

TEST(Langevin, FreeVarianceAndKurtosis) {
  auto lat = make_lattice(1, 2);
  Model m(lat, {1.0, 0.0});
  auto [p2, p4] = langevin_moments(m, 17, 0.05, 2, 4000, 4);
  double a = m.a();
  EXPECT_LT(std::abs(p2.z(a)), 3) << p2.value << " vs " << a;
  EXPECT_LT(std::abs(p4.z(3 * a * a)), 3) << p4.value << " vs " << 3 * a * a;
}

TEST(Langevin, TimeStepRefinement) {
  // coarse chain driven by the fine chain's Brownian path (common random numbers)
  auto lat = make_lattice(3, 1);
  Model m(lat, {1.0, 1.0});
  const double dt = 2e-3;
  Langevin fine(m, CounterRng(21)), coarse(m, CounterRng(21));
  fine.init_stationary();
  coarse.init_stationary();
  std::vector<double> pf, pc;
  const std::size_t burn = 1000, n = 60000;
  for (std::size_t k = 0; k < burn + n; ++k) {
    fine.step(dt / 2);
    fine.step(dt / 2);
    coarse.step_to(dt, fine.X_spectrum());
    if (k >= burn && k % 10 == 0) {
      Field f = fine.phi(), c = coarse.phi();
      pf.push_back(site_mean(f * f));
      pc.push_back(site_mean(c * c));
    }
  }
  auto ef = batch_means(pf), ec = batch_means(pc);
  double se = std::hypot(ef.stderr_, ec.stderr_);
  EXPECT_LT(std::abs(ef.value - ec.value), se) << ef.value << " " << ec.value << " se " << se;
  EXPECT_EQ(fine.X().values(), coarse.X().values());
  RecordProperty("diff", std::to_string(ef.value - ec.value) + " se " + std::to_string(se));
}

TEST(Langevin, AbortsOnBlowUp) {
  auto lat = make_lattice(1, 2);
  Model m(lat, {1.0, 50.0});
  LangevinOptions o;
  o.guard = 1e300;
  o.noise = false;
  Langevin L(m, CounterRng(1), o);
  L.init(Field(lat, 10.0));
  EXPECT_THROW(
      {
        for (int n = 0; n < 100; ++n) L.step(0.1);
      },
      NumericalAbort);
  EXPECT_THROW(L.step(0.0), ConstraintError);
}

TEST(Langevin, GuardSubsteps) {
  auto lat = make_lattice(1, 2);
  Model m(lat, {1.0, 5.0});
  LangevinOptions o;
  o.noise = false;
  Langevin L(m, CounterRng(1), o);
  L.init(Field(lat, 3.0));
  for (int n = 0; n < 20; ++n) L.step(0.05);
  EXPECT_GT(L.substeps(), 0u);
  EXPECT_TRUE(L.phi().finite());
  EXPECT_LT(L.phi().sup_abs(), 3.0);
}

namespace {

struct YFixture {
  Lattice lat = make_lattice(3, 1);
  Model m{lat, {1.0, 1.0}, 1};
  double dt = 2e-3;
  StochasticBasket B;
  YFixture() {
    auto X = sample_stationary_X(m.op(), uniform_grid(0, dt, 600), CounterRng(31));
    auto rc = renorm_constants(m.op(), m.partition(), 0.3);
    B = build_trees(X, 500, m.op(), m.partition(), rc, 1.0);
  }
};

}  // namespace

TEST(SolveY, FreeCase) {
  YFixture fx;
  auto r = solve_Y(fx.B, fx.m.op(), fx.m.partition(), 0.0);
  EXPECT_EQ(r.iterations, 1);
  for (const auto& s : r.Y.slices) EXPECT_EQ(s.sup_abs(), 0.0);
}

TEST(SolveY, DefaultConstantContracts) {
  YFixture fx;
  auto r = solve_Y(fx.B, fx.m.op(), fx.m.partition(), 1.0);
  EXPECT_LT(r.contraction, 1.0);
  EXPECT_LT(r.residual, 1e-6);
  EXPECT_GE(r.L, 4.0);
}

TEST(SolveY, SmallConstantExercisesLocalizer) {
  YFixture fx;
  YOptions o;
  o.C_delta = 0.05;
  auto r = solve_Y(fx.B, fx.m.op(), fx.m.partition(), 1.0, o);
  EXPECT_LT(r.L, 0.0);
  EXPECT_GT(r.iterations, 2);
  EXPECT_LT(r.residual, 1e-6);
  // the fixed point differs from the leading term once U_> is nonzero
  double dev = 0;
  for (std::size_t n = 0; n < r.Y.size(); ++n)
    dev = std::max(dev, (r.Y.slices[n] + fx.B.X31.slices[n]).sup_abs());
  EXPECT_GT(dev, 0.0);
  EXPECT_THROW(solve_Y(fx.B, fx.m.op(), fx.m.partition(), 1.0, YOptions{1.5}), ConstraintError);
}

TEST(SolveY, StreamingMatchesPicard) {
  auto lat = make_lattice(2, 1);
  Model m(lat, {1.0, 1.0}, 1);
  PathwiseOptions po;
  po.dt = 2e-3;
  po.T_burn = 0.4;
  po.L = -1.0;
  PathwiseRun run(m, CounterRng(8), po);
  // the X slices the run sees, rebuilt through build_trees
  Langevin ref(m, CounterRng(8));
  ref.init_stationary();
  Trajectory X;
  X.push(0, ref.X());
  const std::size_t nb = 200, nw = 60;
  for (std::size_t n = 1; n <= nb + nw; ++n) {
    ref.step(po.dt);
    X.push(double(n) * po.dt, ref.X());
  }
  auto rc = renorm_constants(m.op(), m.partition(), 1.0);
  auto B = build_trees(X, nb, m.op(), m.partition(), rc, 0.0);
  std::vector<Field> Ys{run.state().Y};
  for (std::size_t n = 0; n < nw; ++n) {
    run.step();
    Ys.push_back(run.state().Y);
  }
  // Picard with the same L reproduces the streaming Y
  auto ex = y_localizer_exponents(0.05, 0.1);
  Trajectory U = map_slices(B.X2, [&](const Field& f) { return localizer_split(m.partition(), f, -1.0, Weight{1, 3}, ex).greater; });
  Trajectory Y = map_slices(B.X31, [](const Field& f) { return -1.0 * f; });
  for (int it = 0; it < 80; ++it) {
    Trajectory src = zip_slices(U, Y, [&](const Field& u, const Field& y) { return 3.0 * paraproduct_succ(m.partition(), u, y); });
    Trajectory I = l_inverse(m.op(), src);
    for (std::size_t n = 0; n < Y.size(); ++n) Y.slices[n] = -1.0 * B.X31.slices[n] - I.slices[n];
  }
  for (std::size_t n = 0; n <= nw; ++n) {
    EXPECT_LT((Ys[n] - Y.slices[n]).sup_abs(), 1e-9 * (1 + Y.slices[n].sup_abs())) << n;
    EXPECT_LT((run.state().X21 - B.X21.slices.back()).sup_abs(), 1e-9);
  }
  const auto& s = run.state();
  EXPECT_LT((s.phi - (s.X + s.Y + s.phi_rem)).sup_abs(), 1e-12 * (1 + s.phi.sup_abs()));
}

TEST(Remainders, FreeCaseAndDefinitions) {
  auto lat = make_lattice(2, 1);
  Model m(lat, {1.0, 0.0}, 1);
  auto f = [&](int s) { return band_limited_field(lat, 1, 1.0, 4, std::uint64_t(s)); };
  Field phi = f(0), X = f(1), Y = f(2), X2 = f(3), X21 = f(4), X31 = f(5);
  auto r0 = remainder_fields(m.partition(), m.op(), 0.0, phi, X, Y, X2, X21, X31);
  EXPECT_EQ(r0.psi.values(), r0.phi_rem.values());
  EXPECT_EQ(r0.chi.values(), r0.phi_rem.values());
  EXPECT_EQ(r0.zeta.values(), (phi - X).values());
  auto r1 = remainder_fields(m.partition(), m.op(), 0.7, phi, X, Y, X2, X21, X31);
  Field rem = phi - X - Y;
  EXPECT_LT((r1.psi - rem - q_inverse(m.op(), 2.1 * paraproduct_succ(m.partition(), X2, rem))).sup_abs(), 1e-12);
  EXPECT_LT((r1.chi - rem - 2.1 * paraproduct_succ(m.partition(), X21, rem)).sup_abs(), 1e-12);
  EXPECT_LT((r1.zeta - (phi - X + 0.7 * X31)).sup_abs(), 1e-12);
}

TEST(Energy, NoiseOffFreeCaseDecays) {
  auto lat = make_lattice(2, 1);
  Model m(lat, {1.0, 0.0}, 1);
  PathwiseOptions po;
  po.dt = 1e-3;
  po.T_burn = 0.01;
  po.langevin.noise = false;
  PathwiseRun run(m, CounterRng(1), po);
  // the noise-off run starts from phi = X = 0: seed a nonzero remainder instead
  Langevin L(m, CounterRng(1), po.langevin);
  L.init(band_limited_field(lat, 1, 1.0, 9, 0));
  std::vector<TrajectoryState> st;
  for (int n = 0; n < 40; ++n) {
    TrajectoryState s;
    s.t = n * po.dt;
    s.phi = L.phi();
    s.X = s.X2 = s.X21 = s.X31 = s.Y = Field(lat);
    s.phi_rem = s.phi;
    st.push_back(s);
    L.step(po.dt);
  }
  for (int n = 1; n + 1 < 40; ++n) {
    auto e = energy_report(m.partition(), m.op(), st[n - 1], st[n], st[n + 1], 1.0);
    EXPECT_EQ(e.quartic, 0.0);
    EXPECT_LT(e.half_ddt, 0.0);
    EXPECT_EQ(e.rhs, 0.0);
  }
  EXPECT_EQ(run.state().phi.sup_abs(), 0.0);
}

TEST(Energy, EntriesNonnegativeAndRatioBounded) {
  auto lat = make_lattice(2, 1);
  Model m(lat, {1.0, 1.0}, 1);
  PathwiseOptions po;
  po.dt = 2e-3;
  po.T_burn = 1;
  PathwiseRun run(m, CounterRng(5), po);
  MonitorOptions mo;
  mo.T = 2;
  mo.report_every = 25;
  auto rec = energy_monitor(run, mo);
  ASSERT_GT(rec.size(), 30u);
  for (const auto& e : rec) {
    EXPECT_GE(e.quartic, 0);
    EXPECT_GE(e.mass, 0);
    EXPECT_GE(e.grad, 0);
    EXPECT_GE(e.sobolev, 0);
    EXPECT_GT(e.rhs, 0);
    EXPECT_TRUE(std::isfinite(e.ratio));
  }
  EnergyParams bad;
  bad.weight.nu = 1;
  EXPECT_THROW(energy_report(m.partition(), m.op(), run.state(), run.state(), run.state(), 1.0, bad), ConstraintError);
}
