#include <gtest/gtest.h>

#include <phi4/fractional.hpp>
#include <phi4/observables.hpp>
#include <phi4/random_fields.hpp>

using namespace phi4;

namespace {

struct CaptureWarnings {
  std::vector<std::string> seen;
  WarningSink saved = warning_sink();
  CaptureWarnings() {
    warning_sink() = [this](const std::string& w) { seen.push_back(w); };
  }
  ~CaptureWarnings() { warning_sink() = saved; }
};

}  // namespace

TEST(FractionalMultiplier, Basics) {
  auto lat = make_lattice(2, 1);
  EXPECT_EQ(fractional_multiplier(lat, 1.0), laplace_symbol(lat));
  auto m = fractional_multiplier(lat, 0.7);
  EXPECT_EQ(m[0], 0.0);
  auto l = laplace_symbol(lat);
  for (std::size_t k = 0; k < l.size(); ++k) {
    if (l[k] <= 1) continue;
    EXPECT_LT(fractional_multiplier(lat, 0.9)[k], fractional_multiplier(lat, 0.95)[k]);
  }
  EXPECT_THROW(fractional_multiplier(lat, 0.0), ConstraintError);
  EXPECT_THROW(fractional_multiplier(lat, 1.2), ConstraintError);
}

TEST(FractionalGate, WarnsBelowThreshold) {
  CaptureWarnings w;
  EXPECT_FALSE(fractional_gate(1.0));
  EXPECT_FALSE(fractional_gate(0.96));
  EXPECT_TRUE(fractional_gate(0.9));
  EXPECT_TRUE(fractional_gate(21.0 / 22.0));
  EXPECT_EQ(w.seen.size(), 2u);
  EXPECT_THROW(fractional_gate(-0.1), ConstraintError);
  auto spec = make_fractional(make_lattice(1, 2), {1.0, 0.0, 0.8});
  EXPECT_TRUE(spec.uncovered);
}

TEST(FractionalBitCompat, GammaOneReproducesStandard) {
  auto lat = make_lattice(2, 1);
  auto part = build_partition(lat);
  EXPECT_EQ(fractional_compute_a(lat, 1.0, 1.0), compute_a(HeatOperator(lat, 1.0)));
  EXPECT_EQ(fractional_compute_b(lat, 1.0, 1.0, part), compute_b(HeatOperator(lat, 1.0), part));
  Field f = white_field(lat, 4, 0);
  auto fs = make_fractional(lat, {1.0, 1.0, 1.0});
  EXPECT_EQ(fractional_gibbs_log_density(fs, f), gibbs_log_density(gibbs_spec(Model(lat, {1.0, 1.0})), f));
  Model a = fractional_model(lat, {1.0, 1.0, 1.0}), b(lat, {1.0, 1.0});
  Langevin La(a, CounterRng(2)), Lb(b, CounterRng(2));
  La.init_stationary();
  Lb.init_stationary();
  for (int n = 0; n < 20; ++n) {
    fractional_langevin_step(La, 1e-3);
    Lb.step(1e-3);
  }
  EXPECT_EQ(La.phi().values(), Lb.phi().values());
}

TEST(FractionalCounterterms, AShrinksTowardGammaOne) {
  auto lat = make_lattice(3, 1);
  CaptureWarnings w;
  double prev = 1e300;
  for (double g : {0.8, 0.9, 0.96, 1.0}) {
    double a = fractional_compute_a(lat, 1.0, g);
    EXPECT_LT(a, prev) << g;
    prev = a;
  }
}

TEST(FractionalSampler, MetropolisMatchesExactGaussian) {
  auto lat = make_lattice(1, 2);
  auto fs = make_fractional(lat, {1.0, 0.0, 0.96});
  MetropolisChain c(fs.gibbs, Field(lat), CounterRng(7));
  c.tune(300);
  std::vector<double> p2;
  for (int k = 0; k < 30000; ++k) {
    c.sweep();
    p2.push_back(mean((c.phi() * c.phi()).values()));
  }
  auto e = batch_means(p2);
  double a = compute_a(HeatOperator(lat, 1.0, 0.96));
  EXPECT_LT(std::abs(e.z(a)), 3) << e.value << " vs " << a;
}
