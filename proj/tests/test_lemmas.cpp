#include <gtest/gtest.h>

#include <chrono>
#include <sstream>

#include <phi4/lemma_suite.hpp>

using namespace phi4;

namespace {

const LemmaProbe& probe(const std::vector<LemmaProbe>& P, const std::string& name) {
  for (const auto& p : P)
    if (p.name == name) return p;
  throw std::runtime_error("no probe " + name);
}

// a single real mode q (and -q) on the lattice
Field cosine_mode(const Lattice& lat, std::array<int, 3> q) {
  return Field::from_function(lat, [&](auto x) {
    return std::cos(2 * M_PI * (q[0] * x[0] + q[1] * x[1] + q[2] * x[2]) / lat.side());
  });
}

}  // namespace

TEST(IdentitySuite, MachinePrecisionAndFast) {
  auto lat = make_lattice(3, 1);
  auto part = build_partition(lat);
  auto t0 = std::chrono::steady_clock::now();
  auto rows = identity_suite(part, 5);
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_LT(secs, 1.0);
  ASSERT_EQ(rows.size(), 8u);
  for (const auto& r : rows) EXPECT_TRUE(r.pass()) << r.name << " " << r.error;
}

TEST(LatticeConvolution, MatchesDirectSum) {
  auto lat = make_lattice(1, 2);
  Field f = white_field(lat, 1, 0), g = white_field(lat, 1, 1);
  Field c = lattice_convolution(f, g);
  const int n = lat.n_side();
  for (std::size_t x = 0; x < lat.volume(); x += 5) {
    auto cx = lat.coords(x);
    double s = 0;
    for (std::size_t y = 0; y < lat.volume(); ++y) {
      auto cy = lat.coords(y);
      s += f[lat.index((cx[0] - cy[0] + n) % n, (cx[1] - cy[1] + n) % n, (cx[2] - cy[2] + n) % n)] * g[y];
    }
    EXPECT_NEAR(c[x], lat.cell() * s, 1e-12);
  }
}

TEST(LemmaProbes, FlatWeightOracles) {
  auto lat = make_lattice(4, 1);
  auto part = build_partition(lat, 1);
  auto P = standard_lemma_probes();
  // q = (2,0,0): |k| = 2 sits inside a single block
  Field m = cosine_mode(lat, {2, 0, 0});
  int owner = -2;
  for (int j = part.jmin(); j <= part.jmax(); ++j)
    if (part.block(j)[lat.index(2, 0, 0)] == 1.0) owner = j;
  ASSERT_NE(owner, -2);
  LemmaSample flat(part, Weight{1, 0}, {m, m, band_limited_field(lat, 3, 1, 4, 0)});
  EXPECT_NEAR(probe(P, "norm_equivalence[a=0.5,p=2,q=2]").ratios(flat)[0], 1.0, 1e-12);
  EXPECT_NEAR(probe(P, "embedding_l2").ratios(flat)[0], 1.0, 1e-12);
  EXPECT_NEAR(probe(P, "duality[a=0.5,p=2,q=2]").ratios(flat)[0], 1.0, 1e-12);

  // unweighted Young with p = 1 has constant 1
  LemmaSample rnd(part, Weight{1, 0}, {band_limited_field(lat, 3, 1, 5, 0), band_limited_field(lat, 3, 1, 5, 1),
                                       band_limited_field(lat, 3, 1, 5, 2)});
  EXPECT_LE(probe(P, "young[p=1,q=2,r=2]").ratios(rnd)[0], 1 + 1e-12);
  EXPECT_LE(probe(P, "young[p=1,q=4,r=4]").ratios(rnd)[0], 1 + 1e-12);
  // weight equivalence is trivial without a weight
  for (const char* n : {"norm_equivalence[a=-0.5,p=inf,q=inf]", "norm_equivalence[a=1,p=1,q=1]"})
    EXPECT_NEAR(probe(P, n).ratios(rnd)[0], 1.0, 1e-12) << n;
}

TEST(LemmaProbes, ExactSuitesHoldOnEveryField) {
  auto P = standard_lemma_probes();
  for (int N : {3, 4}) {
    auto lat = make_lattice(N, 1);
    auto part = build_partition(lat, 1);
    for (int m = 0; m < 5; ++m) {
      LemmaSample s(part, Weight{4, 2},
                    {white_field(lat, 6, 3 * m), white_field(lat, 6, 3 * m + 1), white_field(lat, 6, 3 * m + 2)});
      for (double r : probe(P, "interpolation").ratios(s)) EXPECT_LE(r, 1 + 1e-12);
      for (double r : probe(P, "weighted_hoelder").ratios(s)) EXPECT_LE(r, 1 + 1e-12);
    }
  }
}

TEST(LemmaProbes, HeatDecayIsFiniteAndPositive) {
  auto lat = make_lattice(3, 1);
  auto part = build_partition(lat, 1);
  auto P = standard_lemma_probes();
  Field f = band_limited_field(lat, 3, 1, 7, 0), g = band_limited_field(lat, 3, 1, 7, 1);
  LemmaSample s(part, Weight{4, 2}, {f, g, g});
  for (double r : probe(P, "heat_block_decay").ratios(s)) {
    EXPECT_GT(r, 0);
    EXPECT_TRUE(std::isfinite(r));
  }
}

TEST(LemmaRows, ConstantAndDriftBookkeeping) {
  EXPECT_EQ(lemma_constant(LemmaKind::upper, {0.5, 2.0, 1.0}), 2.0);
  EXPECT_EQ(lemma_constant(LemmaKind::two_sided, {0.25, 2.0}), 4.0);
  EXPECT_TRUE(std::isinf(lemma_constant(LemmaKind::upper, {1.0, NAN})));

  LemmaProbe up{"x", LemmaKind::upper, 2, {}};
  auto r = finish_row(up, {0.125, 0.0625, 0.03125}, {1.0, 1.5, 0.5});
  EXPECT_DOUBLE_EQ(r.drift, 1.5);
  EXPECT_TRUE(r.pass);
  EXPECT_FALSE(finish_row(up, {0.125, 0.0625}, {1.0, 2.5}).pass);
  // a vanishing calibration cannot certify anything
  EXPECT_FALSE(finish_row(up, {0.125, 0.0625}, {0.0, 0.0}).pass);
  EXPECT_FALSE(finish_row(up, {0.125, 0.0625}, {0.0, 1.0}).pass);

  LemmaProbe ex{"y", LemmaKind::exact, 1, {}};
  EXPECT_TRUE(finish_row(ex, {0.125, 0.0625}, {0.9, 1.0}).pass);
  EXPECT_FALSE(finish_row(ex, {0.125, 0.0625}, {0.9, 1.001}).pass);
}

TEST(LemmaSuite, SmallRunIsDeterministic) {
  LemmaSuiteOptions o;
  o.levels = {3, 4};
  o.ensemble = 3;
  auto a = run_lemma_suite(o), b = run_lemma_suite(o);
  std::ostringstream sa, sb;
  a.write_csv(sa);
  b.write_csv(sb);
  EXPECT_EQ(sa.str(), sb.str());
  std::size_t lines = 0;
  for (char c : sa.str()) lines += c == '\n';
  EXPECT_EQ(lines, 1 + a.rows.size() * 2 + 2 * 8);
  for (const auto& row : a.rows) {
    EXPECT_EQ(row.constant.size(), 2u);
    EXPECT_GT(row.constant[0], 0) << row.name;
  }
  o.threads = 2;
  std::ostringstream sc;
  run_lemma_suite(o).write_csv(sc);
  EXPECT_EQ(sa.str(), sc.str());
}
