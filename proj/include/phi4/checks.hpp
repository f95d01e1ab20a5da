#pragma once

#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "stats.hpp"
#include "stochastic.hpp"

namespace phi4 {

struct CheckResult {
  std::string name;
  double value = 0;
  double reference = 0;
  double stderr_ = 0;  // 0 for deterministic checks
  bool pass = false;
  std::string detail;
};

inline void write_checks_csv(std::ostream& os, const std::vector<CheckResult>& rs) {
  os << "check,value,reference,stderr,pass,detail\n";
  char buf[512];
  for (const auto& r : rs) {
    std::snprintf(buf, sizeof buf, "%s,%.10g,%.10g,%.6g,%d,%s\n", r.name.c_str(), r.value, r.reference, r.stderr_,
                  int(r.pass), r.detail.c_str());
    os << buf;
  }
}

inline bool all_pass(const std::vector<CheckResult>& rs) {
  for (const auto& r : rs)
    if (!r.pass) return false;
  return true;
}

namespace detail {
inline double site_average(const Field& f) { return mean(f.values()); }
}  // namespace detail

// Spatially averaged X^2 over independent stationary draws against compute_a.
inline CheckResult wick_counterterm_check(const HeatOperator& op, std::uint64_t seed, std::size_t draws) {
  OuSampler ou(op, CounterRng(seed));
  std::vector<double> v;
  v.reserve(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    Field X = ou.stationary(d);
    v.push_back(detail::site_average(X * X));
  }
  auto e = batch_means(v);
  double a = compute_a(op);
  return {"wick_a_mc", e.value, a, e.stderr_, std::abs(e.z(a)) < 3,
          "draws=" + std::to_string(draws) + " on " + op.lattice().describe()};
}

// a(N+1)/a(N) at fixed M: linear divergence puts it near 2.
inline CheckResult a_ratio_check(double M, int N, double m2) {
  double lo = compute_a(HeatOperator(make_lattice(N, M), m2));
  double hi = compute_a(HeatOperator(make_lattice(N + 1, M), m2));
  double r = hi / lo;
  return {"a_ratio_N" + std::to_string(N + 1) + "_N" + std::to_string(N), r, 2.0, 0, r >= 1.6 && r <= 2.4,
          "band [1.6, 2.4]"};
}

// 3 [[X^2]] o Q^-1 [[X^2]] over independent stationary draws against compute_b.
inline CheckResult log_counterterm_check(const HeatOperator& op, const DyadicPartition& part, std::uint64_t seed,
                                         std::size_t draws) {
  OuSampler ou(op, CounterRng(seed));
  const double a = compute_a(op);
  std::vector<double> v;
  v.reserve(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    Field X2 = wick_square(ou.stationary(d), a);
    v.push_back(3 * detail::site_average(resonant(part, X2, q_inverse(op, X2))));
  }
  auto e = batch_means(v);
  double b = compute_b(op, part);
  return {"log_b_mc", e.value, b, e.stderr_, std::abs(e.z(b)) < 3,
          "draws=" + std::to_string(draws) + " on " + op.lattice().describe()};
}

// Successive differences b(N+1) - b(N) over the given levels: ratio of neighbours within 1 +- rel.
inline std::vector<CheckResult> b_increment_checks(double M, const std::vector<int>& levels, double m2,
                                                   double rel = 0.25) {
  std::vector<double> b;
  for (int N : levels) {
    auto lat = make_lattice(N, M);
    b.push_back(compute_b(HeatOperator(lat, m2), build_partition(lat)));
  }
  std::vector<CheckResult> out;
  for (std::size_t k = 0; k + 2 < b.size(); ++k) {
    double d0 = b[k + 1] - b[k], d1 = b[k + 2] - b[k + 1];
    bool ok = d0 > 0 && d1 > 0 && std::abs(d1 / d0 - 1) <= rel;
    out.push_back({"b_increment_N" + std::to_string(levels[k + 2]), d1, d0, 0, ok,
                   "b(N+1)-b(N) vs previous; tolerance " + std::to_string(rel)});
  }
  return out;
}

}  // namespace phi4
