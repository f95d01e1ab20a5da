#pragma once

#include <functional>
#include <iostream>

#include "gibbs.hpp"

namespace phi4 {

// Below this exponent the first-order paracontrolled theory no longer covers the model.
inline constexpr double kFractionalCovered = 21.0 / 22.0;

using WarningSink = std::function<void(const std::string&)>;

inline WarningSink& warning_sink() {
  static WarningSink sink = [](const std::string& w) { std::cerr << "warning: " << w << "\n"; };
  return sink;
}

inline bool fractional_uncovered(double gamma) { return gamma <= kFractionalCovered; }

// Validates gamma in (0, 1]; warns once per call when gamma <= 21/22.
inline bool fractional_gate(double gamma) {
  require(gamma > 0 && gamma <= 1, "fractional: gamma must lie in (0, 1]");
  if (gamma < 1 && fractional_uncovered(gamma)) {
    warning_sink()("gamma = " + std::to_string(gamma) +
                   " <= 21/22: outside the covered range, extra renormalization would be needed");
    return true;
  }
  return false;
}

struct FractionalSpec {
  double gamma = 1;
  GibbsSpec gibbs;
  bool uncovered = false;
};

inline FractionalSpec make_fractional(const Lattice& lat, Couplings c) {
  FractionalSpec f;
  f.uncovered = fractional_gate(c.gamma);
  f.gamma = c.gamma;
  f.gibbs = gibbs_spec(Model(lat, c));
  return f;
}

inline double fractional_compute_a(const Lattice& lat, double m2, double gamma) {
  fractional_gate(gamma);
  return compute_a(HeatOperator(lat, m2, gamma));
}

inline double fractional_compute_b(const Lattice& lat, double m2, double gamma, const DyadicPartition& part) {
  fractional_gate(gamma);
  return compute_b(HeatOperator(lat, m2, gamma), part);
}

inline double fractional_gibbs_log_density(const FractionalSpec& s, const Field& phi) {
  return gibbs_log_density(s.gibbs, phi);
}

inline Model fractional_model(const Lattice& lat, Couplings c, int J = -1) {
  fractional_gate(c.gamma);
  return Model(lat, c, J);
}

inline void fractional_langevin_step(Langevin& L, double dt) { L.step(dt); }

}  // namespace phi4
