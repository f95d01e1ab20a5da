#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "besov.hpp"

namespace phi4 {

struct RunConfig {
  struct {
    int N = 3;
    double M = 1;
  } lattice;
  struct {
    double m2 = 1;
    double lambda = 1;
    double gamma = 1;
  } physics;
  struct {
    double dt = 1e-3;
    double T = 1;
    double burn_in = 10;  // time units; 10 / m^2 at the default mass
  } dynamics;
  struct {
    double kappa = 0.05;
    double sigma = 0.1;
    double iota = 0.5;
    double weight_h = 1;
    double weight_nu = 3;
    int J = -1;  // -1: derived from the partition profile
    double C_delta = 4;
  } analysis;
  struct {
    std::uint64_t seed = 1;
    int chains = 1;
    int thin = 10;
    int samples = 1000;
    int burn_in = 500;  // sweeps (metropolis) or steps (langevin)
    std::string sampler = "metropolis";  // metropolis | langevin | exact
  } sampling;
  struct {
    std::string out = "out";
    int snapshot_every = 0;  // steps; 0 disables
  } io;

  Weight weight() const { return {analysis.weight_h, analysis.weight_nu}; }
  Lattice make() const { return make_lattice(lattice.N, lattice.M); }
};

namespace detail {

struct ConfigKey {
  std::string name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConstraintError("config: " + key + " expects a number, got '" + v + "'");
  return d;
}

inline long long parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long d = 0;
  try {
    d = std::stoll(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size()) throw ConstraintError("config: " + key + " expects an integer, got '" + v + "'");
  return d;
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long d = 0;
  try {
    if (!v.empty() && v[0] != '-') d = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size())
    throw ConstraintError("config: " + key + " expects a nonnegative integer, got '" + v + "'");
  return d;
}

#define PHI4_KEY_D(path)                                                                           \
  ConfigKey{#path, [](RunConfig& c, const std::string& v) { c.path = parse_double(#path, v); }, \
            [](const RunConfig& c) { return format_double(c.path); }}
#define PHI4_KEY_I(path, T)                                                                          \
  ConfigKey{#path, [](RunConfig& c, const std::string& v) { c.path = static_cast<T>(parse_int(#path, v)); }, \
            [](const RunConfig& c) { return std::to_string(c.path); }}
#define PHI4_KEY_U(path)                                                                         \
  ConfigKey{#path, [](RunConfig& c, const std::string& v) { c.path = parse_unsigned(#path, v); }, \
            [](const RunConfig& c) { return std::to_string(c.path); }}
#define PHI4_KEY_S(path)                                                              \
  ConfigKey{#path, [](RunConfig& c, const std::string& v) { c.path = v; }, \
            [](const RunConfig& c) { return c.path; }}

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      PHI4_KEY_I(lattice.N, int),          PHI4_KEY_D(lattice.M),
      PHI4_KEY_D(physics.m2),              PHI4_KEY_D(physics.lambda),
      PHI4_KEY_D(physics.gamma),           PHI4_KEY_D(dynamics.dt),
      PHI4_KEY_D(dynamics.T),              PHI4_KEY_D(dynamics.burn_in),
      PHI4_KEY_D(analysis.kappa),          PHI4_KEY_D(analysis.sigma),
      PHI4_KEY_D(analysis.iota),           PHI4_KEY_D(analysis.weight_h),
      PHI4_KEY_D(analysis.weight_nu),      PHI4_KEY_I(analysis.J, int),
      PHI4_KEY_D(analysis.C_delta),        PHI4_KEY_U(sampling.seed),
      PHI4_KEY_I(sampling.chains, int),    PHI4_KEY_I(sampling.thin, int),
      PHI4_KEY_I(sampling.samples, int),   PHI4_KEY_I(sampling.burn_in, int),
      PHI4_KEY_S(sampling.sampler),
      PHI4_KEY_S(io.out),                  PHI4_KEY_I(io.snapshot_every, int),
  };
  return keys;
}

#undef PHI4_KEY_D
#undef PHI4_KEY_I
#undef PHI4_KEY_S
#undef PHI4_KEY_U

inline std::string trim(const std::string& s) {
  auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline std::size_t levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] != b[j - 1])});
      diag = up;
    }
  }
  return row[b.size()];
}

// Closest known key; compares against both full and last-segment names.
inline std::string nearest_config_key(const std::string& key) {
  std::string best;
  std::size_t bd = std::size_t(-1);
  for (const auto& k : detail::config_keys()) {
    std::size_t d = levenshtein(key, k.name);
    auto dot = k.name.find('.');
    d = std::min(d, levenshtein(key, k.name.substr(dot + 1)) + (key.find('.') == std::string::npos ? 0 : 1));
    if (d < bd) {
      bd = d;
      best = k.name;
    }
  }
  return best;
}

// Re-checks every module precondition the config feeds.
inline void validate(const RunConfig& c) {
  Lattice lat = c.make();  // names M/(2 eps) in N
  require(std::isfinite(c.physics.m2), "config: physics.m2 must be finite");
  require(c.physics.lambda >= 0 && std::isfinite(c.physics.lambda), "config: physics.lambda must be >= 0");
  require(c.physics.gamma > 0 && c.physics.gamma <= 1, "config: physics.gamma must lie in (0, 1]");
  require(c.dynamics.dt > 0, "config: dynamics.dt must be > 0");
  require(c.dynamics.T > 0, "config: dynamics.T must be > 0");
  require(c.dynamics.burn_in >= 0, "config: dynamics.burn_in must be >= 0");
  require(c.analysis.kappa > 0 && c.analysis.kappa < 1, "config: analysis.kappa must lie in (0, 1)");
  require(c.analysis.sigma > 0 && c.analysis.sigma < 1, "config: analysis.sigma must lie in (0, 1)");
  require(c.analysis.iota > 0, "config: analysis.iota must be > 0");
  require(c.analysis.weight_h > 0 && c.analysis.weight_nu >= 0,
          "config: weight needs analysis.weight_h > 0 and analysis.weight_nu >= 0");
  require(c.analysis.C_delta > 0, "config: analysis.C_delta must be > 0");
  if (c.analysis.J >= 0) build_partition(lat, c.analysis.J);
  else require(c.analysis.J == -1, "config: analysis.J must be -1 (auto) or >= 0");
  require(c.sampling.chains >= 1, "config: sampling.chains must be >= 1");
  require(c.sampling.thin >= 1, "config: sampling.thin must be >= 1");
  require(c.sampling.samples >= 1, "config: sampling.samples must be >= 1");
  require(c.sampling.burn_in >= 0, "config: sampling.burn_in must be >= 0");
  require(c.sampling.sampler == "metropolis" || c.sampling.sampler == "langevin" || c.sampling.sampler == "exact",
          "config: sampling.sampler must be metropolis, langevin or exact");
  require(!(c.sampling.sampler == "exact" && c.physics.lambda != 0),
          "config: sampling.sampler = exact requires physics.lambda = 0");
  require(!c.io.out.empty(), "config: io.out must not be empty");
  require(c.io.snapshot_every >= 0, "config: io.snapshot_every must be >= 0");
}

inline void set_config_value(RunConfig& c, const std::string& key, const std::string& value) {
  for (const auto& k : detail::config_keys())
    if (k.name == key) return k.set(c, value);
  throw ConstraintError("config: unknown key '" + key + "' (did you mean '" + nearest_config_key(key) + "'?)");
}

// key = value lines; '#' comments; optional [section] headers prefix later keys.
inline RunConfig parse_config_text(const std::string& text, const std::string& source = "<config>") {
  RunConfig c;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    auto where = source + ":" + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConstraintError(where + "unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConstraintError(where + "expected 'key = value'");
    std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConstraintError(where + "missing key");
    if (!section.empty()) key = section + "." + key;
    try {
      set_config_value(c, key, value);
    } catch (const ConstraintError& e) {
      throw ConstraintError(where + e.what());
    }
  }
  validate(c);
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConstraintError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), path);
}

inline std::string to_config_text(const RunConfig& c) {
  std::string out;
  for (const auto& k : detail::config_keys()) out += k.name + " = " + k.get(c) + "\n";
  return out;
}

inline bool operator==(const RunConfig& a, const RunConfig& b) { return to_config_text(a) == to_config_text(b); }

// 64-bit FNV-1a
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string config_hash(const RunConfig& c) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_config_text(c))));
  return buf;
}

}  // namespace phi4
