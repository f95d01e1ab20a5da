#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <phi4/basket_io.hpp>
#include <phi4/checks.hpp>
#include <phi4/config.hpp>
#include <phi4/fractional.hpp>
#include <phi4/lemma_suite.hpp>
#include <phi4/observables.hpp>
#include <phi4/pool.hpp>
#include <phi4/snapshot.hpp>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace phi4;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> out;
  std::optional<double> gamma;
};

struct Run {
  std::string command;
  RunConfig cfg;
  int threads = 1;
  fs::path out;
  std::vector<std::string> outputs;
  json chains = json::array();

  std::ofstream open(const std::string& name) {
    outputs.push_back(name);
    std::ofstream f(out / name, std::ios::binary);
    if (!f) throw ConstraintError("cannot write " + (out / name).string());
    return f;
  }
};

Run setup(const std::string& command, const Common& c) {
  Run r;
  r.command = command;
  if (!c.config_path.empty()) r.cfg = parse_config(c.config_path);
  for (const auto& kv : c.sets) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConstraintError("--set expects key=value, got '" + kv + "'");
    set_config_value(r.cfg, detail::trim(kv.substr(0, eq)), detail::trim(kv.substr(eq + 1)));
  }
  if (c.seed) r.cfg.sampling.seed = *c.seed;
  if (c.out) r.cfg.io.out = *c.out;
  if (c.gamma) r.cfg.physics.gamma = *c.gamma;
  validate(r.cfg);
  r.threads = c.threads ? std::max(1, *c.threads) : default_threads();
  r.out = r.cfg.io.out;
  if (!fs::exists(r.out)) {
    fs::create_directories(r.out);
    std::cerr << "created output directory " << r.out.string() << "\n";
  }
  return r;
}

void write_manifest(Run& r, double wall, int status) {
  json m;
  m["command"] = r.command;
  m["version"] = PHI4_VERSION;
  m["config_hash"] = config_hash(r.cfg);
  m["config"] = to_config_text(r.cfg);
  m["wall_time_s"] = wall;
  m["threads"] = r.threads;
  m["status"] = status;
  m["seeds"] = {{"master", r.cfg.sampling.seed}, {"chains", r.chains}};
  m["outputs"] = r.outputs;
  std::ofstream f(r.out / "manifest.json");
  f << m.dump(2) << "\n";
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Model make_model(const RunConfig& c) {
  Couplings k{c.physics.m2, c.physics.lambda, c.physics.gamma};
  return c.physics.gamma < 1 ? fractional_model(c.make(), k, c.analysis.J) : Model(c.make(), k, c.analysis.J);
}

// chain c draws from the stream keyed by (master seed, c)
CounterRng chain_rng(Run& r, int c) { return CounterRng(r.cfg.sampling.seed, std::uint32_t(c)); }

void note_chains(Run& r) {
  for (int c = 0; c < r.cfg.sampling.chains; ++c)
    r.chains.push_back({{"chain", c}, {"key", {r.cfg.sampling.seed, c}}});
}

struct Moments {
  double phi2 = 0, phi4 = 0, sup = 0;
};

Moments moments(const Field& f) {
  Moments m;
  for (double x : f.values()) {
    double x2 = x * x;
    m.phi2 += x2;
    m.phi4 += x2 * x2;
    m.sup = std::max(m.sup, std::abs(x));
  }
  m.phi2 /= double(f.size());
  m.phi4 /= double(f.size());
  return m;
}

BasketNormParams norm_params(const RunConfig& c) {
  BasketNormParams p;
  p.kappa = c.analysis.kappa;
  p.sigma = c.analysis.sigma;
  p.weight = c.weight();
  return p;
}

StochasticBasket every_nth_slice(const StochasticBasket& B, std::size_t stride) {
  StochasticBasket out;
  out.a = B.a;
  out.b = B.b;
  auto pick = [&](const Trajectory& t) {
    Trajectory o;
    for (std::size_t n = 0; n < t.size(); n += stride) o.push(t.times[n], t.slices[n]);
    return o;
  };
  for (auto [key, member] : detail::basket_members()) out.*member = pick(B.*member);
  for (std::size_t n = 0; n < B.btilde.size(); n += stride) out.btilde.push_back(B.btilde[n]);
  return out;
}

// stochastic objects on [burn_in, burn_in + T] from their own OU stream; at most 65 slices are written
void write_basket_snapshot(Run& r, const Model& model) {
  const auto& c = r.cfg;
  const double dt = c.dynamics.dt;
  const auto burn = std::size_t(std::llround(c.dynamics.burn_in / dt));
  const auto steps = std::size_t(std::llround(c.dynamics.T / dt));
  OuSampler ou(model.op(), CounterRng(c.sampling.seed, std::uint32_t(c.sampling.chains)));
  Spectrum s = ou.stationary_spectrum(0);
  TreeBuilder tb(model.op(), model.partition(), renorm_constants(model.op(), model.partition(), c.dynamics.T));
  for (std::size_t n = 0; n <= burn + steps; ++n) {
    if (n) ou.advance(s, dt, n);
    tb.feed(double(n) * dt, inverse_fourier(s), n >= burn);
  }
  StochasticBasket B = tb.take();
  auto norm = basket_norm(B, model.partition(), norm_params(c));
  write_basket(r.out / "basket", every_nth_slice(B, std::max<std::size_t>(1, (B.X.size() + 63) / 64)), norm);
  r.outputs.push_back("basket/basket.json");
}

int cmd_langevin(Run& r, bool energy, bool basket) {
  const auto& c = r.cfg;
  Model model = make_model(c);
  note_chains(r);
  const auto burn = std::size_t(std::llround(c.dynamics.burn_in / c.dynamics.dt));
  const auto steps = std::size_t(std::llround(c.dynamics.T / c.dynamics.dt));
  const auto thin = std::size_t(c.sampling.thin);
  const auto snap = std::size_t(c.io.snapshot_every);
  if (snap) fs::create_directories(r.out / "snapshots");
  std::vector<std::string> rows(std::size_t(c.sampling.chains));
  parallel_for(c.sampling.chains, r.threads, [&](int ch) {
    Langevin L(model, chain_rng(r, ch));
    L.init_stationary();
    for (std::size_t n = 0; n < burn; ++n) L.step(c.dynamics.dt);
    std::ostringstream os;
    char buf[160];
    for (std::size_t n = 1; n <= steps; ++n) {
      L.step(c.dynamics.dt);
      if (n % thin == 0) {
        auto m = moments(L.phi());
        std::snprintf(buf, sizeof buf, "%d,%zu,%.10g,%.10g,%.10g,%.10g\n", ch, n, double(n) * c.dynamics.dt, m.phi2,
                      m.phi4, m.sup);
        os << buf;
      }
      if (snap && n % snap == 0) {
        std::snprintf(buf, sizeof buf, "chain%d_step%zu.phi", ch, n);
        write_field(r.out / "snapshots" / buf, L.phi());
      }
    }
    rows[std::size_t(ch)] = os.str();
  });
  auto f = r.open("langevin.csv");
  f << "chain,step,t,phi2,phi4,sup\n";
  for (const auto& s : rows) f << s;
  if (snap)
    for (int ch = 0; ch < c.sampling.chains; ++ch)
      for (std::size_t n = snap; n <= steps; n += snap)
        r.outputs.push_back("snapshots/chain" + std::to_string(ch) + "_step" + std::to_string(n) + ".phi");

  if (energy) {
    PathwiseOptions po;
    po.dt = c.dynamics.dt;
    po.T_burn = c.dynamics.burn_in;
    po.C_delta = c.analysis.C_delta;
    po.norm = norm_params(c);
    PathwiseRun run(model, chain_rng(r, 0), po);
    MonitorOptions mo;
    mo.T = c.dynamics.T;
    mo.report_every = std::max<std::size_t>(2, thin);
    mo.energy = {c.analysis.kappa, c.analysis.iota, c.weight()};
    auto recs = energy_monitor(run, mo);
    auto e = r.open("energy.csv");
    auto cols = EnergyRecord::columns();
    for (std::size_t k = 0; k < cols.size(); ++k) e << (k ? "," : "") << cols[k];
    e << "\n";
    for (const auto& rec : recs) {
      auto v = rec.values();
      for (std::size_t k = 0; k < v.size(); ++k) e << (k ? "," : "") << fmt("%.10g", v[k]);
      e << "\n";
    }
  }
  if (basket) write_basket_snapshot(r, model);
  return 0;
}

GibbsSpec make_gibbs(const RunConfig& c) {
  Couplings k{c.physics.m2, c.physics.lambda, c.physics.gamma};
  return c.physics.gamma < 1 ? make_fractional(c.make(), k).gibbs : gibbs_spec(Model(c.make(), k, c.analysis.J));
}

int cmd_gibbs(Run& r) {
  const auto& c = r.cfg;
  GibbsSpec spec = make_gibbs(c);
  note_chains(r);
  std::vector<std::string> rows(std::size_t(c.sampling.chains));
  parallel_for(c.sampling.chains, r.threads, [&](int ch) {
    MetropolisChain mc(spec, Field(spec.lat), chain_rng(r, ch));
    mc.tune(std::size_t(c.sampling.burn_in));
    std::ostringstream os;
    char buf[200];
    for (int s = 0; s < c.sampling.samples; ++s) {
      double acc = 0;
      for (int t = 0; t < c.sampling.thin; ++t) acc += mc.sweep();
      auto m = moments(mc.phi());
      std::snprintf(buf, sizeof buf, "%d,%d,%llu,%.10g,%.10g,%.10g,%.6g,%.6g\n", ch, s,
                    static_cast<unsigned long long>(mc.sweeps()), m.phi2, m.phi4, m.sup, acc / c.sampling.thin,
                    mc.step_sigma());
      os << buf;
    }
    rows[std::size_t(ch)] = os.str();
  });
  auto f = r.open("gibbs.csv");
  f << "chain,sample,sweep,phi2,phi4,sup,acceptance,step_sigma\n";
  for (const auto& s : rows) f << s;
  return 0;
}

SampleSet draw_samples(Run& r) {
  const auto& c = r.cfg;
  note_chains(r);
  StreamOptions so{std::size_t(c.sampling.burn_in), std::size_t(c.sampling.samples), std::size_t(c.sampling.thin),
                   c.dynamics.dt};
  std::vector<SampleSet> per(std::size_t(c.sampling.chains));
  if (c.sampling.sampler == "langevin") {
    Model model = make_model(c);
    parallel_for(c.sampling.chains, r.threads,
                 [&](int ch) { per[std::size_t(ch)] = langevin_samples(model, chain_rng(r, ch), so).first; });
  } else {
    GibbsSpec spec = make_gibbs(c);
    parallel_for(c.sampling.chains, r.threads, [&](int ch) {
      per[std::size_t(ch)] = c.sampling.sampler == "exact"
                                 ? exact_gaussian_samples(spec, chain_rng(r, ch), so.samples)
                                 : metropolis_samples(spec, chain_rng(r, ch), so);
    });
  }
  SampleSet all;
  for (auto& s : per) all.insert(all.end(), s.begin(), s.end());
  return all;
}

SampleSet read_snapshots(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".phi") files.push_back(e.path());
  require(!files.empty(), "observe: no .phi snapshots in " + dir.string());
  std::sort(files.begin(), files.end());
  SampleSet S;
  for (const auto& f : files) {
    S.push_back(read_field(f));
    check_same(S.front().lattice(), S.back().lattice());
  }
  return S;
}

// one CSV per observable, rows (observable, value, stderr, n, z against 0)
int cmd_observe(Run& r, const std::string& from) {
  const auto& c = r.cfg;
  SampleSet S = from.empty() ? draw_samples(r) : read_snapshots(from);
  const Lattice& lat = S.front().lattice();
  auto part = c.analysis.J >= 0 ? build_partition(lat, c.analysis.J) : build_partition(lat);
  json summary;
  summary["samples"] = S.size();
  summary["source"] = from.empty() ? c.sampling.sampler : from;
  summary["lattice"] = lat.describe();
  auto table = [&](const std::string& name, const std::vector<ObservableEstimate>& es) {
    auto f = r.open(name + ".csv");
    f << "observable,value,stderr,n,z_null\n";
    json rows = json::array();
    for (const auto& e : es) {
      f << e.label << "," << fmt("%.10g", e.value) << "," << fmt("%.6g", e.stderr_) << "," << S.size() << ","
        << fmt("%.4g", e.z(0)) << "\n";
      rows.push_back({{"observable", e.label}, {"value", e.value}, {"stderr", e.stderr_}});
    }
    summary[name] = rows;
  };
  std::vector<std::array<int, 3>> offs;
  for (int d = 0; d <= lat.n_side() / 2; ++d) offs.push_back({d, 0, 0});
  table("two_point", schwinger_two_point(S, offs));
  std::vector<ObservableEstimate> u4;
  for (int j = part.jmin(); j <= part.jmax(); ++j) u4.push_back(connected_four_point_smeared(S, part, j));
  table("u4", u4);
  const double M = lat.side();
  std::vector<Field> tf;
  for (int k = 0; k < 4; ++k)
    tf.push_back(restrict_positive_half(bump(lat, {M * 0.125 * (k + 1), M * 0.125 * k, 0}, 0.15 * M, 1.5)));
  auto rp = rp_gram(S, tf, CounterRng(c.sampling.seed, std::uint32_t(c.sampling.chains)), 1000);
  table("rp", {ObservableEstimate{"min_eig(K=4)", rp.min_eig, rp.bootstrap_sigma, S.size()}});
  r.outputs.push_back("observe.json");
  std::ofstream(r.out / "observe.json") << summary.dump(2) << "\n";
  return 0;
}

int cmd_identities(Run& r) {
  Lattice lat = r.cfg.make();
  auto part = r.cfg.analysis.J >= 0 ? build_partition(lat, r.cfg.analysis.J) : build_partition(lat);
  auto rows = identity_suite(part, r.cfg.sampling.seed, 3, r.cfg.physics.m2);
  auto f = r.open("identities.csv");
  f << "identity,error,tol,pass\n";
  bool ok = true;
  for (const auto& i : rows) {
    f << i.name << "," << fmt("%.6e", i.error) << "," << fmt("%.3g", i.tol) << "," << int(i.pass()) << "\n";
    ok = ok && i.pass();
  }
  return ok ? 0 : 1;
}

int cmd_besov(Run& r, int ensemble, std::vector<int> levels, std::uint64_t ensemble_seed) {
  LemmaSuiteOptions o;
  o.M = r.cfg.lattice.M;
  o.J = r.cfg.analysis.J >= 0 ? r.cfg.analysis.J : 1;
  o.m2 = r.cfg.physics.m2;
  o.ensemble = ensemble;
  o.seed = ensemble_seed;
  o.threads = r.threads;
  o.levels = levels.empty() ? std::vector<int>{r.cfg.lattice.N, r.cfg.lattice.N + 1, r.cfg.lattice.N + 2} : levels;
  auto rep = run_lemma_suite(o);
  auto f = r.open("lemma_constants.csv");
  rep.write_csv(f);
  for (const auto& row : rep.rows)
    if (!row.pass) std::cerr << "FAIL " << row.name << " drift " << row.drift << "\n";
  return rep.all_pass() ? 0 : 1;
}

int cmd_stochastic(Run& r, std::size_t draws, std::size_t log_draws) {
  const auto& c = r.cfg;
  Lattice lat = c.make();
  HeatOperator op(lat, c.physics.m2 > 0 ? c.physics.m2 : 1.0, c.physics.gamma);
  auto part = c.analysis.J >= 0 ? build_partition(lat, c.analysis.J) : build_partition(lat);
  std::vector<CheckResult> rs;
  rs.push_back(wick_counterterm_check(op, c.sampling.seed, draws));
  rs.push_back(a_ratio_check(c.lattice.M, c.lattice.N, op.m2()));
  rs.push_back(log_counterterm_check(op, part, c.sampling.seed + 1, log_draws));
  std::vector<int> lv;
  for (int N = c.lattice.N; N <= c.lattice.N + 3; ++N) lv.push_back(N);
  for (auto& b : b_increment_checks(c.lattice.M, lv, op.m2())) rs.push_back(b);
  auto f = r.open("stochastic.csv");
  write_checks_csv(f, rs);
  return all_pass(rs) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lattice phi^4_3 stochastic quantization lab"};
  app.set_version_flag("--version", PHI4_VERSION);
  app.require_subcommand(1);
  Common co;
  app.add_option("--config", co.config_path, "key = value config file")->check(CLI::ExistingFile);
  app.add_option("--set", co.sets, "override a config key (key=value), repeatable");
  app.add_option("--seed", co.seed, "master seed");
  app.add_option("--threads", co.threads, "worker threads (default: PHI4_THREADS or 1)");
  app.add_option("--out", co.out, "output directory");
  app.add_option("--gamma", co.gamma, "kinetic exponent in (0, 1]");

  bool no_energy = false, basket = false;
  auto* lang = app.add_subcommand("langevin", "run Langevin chains, field moments and the energy monitor")->fallthrough();
  lang->add_flag("--no-energy", no_energy, "skip the pathwise energy monitor on chain 0");
  lang->add_flag("--basket", basket, "write a stochastic-basket snapshot with a JSON sidecar");
  auto* gib = app.add_subcommand("gibbs", "run Metropolis chains on the lattice Gibbs measure")->fallthrough();
  auto* obs = app.add_subcommand("observe", "two-point, U4 per block and RP Gram from the sampler or snapshots")
                  ->fallthrough();
  std::string from;
  obs->add_option("--from", from, "read .phi snapshots from this directory instead of sampling")
      ->check(CLI::ExistingDirectory);
  auto* chk = app.add_subcommand("check", "numerical checks")->fallthrough()->require_subcommand(1);
  int ensemble = 100;
  std::vector<int> levels;
  std::uint64_t ensemble_seed = 20;
  auto* bes = chk->add_subcommand("besov", "measured lemma constants across mesh levels")->fallthrough();
  bes->add_option("--ensemble", ensemble, "calibration ensemble size")->check(CLI::PositiveNumber);
  bes->add_option("--levels", levels, "lattice levels N (default N, N+1, N+2)");
  bes->add_option("--ensemble-seed", ensemble_seed, "seed of the band-limited calibration ensemble");
  std::size_t draws = 10000, log_draws = 2000;
  auto* sto = chk->add_subcommand("stochastic", "Monte Carlo checks of the counterterms")->fallthrough();
  sto->add_option("--draws", draws, "stationary draws for the Wick check");
  sto->add_option("--log-draws", log_draws, "stationary draws for the log counterterm check");
  auto* ids = chk->add_subcommand("identities", "exact identities at machine precision")->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  std::string name = lang->parsed() ? "langevin"
                     : gib->parsed() ? "gibbs"
                     : obs->parsed() ? "observe"
                     : bes->parsed() ? "check besov"
                     : sto->parsed() ? "check stochastic"
                                     : "check identities";
  auto t0 = std::chrono::steady_clock::now();
  Run run;
  int status = 0;
  try {
    run = setup(name, co);
    if (lang->parsed()) status = cmd_langevin(run, !no_energy, basket);
    else if (gib->parsed()) status = cmd_gibbs(run);
    else if (obs->parsed()) status = cmd_observe(run, from);
    else if (bes->parsed()) status = cmd_besov(run, ensemble, levels, ensemble_seed);
    else if (sto->parsed()) status = cmd_stochastic(run, draws, log_draws);
    else if (ids->parsed()) status = cmd_identities(run);
  } catch (const ConstraintError& e) {
    std::cerr << "error: " << e.what() << "\n";
    status = 2;
  } catch (const MismatchError& e) {
    std::cerr << "error: " << e.what() << "\n";
    status = 2;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << "\n";
    status = 3;
  }
  if (!run.out.empty()) {
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_manifest(run, wall, status);
  }
  std::cerr << name << ": " << (status == 0 ? "pass" : "exit " + std::to_string(status)) << "\n";
  return status;
}
