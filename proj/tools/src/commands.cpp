#include "commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csv.hpp"
#include "initial_state.hpp"
#include "mfnet/coupling.hpp"
#include "mfnet/nlmp.hpp"
#include "mfnet/simulation.hpp"
#include "spec_file.hpp"

namespace mfnet::cli {

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string spec;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  std::optional<double> t_end;
  std::optional<double> dt;
  std::optional<int> K;
  std::optional<std::size_t> M;
  std::optional<double> threshold;
};

struct Context {
  const Common& opt;
  std::ostream& out;
  LoadedSpec loaded;
  ValidatedNetwork net;

  Context(const Common& o, std::ostream& os, LoadedSpec l)
      : opt(o), out(os), loaded(std::move(l)), net(validate_spec(loaded.spec)) {}

  int K(int fallback) const { return opt.K.value_or(fallback); }
  double t_end(double fallback) const { return opt.t_end.value_or(fallback); }

  SolverConfig solver(int default_K, double default_t_end, std::size_t stride) const {
    SolverConfig cfg;
    cfg.K = K(default_K);
    cfg.dt = opt.dt.value_or(0.01);
    cfg.t_end = t_end(default_t_end);
    cfg.output_stride = stride;
    return cfg;
  }

  fs::path path(const std::string& name) const { return fs::path(opt.out_dir) / name; }
  CsvWriter csv(const std::string& name, const std::vector<std::string>& columns) const {
    return CsvWriter(path(name), loaded.hash, opt.seed, columns);
  }
};

std::vector<std::string> per_class(const std::string& prefix, int n) {
  std::vector<std::string> out;
  for (int j = 1; j <= n; ++j) out.push_back(prefix + std::to_string(j));
  return out;
}

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::string join(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + format_double(v[i]);
  return s;
}

std::size_t steps_per(double interval, double dt) {
  const double r = interval / dt;
  const double k = std::round(r);
  if (k < 1.0 || std::abs(r - k) > 1e-9 * std::max(1.0, r)) {
    throw Error(ErrorCode::InvalidArgument, "interval " + format_double(interval) +
                                                " is not a whole number of steps of " + format_double(dt));
  }
  return static_cast<std::size_t>(k);
}

void print_bounds(std::ostream& out, const std::string& label, double eps, const ValidatedNetwork& net) {
  const double kappa = net.num_classes() * eps / net.gamma_minus();
  out << label << ": " << format_double(kappa) << " (epsilon " << format_double(eps) << ")\n";
  if (kappa >= 1.0) {
    out << "  bounds: none, kappa >= 1\n";
    return;
  }
  const auto b = geometric_bounds(eps, net.gamma_minus(), net.num_classes());
  out << "  p_empty >= " << format_double(b.p0_lower) << "\n"
      << "  mean_length <= " << format_double(b.mean_upper) << "\n"
      << "  mean_excess_length <= " << format_double(b.tail_mean_upper) << "\n";
}

int cmd_validate(const Context& c) {
  const auto& net = c.net;
  const auto& h = net.remaining_services();
  c.out << "valid: yes\n"
        << "classes: " << net.num_classes() << "\n"
        << "discipline: " << to_string(net.discipline().kind) << "\n"
        << "spectral_radius: " << format_double(net.spectral_radius()) << "\n"
        << "lambda_plus: " << format_double(net.lambda_plus()) << "\n"
        << "gamma_minus: " << format_double(net.gamma_minus()) << "\n"
        << "gamma_plus: " << format_double(net.gamma_plus()) << "\n"
        << "h: " << join(h.h) << "\n"
        << "h_max: " << format_double(h.h_max) << "\n";
  print_bounds(c.out, "kappa", net.lambda_plus(), net);
  if (net.lambda().is_constant()) {
    const auto w = stationary_internal_flow(net);
    c.out << "w_star: " << join(w) << "\n";
    const auto lambda = net.lambda_at(0.0);
    double eps = 0.0;
    for (int j = 0; j < net.num_classes(); ++j) eps = std::max(eps, lambda[j] + w[j]);
    print_bounds(c.out, "kappa_inflow", eps, net);
  } else {
    c.out << "w_star: n/a (time-dependent lambda)\n";
  }
  return 0;
}

void write_flows(CsvWriter& w, const FlowRates& f) {
  for (double x : f.u) w << x;
  for (double x : f.w) w << x;
  for (double x : f.v) w << x;
}

int cmd_nlmp(const Context& c, const std::string& init, std::size_t stride, bool dump_weights) {
  SolverConfig cfg = c.solver(c.loaded.spec.truncation_K, 100.0, stride);
  cfg.record_weights = dump_weights;
  const WordSpace space(c.net.num_classes(), cfg.K, c.net.discipline());
  const auto tr = integrate(initial_measure(init, space), cfg, c.net);
  const int n = c.net.num_classes();

  auto csv = c.csv("trajectory.csv",
                   concat(concat(concat({"t", "mass", "leaked", "alpha", "L", "S", "drift"}, per_class("u_", n)),
                                 per_class("w_", n)),
                          per_class("v_", n)));
  for (const auto& s : tr.samples) {
    csv << s.time << s.mass << s.leaked << s.lyapunov.alpha << s.lyapunov.L << s.lyapunov.S << s.lyapunov.drift;
    write_flows(csv, s.flows);
    csv.end_row();
  }
  if (dump_weights) {
    auto wcsv = c.csv("weights.csv", {"t", "word", "weight"});
    for (const auto& s : tr.samples) {
      for (std::size_t i = 0; i < s.weights.size(); ++i) {
        if (s.weights[i] == 0.0) continue;
        wcsv << s.time << space.word(i).to_string(n) << s.weights[i];
        wcsv.end_row();
      }
    }
  }
  const auto& last = tr.samples.back();
  c.out << "t: " << format_double(last.time) << "\n"
        << "mass: " << format_double(last.mass) << "\n"
        << "leaked: " << format_double(last.leaked) << "\n"
        << "v: " << join(last.flows.v) << "\n";
  if (tr.alpha_threshold_time) c.out << "alpha_threshold_time: " << format_double(*tr.alpha_threshold_time) << "\n";
  return 0;
}

int cmd_stationary(const Context& c, double tol) {
  const SolverConfig cfg = c.solver(c.loaded.spec.truncation_K, 1000.0, 100);
  const auto r = stationary_state(c.net, cfg, tol);
  const WordSpace space(c.net.num_classes(), cfg.K, c.net.discipline());
  auto csv = c.csv("stationary.csv", {"word", "weight"});
  for (std::size_t i = 0; i < space.size(); ++i) {
    csv << space.word(i).to_string(c.net.num_classes()) << r.state.weights[i];
    csv.end_row();
  }
  c.out << "t: " << format_double(r.state.time) << "\n"
        << "residual: " << format_double(r.residual) << "\n"
        << "leaked: " << format_double(r.state.leaked_mass) << "\n"
        << "p_empty: " << format_double(r.state.empty_mass()) << "\n"
        << "v: " << join(r.flows.v) << "\n"
        << "w_star: " << join(r.w_star) << "\n"
        << "flow_defect: " << format_double(r.flow_defect) << "\n";
  return 0;
}

int cmd_couple(const Context& c, const std::string& init_a, const std::string& init_b, std::size_t stride) {
  const SolverConfig cfg = c.solver(std::min(c.loaded.spec.truncation_K, 6), 100.0, stride);
  const WordSpace space(c.net.num_classes(), cfg.K, c.net.discipline());
  const auto state = greedy_coupling(initial_measure(init_a, space), initial_measure(init_b, space));
  const auto tr = integrate_coupled(state, cfg, c.net, c.opt.threshold.value_or(1e-3));
  auto csv = c.csv("coupled.csv", {"t", "w_mass", "r_mass", "leaked", "tv_bound", "tv_actual", "red_L"});
  for (const auto& s : tr.samples) {
    csv << s.time << s.white_mass << s.red_mass << s.leaked << s.red_mass << s.tv_actual << s.red_L;
    csv.end_row();
  }
  const auto& last = tr.samples.back();
  c.out << "t: " << format_double(last.time) << "\n"
        << "r_mass: " << format_double(last.red_mass) << "\n"
        << "leaked: " << format_double(last.leaked) << "\n"
        << "red_integral: " << format_double(last.red_integral) << "\n";
  if (tr.red_below_threshold_time) {
    c.out << "r_below_threshold_time: " << format_double(*tr.red_below_threshold_time) << "\n";
  } else {
    c.out << "r_below_threshold_time: none within horizon\n";
  }
  return 0;
}

// The two NLMPs run at K; the coupling, whose state grows with the square of
// the word count, runs at its own smaller depth.
int cmd_ergodicity(const Context& c, const std::string& init_a, const std::string& init_b, std::size_t stride,
                   std::optional<int> coupled_K) {
  SolverConfig cfg = c.solver(c.loaded.spec.truncation_K, 500.0, stride);
  cfg.record_weights = true;
  const double threshold = c.opt.threshold.value_or(1e-3);
  const WordSpace space(c.net.num_classes(), cfg.K, c.net.discipline());
  const auto ta = integrate(initial_measure(init_a, space), cfg, c.net);
  const auto tb = integrate(initial_measure(init_b, space), cfg, c.net);
  SolverConfig coupled_cfg = cfg;
  coupled_cfg.K = coupled_K.value_or(std::min(cfg.K, 6));
  coupled_cfg.record_weights = false;
  const WordSpace coupled_space(c.net.num_classes(), coupled_cfg.K, c.net.discipline());
  const auto tc = integrate_coupled(
      greedy_coupling(initial_measure(init_a, coupled_space), initial_measure(init_b, coupled_space)), coupled_cfg,
      c.net, threshold);

  auto csv = c.csv("ergodicity.csv", {"t", "tv", "r_t", "tv_marginals", "red_integral", "leaked_a", "leaked_b",
                                      "leaked_coupled"});
  std::optional<double> crossing;
  for (std::size_t k = 0; k < ta.samples.size(); ++k) {
    MeasureState ma, mb;
    ma.weights = ta.samples[k].weights;
    ma.leaked_mass = ta.samples[k].leaked;
    mb.weights = tb.samples[k].weights;
    mb.leaked_mass = tb.samples[k].leaked;
    const double tv = tv_distance(ma, mb);
    if (!crossing && tv < threshold) crossing = ta.samples[k].time;
    const auto& s = tc.samples[k];
    csv << s.time << tv << s.red_mass << s.tv_actual << s.red_integral << ma.leaked_mass << mb.leaked_mass
        << s.leaked;
    csv.end_row();
  }
  c.out << "threshold: " << format_double(threshold) << "\n";
  if (crossing) {
    c.out << "tv_crossing_time: " << format_double(*crossing) << "\n";
  } else {
    c.out << "tv_crossing_time: none within horizon\n";
  }
  if (tc.red_below_threshold_time) {
    c.out << "r_below_threshold_time: " << format_double(*tc.red_below_threshold_time) << "\n";
  } else {
    c.out << "r_below_threshold_time: none within horizon\n";
  }
  c.out << "final_r: " << format_double(tc.samples.back().red_mass) << "\n"
        << "final_red_integral: " << format_double(tc.samples.back().red_integral) << "\n";
  return 0;
}

struct SimOptions {
  std::string init = "empty";
  double sample_interval = 1.0;
  bool events = false;
  double log_from = 0.0;
  std::optional<double> log_to;
  std::optional<std::uint32_t> log_copy;
};

SimulationConfig sim_config(const Context& c, const SimOptions& o, const WordSpace& space) {
  SimulationConfig cfg;
  cfg.M = c.opt.M.value_or(1000);
  cfg.t_end = c.t_end(100.0);
  cfg.seed = c.opt.seed;
  cfg.sample_interval = o.sample_interval;
  cfg.K = space.K();
  cfg.initial = initial_ensemble(o.init, cfg.M, space, c.opt.seed);
  return cfg;
}

void write_events(const Context& c, const std::vector<EventRecord>& events) {
  auto csv = c.csv("events.csv", {"time", "kind", "copy", "target", "class_before", "class_after"});
  for (const auto& e : events) {
    csv << e.time << to_string(e.kind) << static_cast<std::int64_t>(e.copy) << e.target
        << static_cast<std::int64_t>(e.class_before) << static_cast<std::int64_t>(e.class_after);
    csv.end_row();
  }
}

int cmd_simulate(const Context& c, const SimOptions& o) {
  const int n = c.net.num_classes();
  const WordSpace space(n, c.K(c.loaded.spec.truncation_K), c.net.discipline());
  SimulationConfig cfg = sim_config(c, o, space);
  cfg.log_events = o.events;
  cfg.log_from = o.log_from;
  if (o.log_to) cfg.log_to = *o.log_to;
  cfg.log_copy = o.log_copy;
  const auto s = simulate(c.net, cfg);

  std::vector<std::string> cols = concat(concat({"t", "occupancy", "leaked"}, per_class("arrivals_", n)),
                                         per_class("departures_", n));
  for (std::size_t i = 0; i < space.size(); ++i) cols.push_back("mu_" + space.word(i).to_string(n));
  auto csv = c.csv("simulate.csv", cols);
  for (const auto& smp : s.samples) {
    csv << smp.time << smp.occupancy << smp.empirical.leaked_mass;
    for (auto a : smp.arrivals) csv << static_cast<std::uint64_t>(a);
    for (auto d : smp.departures) csv << static_cast<std::uint64_t>(d);
    for (double w : smp.empirical.weights) csv << w;
    csv.end_row();
  }
  if (o.events) write_events(c, s.events);
  c.out << "M: " << cfg.M << "\n"
        << "events: " << s.event_count << "\n"
        << "mean_occupancy: " << format_double(s.mean_occupancy) << "\n";
  if (!s.samples.empty()) c.out << "final_p_empty: " << format_double(s.samples.back().empirical.empty_mass()) << "\n";
  return 0;
}

int cmd_compare(const Context& c, const SimOptions& o, std::uint32_t ks_copy, std::optional<double> ks_from) {
  const int n = c.net.num_classes();
  SolverConfig scfg = c.solver(c.loaded.spec.truncation_K, 100.0, 1);
  scfg.output_stride = steps_per(o.sample_interval, scfg.dt);
  scfg.record_weights = true;
  const WordSpace space(n, scfg.K, c.net.discipline());
  SimulationConfig cfg = sim_config(c, o, space);
  steps_per(cfg.t_end, o.sample_interval);
  cfg.log_events = true;
  cfg.log_copy = ks_copy;
  cfg.log_from = ks_from.value_or(cfg.t_end / 2);
  if (ks_copy >= cfg.M) throw Error(ErrorCode::InvalidArgument, "ks copy must be below M");

  const auto sim = simulate(c.net, cfg);
  const auto nlmp = integrate(empirical_measure(*cfg.initial, space), scfg, c.net);
  if (sim.samples.size() != nlmp.samples.size()) {
    throw Error(ErrorCode::InvalidArgument, "simulation and solver sample grids differ");
  }

  auto csv = c.csv("compare.csv", {"t", "tv_distance", "occupancy_sim", "occupancy_nlmp"});
  for (std::size_t k = 0; k < sim.samples.size(); ++k) {
    const auto& ss = sim.samples[k];
    const auto& ns = nlmp.samples[k];
    MeasureState mu;
    mu.weights = ns.weights;
    mu.leaked_mass = ns.leaked;
    csv << ss.time << tv_distance(ss.empirical, mu) << ss.occupancy << ns.lyapunov.alpha;
    csv.end_row();
  }

  const auto& v = nlmp.samples.back().flows.v;
  auto ks = c.csv("ks.csv", {"class", "rate", "n", "statistic", "p_value"});
  for (int j = 0; j < n; ++j) {
    const auto gaps = interarrival_samples(sim.events, ks_copy, ClassId{static_cast<std::uint16_t>(j)},
                                           cfg.log_from, cfg.t_end);
    ks << static_cast<std::int64_t>(j + 1) << v[j];
    if (gaps.size() >= 20 && v[j] > 0.0) {
      const auto r = ks_exponential(gaps, v[j]);
      ks << static_cast<std::uint64_t>(r.n) << r.statistic << r.p_value;
      c.out << "ks_class_" << j + 1 << ": n " << r.n << " D " << format_double(r.statistic) << " p "
            << format_double(r.p_value) << "\n";
    } else {
      ks << static_cast<std::uint64_t>(gaps.size()) << std::nan("") << std::nan("");
      c.out << "ks_class_" << j + 1 << ": skipped, " << gaps.size() << " gaps\n";
    }
    ks.end_row();
  }
  MeasureState last;
  last.weights = nlmp.samples.back().weights;
  last.leaked_mass = nlmp.samples.back().leaked;
  c.out << "final_tv_distance: " << format_double(tv_distance(sim.samples.back().empirical, last)) << "\n";
  return 0;
}

}  // namespace

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::RowSumExceedsOne:
    case ErrorCode::SpectralRadiusNotSubcritical:
    case ErrorCode::RateConditionViolated:
    case ErrorCode::SingularSystem:
    case ErrorCode::TruncationTooLarge:
    case ErrorCode::KappaNotSubcritical:
      return 3;
    case ErrorCode::StepSizeUnstable: return 4;
    case ErrorCode::NoConvergenceWithinHorizon: return 5;
    default: return 2;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mean-field queueing networks: NLMP solver, coupling and finite-M simulation", "mfnet"};
  app.set_version_flag("--version", "mfnet 0.1.0");
  app.set_config("--config", "", "INI/TOML file setting any flag; command-line values win");
  app.require_subcommand(1);
  app.fallthrough();

  Common opt;
  app.add_option("--spec", opt.spec, "Network file (JSON)")->required();
  app.add_option("--out-dir", opt.out_dir, "Directory for CSV output")->capture_default_str();
  app.add_option("--seed", opt.seed, "RNG seed")->capture_default_str();
  app.add_option("--t-end", opt.t_end, "Horizon")->check(CLI::PositiveNumber);
  app.add_option("--dt", opt.dt, "RK4 step (default 0.01)")->check(CLI::PositiveNumber);
  app.add_option("--trunc-K", opt.K, "Truncation depth K")->check(CLI::NonNegativeNumber);
  app.add_option("--M", opt.M, "Number of copies (default 1000)")->check(CLI::PositiveNumber);
  app.add_option("--threshold", opt.threshold, "Crossing threshold (default 1e-3)")->check(CLI::PositiveNumber);

  std::size_t stride = 100;
  bool dump_weights = false;
  std::string init = "empty";
  std::string init_a = "word:111";
  std::string init_b = "empty";
  double tol = 1e-10;
  SimOptions sim;
  std::uint32_t ks_copy = 0;
  std::optional<double> ks_from;
  std::optional<int> coupled_K;

  auto* validate = app.add_subcommand("validate", "Check a network and print its constants");
  auto* nlmp = app.add_subcommand("nlmp", "Integrate the NLMP master equation");
  nlmp->add_option("--init", init, "Initial state descriptor")->capture_default_str();
  nlmp->add_option("--stride", stride, "Output every n steps")->capture_default_str()->check(CLI::PositiveNumber);
  nlmp->add_flag("--weights", dump_weights, "Also write weights.csv");
  auto* stationary = app.add_subcommand("stationary", "Integrate from the empty state to stationarity");
  stationary->add_option("--tol", tol, "Residual tolerance")->capture_default_str()->check(CLI::PositiveNumber);
  auto* couple = app.add_subcommand("couple", "Integrate the red/white coupling of two initial states");
  auto* ergodicity = app.add_subcommand("ergodicity", "Merging of two NLMP trajectories and the red mass");
  for (auto* sub : {couple, ergodicity}) {
    sub->add_option("--init-a", init_a, "First initial state")->capture_default_str();
    sub->add_option("--init-b", init_b, "Second initial state")->capture_default_str();
    sub->add_option("--stride", stride, "Output every n steps")->capture_default_str()->check(CLI::PositiveNumber);
  }
  ergodicity->add_option("--coupled-K", coupled_K, "Truncation of the coupled system (default min(K, 6))")
      ->check(CLI::NonNegativeNumber);
  auto* simulate_cmd = app.add_subcommand("simulate", "Exact-jump simulation of M copies");
  auto* compare = app.add_subcommand("compare", "Simulation against the NLMP from the same start");
  for (auto* sub : {simulate_cmd, compare}) {
    sub->add_option("--init", sim.init, "Initial state descriptor")->capture_default_str();
    sub->add_option("--sample-interval", sim.sample_interval, "Time between samples")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
  }
  simulate_cmd->add_flag("--events", sim.events, "Write events.csv");
  simulate_cmd->add_option("--log-from", sim.log_from, "Start of the event log window")->capture_default_str();
  simulate_cmd->add_option("--log-to", sim.log_to, "End of the event log window");
  simulate_cmd->add_option("--log-copy", sim.log_copy, "Only log events touching this copy");
  compare->add_option("--ks-copy", ks_copy, "Copy whose arrivals are tested")->capture_default_str();
  compare->add_option("--ks-from", ks_from, "Start of the KS window (default t_end / 2)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    fs::create_directories(opt.out_dir);
    const Context c(opt, out, load_spec(opt.spec));
    if (*validate) return cmd_validate(c);
    if (*nlmp) return cmd_nlmp(c, init, stride, dump_weights);
    if (*stationary) return cmd_stationary(c, tol);
    if (*couple) return cmd_couple(c, init_a, init_b, stride);
    if (*ergodicity) return cmd_ergodicity(c, init_a, init_b, stride, coupled_K);
    if (*simulate_cmd) return cmd_simulate(c, sim);
    if (*compare) return cmd_compare(c, sim, ks_copy, ks_from);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace mfnet::cli
