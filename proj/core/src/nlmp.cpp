#include "mfnet/nlmp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "linalg.hpp"
#include "mfnet/error.hpp"
#include "rk4.hpp"

namespace mfnet {

namespace {

/// Writes dμ into d and returns the leak flux.
double master_rhs_into(const WordSpace& space, std::span<const double> weights,
                       std::span<const double> v, std::span<double> d) {
  const int nj = space.num_classes();
  double v_total = 0.0;
  for (int j = 0; j < nj; ++j) v_total += v[j];
  std::fill(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(space.size()), 0.0);
  double leak = 0.0;
  for (std::size_t x = 0; x < space.size(); ++x) {
    const double m = weights[x];
    if (m == 0.0) continue;
    d[x] -= m * (v_total + space.total_rate(x));
    for (int j = 0; j < nj; ++j) {
      const std::uint32_t t = space.arrival_target(x, j);
      if (t == WordSpace::kOutside) {
        leak += m * v[j];
      } else {
        d[t] += m * v[j];
      }
    }
    for (const auto& s : space.services(x)) d[s.target] += m * s.rate;
  }
  return leak;
}

void inflow_into(const ValidatedNetwork& net, const WordSpace& space, std::span<const double> weights,
                 std::span<const double> lambda, std::vector<double>& u, std::vector<double>& v) {
  const int nj = net.num_classes();
  u.assign(nj, 0.0);
  accumulate_outflow(space, weights, u);
  const auto w = internal_inflow(net.routing(), u);
  v.resize(nj);
  for (int j = 0; j < nj; ++j) v[j] = lambda[j] + w[j];
}

}  // namespace

void detail::check_breakpoints(const ValidatedNetwork& net, double t0, double t_end, double dt) {
  for (const auto& b : net.lambda().breakpoints()) {
    if (b.time <= t0 || b.time > t_end) continue;
    const double steps = (b.time - t0) / dt;
    if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
      std::ostringstream os;
      os << "lambda breakpoint t=" << b.time << " is not on a step boundary of dt=" << dt;
      throw Error(ErrorCode::InvalidArgument, os.str());
    }
  }
}

namespace {

std::size_t step_count(double t0, double t_end, double dt) {
  if (t_end < t0) throw Error(ErrorCode::InvalidArgument, "t_end lies before the initial time");
  return static_cast<std::size_t>(std::llround((t_end - t0) / dt));
}

void check_measure(const MeasureState& mu, const WordSpace& space) {
  if (mu.weights.size() != space.size()) {
    throw Error(ErrorCode::TruncationMismatch,
                "measure has " + std::to_string(mu.weights.size()) + " weights, word space has " +
                    std::to_string(space.size()));
  }
}

}  // namespace

FlowRates compute_flows(const MeasureState& mu, std::span<const double> lambda,
                        const ValidatedNetwork& net, const WordSpace& space) {
  check_measure(mu, space);
  FlowRates f;
  f.u.assign(net.num_classes(), 0.0);
  accumulate_outflow(space, mu.weights, f.u);
  f.w = internal_inflow(net.routing(), f.u);
  f.v.resize(f.w.size());
  for (std::size_t j = 0; j < f.w.size(); ++j) f.v[j] = lambda[j] + f.w[j];
  return f;
}

MasterDerivative master_rhs(const MeasureState& mu, std::span<const double> v, const WordSpace& space) {
  check_measure(mu, space);
  MasterDerivative out;
  out.d.assign(space.size(), 0.0);
  out.leak_flux = master_rhs_into(space, mu.weights, v, out.d);
  return out;
}

LyapunovReport lyapunov_report(const MeasureState& mu, std::span<const double> lambda,
                               const ValidatedNetwork& net, const WordSpace& space) {
  check_measure(mu, space);
  const auto& h = net.remaining_services().h;
  LyapunovReport r;
  for (std::size_t x = 1; x < space.size(); ++x) {
    const double m = mu.weights[x];
    if (m == 0.0) continue;
    r.L += m * queue_weight(space.word(x), h);
    r.S += m * space.total_rate(x);
    r.alpha += m;
  }
  double input = 0.0;
  for (int j = 0; j < net.num_classes(); ++j) input += lambda[j] * h[j];
  r.drift = input - r.S;
  return r;
}

GeometricBounds geometric_bounds(double epsilon, double gamma_minus, int num_classes) {
  if (epsilon < 0.0 || !(gamma_minus > 0.0) || num_classes < 1) {
    throw Error(ErrorCode::InvalidArgument, "need epsilon >= 0, gamma_minus > 0, |J| >= 1");
  }
  GeometricBounds b;
  b.kappa = num_classes * epsilon / gamma_minus;
  if (b.kappa >= 1.0) {
    std::ostringstream os;
    os << "kappa = " << b.kappa;
    throw Error(ErrorCode::KappaNotSubcritical, os.str());
  }
  b.p0_lower = 1.0 - b.kappa;
  b.mean_upper = b.kappa / (1.0 - b.kappa);
  b.tail_mean_upper = b.kappa * b.kappa / (1.0 - b.kappa);
  return b;
}

double max_stable_dt(const ValidatedNetwork& net) {
  const double nj = net.num_classes();
  return 0.1 / (net.lambda_plus() * nj + net.gamma_plus() + net.inflow_bound() * nj);
}

struct NlmpSolver::Workspace {
  std::vector<double> state, u, v;
  detail::Rk4Workspace rk;
};

NlmpSolver::~NlmpSolver() = default;
NlmpSolver::NlmpSolver(NlmpSolver&&) noexcept = default;

NlmpSolver::NlmpSolver(const ValidatedNetwork& net, const WordSpace& space, double dt)
    : net_(net), space_(space), dt_(dt), ws_(std::make_unique<Workspace>()) {
  if (!(dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "dt must be positive");
  if (dt > max_stable_dt(net) * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "dt=" << dt << " exceeds the stability guard " << max_stable_dt(net);
    throw Error(ErrorCode::StepSizeUnstable, os.str());
  }
  if (space.num_classes() != net.num_classes()) {
    throw Error(ErrorCode::InvalidArgument, "word space alphabet does not match the network");
  }
}

void NlmpSolver::step(MeasureState& mu) {
  check_measure(mu, space_);
  const std::size_t n = space_.size();
  const auto lambda = net_.lambda_at(mu.time + 0.5 * dt_);
  auto& state = ws_->state;
  state.assign(mu.weights.begin(), mu.weights.end());
  state.push_back(mu.leaked_mass);
  auto rhs = [&](std::span<const double> y, std::span<double> dy) {
    inflow_into(net_, space_, y.first(n), lambda, ws_->u, ws_->v);
    dy[n] = master_rhs_into(space_, y.first(n), ws_->v, dy);
  };
  detail::rk4_step(state, dt_, rhs, ws_->rk);
  mu.time += dt_;
  detail::sanitize_weights(std::span<double>(state).first(n), state[n], mu.time);
  std::copy(state.begin(), state.begin() + static_cast<std::ptrdiff_t>(n), mu.weights.begin());
  mu.leaked_mass = state[n];
}

TrajectorySample NlmpSolver::sample(const MeasureState& mu, bool with_weights) const {
  TrajectorySample s;
  s.time = mu.time;
  s.mass = mu.mass();
  s.leaked = mu.leaked_mass;
  const auto lambda = net_.lambda_at(mu.time);
  s.flows = compute_flows(mu, lambda, net_, space_);
  s.lyapunov = lyapunov_report(mu, lambda, net_, space_);
  if (with_weights) s.weights = mu.weights;
  return s;
}

Trajectory NlmpSolver::run(MeasureState mu, double t_end, std::size_t output_stride, bool record_weights) {
  check_measure(mu, space_);
  detail::check_breakpoints(net_, mu.time, t_end, dt_);
  const std::size_t steps = step_count(mu.time, t_end, dt_);
  const double t0 = mu.time;
  const double threshold = net_.num_classes() * net_.lambda_plus() *
                           net_.remaining_services().h_max / net_.gamma_minus();
  const std::size_t stride = std::max<std::size_t>(output_stride, 1);

  Trajectory traj;
  auto check_alpha = [&] {
    if (!traj.alpha_threshold_time && 1.0 - mu.empty_mass() - mu.leaked_mass <= threshold) {
      traj.alpha_threshold_time = mu.time;
    }
  };
  traj.samples.push_back(sample(mu, record_weights));
  check_alpha();
  for (std::size_t k = 1; k <= steps; ++k) {
    step(mu);
    mu.time = t0 + static_cast<double>(k) * dt_;
    check_alpha();
    if (k % stride == 0 || k == steps) traj.samples.push_back(sample(mu, record_weights));
  }
  traj.final_state = std::move(mu);
  return traj;
}

Trajectory integrate(const MeasureState& mu0, const SolverConfig& cfg, const ValidatedNetwork& net) {
  const WordSpace space(net.num_classes(), cfg.K, net.discipline());
  NlmpSolver solver(net, space, cfg.dt);
  return solver.run(mu0, cfg.t_end, cfg.output_stride, cfg.record_weights);
}

std::vector<double> stationary_internal_flow(const ValidatedNetwork& net) {
  if (!net.lambda().is_constant()) {
    throw Error(ErrorCode::InvalidArgument, "stationary flow needs constant external rates");
  }
  const auto& p = net.routing();
  const int n = p.size();
  const auto lambda = net.lambda_at(0.0);
  // (I − Pᵀ) w = Pᵀ λ
  std::vector<double> a(static_cast<std::size_t>(n) * n);
  std::vector<double> b(n, 0.0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      a[j * n + i] = (i == j ? 1.0 : 0.0) - p.at(i, j);
      b[j] += p.at(i, j) * lambda[i];
    }
  }
  std::vector<double> w = detail::solve_dense(std::move(a), std::move(b));

  std::vector<double> it(n, 0.0);
  for (int k = 0; k < 100'000; ++k) {
    std::vector<double> next(n, 0.0);
    double change = 0.0;
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < n; ++i) next[j] += p.at(i, j) * (lambda[i] + it[i]);
      change = std::max(change, std::abs(next[j] - it[j]));
    }
    it = std::move(next);
    if (change < 1e-15) break;
  }
  for (int j = 0; j < n; ++j) {
    if (std::abs(it[j] - w[j]) > 1e-12 * std::max(1.0, std::abs(w[j]))) {
      throw Error(ErrorCode::SingularSystem, "direct solve and fixed-point iteration disagree");
    }
  }
  return w;
}

StationaryResult stationary_state(const ValidatedNetwork& net, const SolverConfig& cfg, double tolerance) {
  if (!net.lambda().is_constant()) {
    throw Error(ErrorCode::InvalidArgument, "stationary state needs constant external rates");
  }
  const WordSpace space(net.num_classes(), cfg.K, net.discipline());
  NlmpSolver solver(net, space, cfg.dt);
  const auto lambda = net.lambda_at(0.0);
  MeasureState mu = MeasureState::empty_queue(space);

  // Mass absorbed at the boundary makes μ decay slowly, so convergence is
  // judged on the normalized measure ν = μ / Σμ.
  auto residual = [&] {
    const FlowRates f = compute_flows(mu, lambda, net, space);
    const MasterDerivative d = master_rhs(mu, f.v, space);
    const double m = mu.mass();
    double r = 0.0;
    for (std::size_t x = 0; x < space.size(); ++x) {
      r = std::max(r, std::abs((d.d[x] + mu.weights[x] / m * d.leak_flux) / m));
    }
    return r;
  };

  const std::size_t steps = step_count(0.0, cfg.t_end, cfg.dt);
  double res = residual();
  for (std::size_t k = 1; k <= steps && res >= tolerance; ++k) {
    solver.step(mu);
    mu.time = static_cast<double>(k) * cfg.dt;
    if (k % 10 == 0 || k == steps) res = residual();
  }
  if (res >= tolerance) {
    std::ostringstream os;
    os << "residual " << res << " at t=" << mu.time;
    throw Error(ErrorCode::NoConvergenceWithinHorizon, os.str());
  }

  StationaryResult out;
  out.residual = res;
  out.flows = compute_flows(mu, lambda, net, space);
  out.w_star = stationary_internal_flow(net);
  for (std::size_t j = 0; j < out.w_star.size(); ++j) {
    out.flow_defect = std::max(out.flow_defect, std::abs(out.flows.w[j] - out.w_star[j]));
  }
  out.state = std::move(mu);
  return out;
}

SplitTrajectory split_integrate(const MeasureState& mu1, const MeasureState& mu2, double rho,
                                const SolverConfig& cfg, const ValidatedNetwork& net) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw Error(ErrorCode::InvalidArgument, "rho must lie in [0, 1]");
  if (!(cfg.dt > 0.0) || cfg.dt > max_stable_dt(net) * (1.0 + 1e-12)) {
    throw Error(ErrorCode::StepSizeUnstable, "dt outside the stability guard");
  }
  const WordSpace space(net.num_classes(), cfg.K, net.discipline());
  check_measure(mu1, space);
  check_measure(mu2, space);
  detail::check_breakpoints(net, mu1.time, cfg.t_end, cfg.dt);
  const std::size_t n = space.size();
  const int nj = net.num_classes();

  // Layout: [μ¹, leak¹, μ², leak²].
  std::vector<double> y(2 * (n + 1));
  std::copy(mu1.weights.begin(), mu1.weights.end(), y.begin());
  y[n] = mu1.leaked_mass;
  std::copy(mu2.weights.begin(), mu2.weights.end(), y.begin() + static_cast<std::ptrdiff_t>(n + 1));
  y[2 * n + 1] = mu2.leaked_mass;

  std::vector<double> u1, u2, v(nj);
  detail::Rk4Workspace ws;
  std::span<const double> lambda;
  auto rhs = [&](std::span<const double> s, std::span<double> ds) {
    const auto a = s.first(n);
    const auto b = s.subspan(n + 1, n);
    u1.assign(nj, 0.0);
    u2.assign(nj, 0.0);
    accumulate_outflow(space, a, u1);
    accumulate_outflow(space, b, u2);
    const auto w1 = internal_inflow(net.routing(), u1);
    const auto w2 = internal_inflow(net.routing(), u2);
    for (int j = 0; j < nj; ++j) v[j] = lambda[j] + (rho * w1[j] + (1.0 - rho) * w2[j]);
    ds[n] = master_rhs_into(space, a, v, ds.first(n));
    ds[2 * n + 1] = master_rhs_into(space, b, v, ds.subspan(n + 1, n));
  };

  SplitTrajectory out;
  auto record = [&](double t) {
    MeasureState a, b;
    a.weights.assign(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n));
    a.leaked_mass = y[n];
    a.time = t;
    b.weights.assign(y.begin() + static_cast<std::ptrdiff_t>(n + 1), y.begin() + static_cast<std::ptrdiff_t>(2 * n + 1));
    b.leaked_mass = y[2 * n + 1];
    b.time = t;
    out.times.push_back(t);
    out.first.push_back(std::move(a));
    out.second.push_back(std::move(b));
  };

  const double t0 = mu1.time;
  const std::size_t steps = step_count(t0, cfg.t_end, cfg.dt);
  const std::size_t stride = std::max<std::size_t>(cfg.output_stride, 1);
  record(t0);
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t_start = t0 + static_cast<double>(k - 1) * cfg.dt;
    lambda = net.lambda_at(t_start + 0.5 * cfg.dt);
    detail::rk4_step(y, cfg.dt, rhs, ws);
    const double t = t0 + static_cast<double>(k) * cfg.dt;
    detail::sanitize_weights(std::span<double>(y).first(n), y[n], t);
    detail::sanitize_weights(std::span<double>(y).subspan(n + 1, n), y[2 * n + 1], t);
    if (k % stride == 0 || k == steps) record(t);
  }
  return out;
}

MeasureState mix(const MeasureState& a, const MeasureState& b, double rho) {
  if (a.weights.size() != b.weights.size()) {
    throw Error(ErrorCode::TruncationMismatch, "measures live on different word spaces");
  }
  MeasureState m;
  m.time = a.time;
  m.weights.resize(a.weights.size());
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    m.weights[i] = rho * a.weights[i] + (1.0 - rho) * b.weights[i];
  }
  m.leaked_mass = rho * a.leaked_mass + (1.0 - rho) * b.leaked_mass;
  return m;
}

}  // namespace mfnet
