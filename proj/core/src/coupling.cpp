#include "mfnet/coupling.hpp"

#include <algorithm>
#include <cmath>

#include "mfnet/error.hpp"
#include "rk4.hpp"

namespace mfnet {

namespace {

struct FlowScratch {
  std::vector<double> row, col;
};

void flows_into(std::span<const double> white, std::span<const double> red, std::size_t n,
                const ValidatedNetwork& net, const WordSpace& space, FlowScratch& scratch,
                CoupledFlows& f) {
  const int nj = net.num_classes();
  scratch.row.assign(n, 0.0);
  scratch.col.assign(n, 0.0);
  for (std::size_t y = 0; y < n; ++y) {
    const double* r = red.data() + y * n;
    double s = 0.0;
    for (std::size_t z = 0; z < n; ++z) {
      s += r[z];
      scratch.col[z] += r[z];
    }
    scratch.row[y] = s;
  }
  f.u_white.assign(nj, 0.0);
  f.u_first.assign(nj, 0.0);
  f.u_second.assign(nj, 0.0);
  accumulate_outflow(space, white, f.u_white);
  accumulate_outflow(space, scratch.row, f.u_first);
  accumulate_outflow(space, scratch.col, f.u_second);
  f.v_white = internal_inflow(net.routing(), f.u_white);
  f.v_first = internal_inflow(net.routing(), f.u_first);
  f.v_second = internal_inflow(net.routing(), f.u_second);
  f.v_total.resize(nj);
  for (int j = 0; j < nj; ++j) f.v_total[j] = f.v_white[j] + f.v_first[j] + f.v_second[j];
}

/// Writes dW and dR and returns the leak flux.
double rhs_into(std::span<const double> white, std::span<const double> red, std::size_t n,
                std::span<const double> lambda, const CoupledFlows& f, const WordSpace& space,
                std::span<double> d_white, std::span<double> d_red) {
  const int nj = space.num_classes();
  constexpr auto kOut = WordSpace::kOutside;
  std::vector<double> paired(nj);
  double total = 0.0;
  for (int j = 0; j < nj; ++j) {
    paired[j] = lambda[j] + f.v_white[j];
    total += paired[j] + f.v_first[j] + f.v_second[j];
  }
  std::fill(d_white.begin(), d_white.end(), 0.0);
  std::fill(d_red.begin(), d_red.end(), 0.0);
  double leak = 0.0;

  for (std::size_t x = 0; x < n; ++x) {
    const double m = white[x];
    if (m == 0.0) continue;
    d_white[x] -= m * (total + space.total_rate(x));
    for (int j = 0; j < nj; ++j) {
      const std::uint32_t t = space.arrival_target(x, j);
      if (t == kOut) {
        leak += m * (paired[j] + f.v_first[j] + f.v_second[j]);
        continue;
      }
      d_white[t] += m * paired[j];
      d_red[t * n + x] += m * f.v_first[j];
      d_red[x * n + t] += m * f.v_second[j];
    }
    for (const auto& s : space.services(x)) d_white[s.target] += m * s.rate;
  }

  for (std::size_t y = 0; y < n; ++y) {
    const double* row = red.data() + y * n;
    const double gy = space.total_rate(y);
    const auto sy = space.services(y);
    for (std::size_t z = 0; z < n; ++z) {
      const double m = row[z];
      if (m == 0.0) continue;
      d_red[y * n + z] -= m * (total + gy + space.total_rate(z));
      for (int j = 0; j < nj; ++j) {
        const std::uint32_t ty = space.arrival_target(y, j);
        const std::uint32_t tz = space.arrival_target(z, j);
        if (ty == kOut || tz == kOut) {
          leak += m * paired[j];
        } else {
          d_red[ty * n + tz] += m * paired[j];
        }
        if (ty == kOut) {
          leak += m * f.v_first[j];
        } else {
          d_red[ty * n + z] += m * f.v_first[j];
        }
        if (tz == kOut) {
          leak += m * f.v_second[j];
        } else {
          d_red[y * n + tz] += m * f.v_second[j];
        }
      }
      for (const auto& s : sy) {
        if (s.target == 0 && z == 0) {
          d_white[0] += m * s.rate;
        } else {
          d_red[s.target * n + z] += m * s.rate;
        }
      }
      for (const auto& s : space.services(z)) {
        if (s.target == 0 && y == 0) {
          d_white[0] += m * s.rate;
        } else {
          d_red[y * n + s.target] += m * s.rate;
        }
      }
    }
  }
  return leak;
}

void check_state(const CoupledState& state, const WordSpace& space) {
  const std::size_t n = space.size();
  if (state.num_words != n || state.white.size() != n || state.red.size() != n * n) {
    throw Error(ErrorCode::TruncationMismatch, "coupled state does not match the word space");
  }
}

}  // namespace

CoupledState CoupledState::zero(std::size_t num_words) {
  CoupledState s;
  s.num_words = num_words;
  s.white.assign(num_words, 0.0);
  s.red.assign(num_words * num_words, 0.0);
  return s;
}

double CoupledState::white_mass() const {
  double s = 0.0;
  for (double w : white) s += w;
  return s;
}

double CoupledState::red_mass() const {
  double s = 0.0;
  for (double r : red) s += r;
  return s;
}

CoupledFlows coupled_flows(const CoupledState& state, const ValidatedNetwork& net, const WordSpace& space) {
  check_state(state, space);
  FlowScratch scratch;
  CoupledFlows f;
  flows_into(state.white, state.red, state.num_words, net, space, scratch, f);
  return f;
}

CoupledDerivative coupled_rhs(const CoupledState& state, std::span<const double> lambda,
                              const ValidatedNetwork& net, const WordSpace& space) {
  check_state(state, space);
  const std::size_t n = state.num_words;
  FlowScratch scratch;
  CoupledFlows f;
  flows_into(state.white, state.red, n, net, space, scratch, f);
  CoupledDerivative d;
  d.d_white.assign(n, 0.0);
  d.d_red.assign(n * n, 0.0);
  d.leak_flux = rhs_into(state.white, state.red, n, lambda, f, space, d.d_white, d.d_red);
  return d;
}

CoupledState greedy_coupling(const MeasureState& first, const MeasureState& second) {
  if (first.weights.size() != second.weights.size()) {
    throw Error(ErrorCode::TruncationMismatch, "measures live on different word spaces");
  }
  if (std::abs(first.leaked_mass - second.leaked_mass) > 1e-12 ||
      std::abs(first.mass() - second.mass()) > 1e-12) {
    throw Error(ErrorCode::InvalidArgument, "coupled measures must carry equal mass");
  }
  const std::size_t n = first.weights.size();
  CoupledState s = CoupledState::zero(n);
  s.time = first.time;
  s.leaked_mass = std::min(first.leaked_mass, second.leaked_mass);
  std::vector<double> a(n), b(n);
  for (std::size_t x = 0; x < n; ++x) {
    s.white[x] = std::min(first.weights[x], second.weights[x]);
    a[x] = first.weights[x] - s.white[x];
    b[x] = second.weights[x] - s.white[x];
  }
  std::size_t i = 0;
  std::size_t k = 0;
  while (true) {
    while (i < n && a[i] <= 0.0) ++i;
    while (k < n && b[k] <= 0.0) ++k;
    if (i == n || k == n) break;
    const double q = std::min(a[i], b[k]);
    s.red_at(i, k) += q;
    a[i] -= q;
    b[k] -= q;
    if (a[i] <= b[k]) a[i] = 0.0; else b[k] = 0.0;
  }
  return s;
}

std::pair<MeasureState, MeasureState> marginals(const CoupledState& state) {
  const std::size_t n = state.num_words;
  MeasureState first, second;
  first.weights = state.white;
  second.weights = state.white;
  first.time = second.time = state.time;
  first.leaked_mass = second.leaked_mass = state.leaked_mass;
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t z = 0; z < n; ++z) {
      const double m = state.red[y * n + z];
      first.weights[y] += m;
      second.weights[z] += m;
    }
  }
  return {std::move(first), std::move(second)};
}

double red_remaining_services(const CoupledState& state, const ValidatedNetwork& net, const WordSpace& space) {
  check_state(state, space);
  const auto& h = net.remaining_services().h;
  const std::size_t n = state.num_words;
  std::vector<double> weight(n);
  for (std::size_t x = 0; x < n; ++x) weight[x] = queue_weight(space.word(x), h);
  double s = 0.0;
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t z = 0; z < n; ++z) {
      const double m = state.red[y * n + z];
      if (m != 0.0) s += m * (weight[y] + weight[z]);
    }
  }
  return s;
}

CoupledTrajectory integrate_coupled(const CoupledState& state0, const SolverConfig& cfg,
                                    const ValidatedNetwork& net, double red_threshold) {
  if (!(cfg.dt > 0.0) || cfg.dt > max_stable_dt(net) * (1.0 + 1e-12)) {
    throw Error(ErrorCode::StepSizeUnstable, "dt outside the stability guard");
  }
  const WordSpace space(net.num_classes(), cfg.K, net.discipline());
  check_state(state0, space);
  const std::size_t n = space.size();
  const std::size_t red_begin = n;
  const std::size_t leak_at = n + n * n;
  if (cfg.t_end < state0.time) {
    throw Error(ErrorCode::InvalidArgument, "t_end lies before the initial time");
  }

  detail::check_breakpoints(net, state0.time, cfg.t_end, cfg.dt);

  std::vector<double> y(leak_at + 1);
  std::copy(state0.white.begin(), state0.white.end(), y.begin());
  std::copy(state0.red.begin(), state0.red.end(), y.begin() + static_cast<std::ptrdiff_t>(red_begin));
  y[leak_at] = state0.leaked_mass;

  FlowScratch scratch;
  CoupledFlows flows;
  std::span<const double> lambda;
  auto rhs = [&](std::span<const double> s, std::span<double> ds) {
    const auto white = s.first(n);
    const auto red = s.subspan(red_begin, n * n);
    flows_into(white, red, n, net, space, scratch, flows);
    ds[leak_at] = rhs_into(white, red, n, lambda, flows, space, ds.first(n), ds.subspan(red_begin, n * n));
  };

  CoupledState current = state0;
  auto unpack = [&](double t) {
    std::copy(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n), current.white.begin());
    std::copy(y.begin() + static_cast<std::ptrdiff_t>(red_begin), y.begin() + static_cast<std::ptrdiff_t>(leak_at),
              current.red.begin());
    current.leaked_mass = y[leak_at];
    current.time = t;
  };
  auto red_mass = [&] {
    double s = 0.0;
    for (std::size_t i = red_begin; i < leak_at; ++i) s += y[i];
    return s;
  };

  CoupledTrajectory traj;
  double integral = 0.0;
  auto record = [&](double t, double r) {
    unpack(t);
    CoupledSample smp;
    smp.time = t;
    smp.white_mass = current.white_mass();
    smp.red_mass = r;
    smp.leaked = current.leaked_mass;
    auto [first, second] = marginals(current);
    smp.tv_actual = tv_distance(first, second);
    smp.red_L = red_remaining_services(current, net, space);
    smp.red_integral = integral;
    if (cfg.record_weights) {
      smp.first = std::move(first);
      smp.second = std::move(second);
    }
    traj.samples.push_back(std::move(smp));
  };

  const double t0 = state0.time;
  const auto steps = static_cast<std::size_t>(std::llround((cfg.t_end - t0) / cfg.dt));
  const std::size_t stride = std::max<std::size_t>(cfg.output_stride, 1);
  double r_prev = red_mass();
  if (r_prev < red_threshold) traj.red_below_threshold_time = t0;
  record(t0, r_prev);
  detail::Rk4Workspace ws;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t_start = t0 + static_cast<double>(k - 1) * cfg.dt;
    lambda = net.lambda_at(t_start + 0.5 * cfg.dt);
    detail::rk4_step(y, cfg.dt, rhs, ws);
    const double t = t0 + static_cast<double>(k) * cfg.dt;
    detail::sanitize_weights(std::span<double>(y).first(leak_at), y[leak_at], t);
    const double r = red_mass();
    integral += 0.5 * cfg.dt * (r_prev + r);
    r_prev = r;
    if (!traj.red_below_threshold_time && r < red_threshold) traj.red_below_threshold_time = t;
    if (k % stride == 0 || k == steps) record(t, r);
  }
  unpack(t0 + static_cast<double>(steps) * cfg.dt);
  traj.final_state = std::move(current);
  return traj;
}

}  // namespace mfnet
