#include "mfnet/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numbers>

#include "mfnet/error.hpp"
#include "mfnet/rng.hpp"

namespace mfnet {

namespace {

/// Binary tree of partial sums over per-copy service rates. Parents are
/// recomputed from their children on every update, so sums never drift.
class RateTree {
 public:
  explicit RateTree(std::size_t n) {
    size_ = 1;
    while (size_ < n) size_ <<= 1;
    node_.assign(2 * size_, 0.0);
  }

  void set(std::size_t i, double value) {
    std::size_t k = i + size_;
    node_[k] = value;
    for (k >>= 1; k >= 1; k >>= 1) node_[k] = node_[2 * k] + node_[2 * k + 1];
  }

  double total() const { return node_[1]; }

  /// Leaf whose cumulative range contains `target`, for 0 ≤ target < total().
  std::size_t find(double target) const {
    std::size_t k = 1;
    while (k < size_) {
      const double left = node_[2 * k];
      if (target < left || node_[2 * k + 1] == 0.0) {
        k = 2 * k;
      } else {
        target -= left;
        k = 2 * k + 1;
      }
    }
    return k - size_;
  }

 private:
  std::size_t size_;
  std::vector<double> node_;
};

using Queue = std::deque<std::uint16_t>;

double queue_rate(const Queue& q, const DisciplineSpec& d) {
  if (q.empty()) return 0.0;
  switch (d.kind) {
    case DisciplineKind::Fifo: return d.base_rate[q.front()];
    case DisciplineKind::LifoPreemptive: return d.base_rate[q.back()];
    case DisciplineKind::ProcessorSharing: {
      double s = 0.0;
      for (auto c : q) s += d.base_rate[c];
      return s / static_cast<double>(q.size());
    }
  }
  return 0.0;
}

std::size_t pick_position(const Queue& q, const DisciplineSpec& d, Philox4x32& rng) {
  switch (d.kind) {
    case DisciplineKind::Fifo: return 0;
    case DisciplineKind::LifoPreemptive: return q.size() - 1;
    case DisciplineKind::ProcessorSharing: {
      double total = 0.0;
      for (auto c : q) total += d.base_rate[c];
      double target = rng.uniform01() * total;
      for (std::size_t r = 0; r < q.size(); ++r) {
        target -= d.base_rate[q[r]];
        if (target < 0.0) return r;
      }
      return q.size() - 1;
    }
  }
  return 0;
}

std::uint32_t pick_copy(std::size_t M, Philox4x32& rng) {
  const auto m = static_cast<std::size_t>(rng.uniform01() * static_cast<double>(M));
  return static_cast<std::uint32_t>(std::min(m, M - 1));
}

QueueWord to_word(const Queue& q) {
  std::vector<ClassId> e;
  e.reserve(q.size());
  for (auto c : q) e.push_back(ClassId{c});
  return QueueWord(std::move(e));
}

MeasureState normalized(const std::vector<std::size_t>& counts, std::size_t outside, std::size_t M) {
  MeasureState mu;
  mu.weights.resize(counts.size());
  const double m = static_cast<double>(M);
  for (std::size_t i = 0; i < counts.size(); ++i) mu.weights[i] = static_cast<double>(counts[i]) / m;
  mu.leaked_mass = static_cast<double>(outside) / m;
  return mu;
}

MeasureState empirical_from(const std::vector<Queue>& queues, const WordSpace& space) {
  std::vector<std::size_t> counts(space.size(), 0);
  std::size_t outside = 0;
  for (const Queue& q : queues) {
    if (static_cast<int>(q.size()) > space.K()) {
      ++outside;
      continue;
    }
    ++counts[*space.index_of(to_word(q))];
  }
  return normalized(counts, outside, queues.size());
}

}  // namespace

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::ExternalArrival: return "external_arrival";
    case EventKind::ServiceLeave: return "service_leave";
    case EventKind::ServiceRoute: return "service_route";
  }
  return "?";
}

SimulationSummary simulate(const ValidatedNetwork& net, const SimulationConfig& cfg) {
  const std::size_t M = cfg.M;
  if (M < 1) throw Error(ErrorCode::InvalidArgument, "M must be at least 1");
  if (!(cfg.t_end >= 0.0)) throw Error(ErrorCode::InvalidArgument, "t_end must be nonnegative");
  if (!(cfg.sample_interval > 0.0)) throw Error(ErrorCode::InvalidArgument, "sample interval must be positive");
  const int nj = net.num_classes();
  const auto& disc = net.discipline();
  const auto& routing = net.routing();
  const WordSpace space(nj, cfg.K, disc);

  std::vector<Queue> queues(M);
  double t = 0.0;
  if (cfg.initial) {
    if (cfg.initial->queues.size() != M) {
      throw Error(ErrorCode::InvalidArgument, "initial ensemble must hold M queues");
    }
    t = cfg.initial->time;
    for (std::size_t m = 0; m < M; ++m) {
      for (ClassId c : cfg.initial->queues[m]) {
        if (c.index >= nj) throw Error(ErrorCode::InvalidArgument, "initial queue uses an unknown class");
        queues[m].push_back(c.index);
      }
    }
  }

  RateTree tree(M);
  std::size_t nonempty = 0;
  for (std::size_t m = 0; m < M; ++m) {
    tree.set(m, queue_rate(queues[m], disc));
    if (!queues[m].empty()) ++nonempty;
  }

  SimulationSummary out;
  out.external_arrivals.assign(nj, 0);
  out.routed_arrivals.assign(nj, 0);
  out.services.assign(nj, 0);
  Philox4x32 rng(cfg.seed, 0);

  const double t_start = t;
  std::size_t next_sample = 0;
  auto sample_time = [&](std::size_t k) { return t_start + static_cast<double>(k) * cfg.sample_interval; };
  auto emit_samples_before = [&](double limit, bool inclusive) {
    while (true) {
      const double s = sample_time(next_sample);
      if (s > cfg.t_end + 1e-9 * cfg.sample_interval) return;
      if (inclusive ? s > limit : s >= limit) return;
      SimulationSample smp;
      smp.time = s;
      smp.empirical = empirical_from(queues, space);
      smp.empirical.time = s;
      smp.occupancy = static_cast<double>(nonempty) / static_cast<double>(M);
      smp.arrivals.resize(nj);
      for (int j = 0; j < nj; ++j) smp.arrivals[j] = out.external_arrivals[j] + out.routed_arrivals[j];
      smp.departures = out.services;
      out.samples.push_back(std::move(smp));
      ++next_sample;
    }
  };
  auto log = [&](const EventRecord& e) {
    if (!cfg.log_events || e.time < cfg.log_from || e.time > cfg.log_to) return;
    if (cfg.log_copy && e.copy != *cfg.log_copy && e.target != static_cast<std::int64_t>(*cfg.log_copy)) return;
    out.events.push_back(e);
  };
  auto refresh = [&](std::size_t m, bool was_empty) {
    tree.set(m, queue_rate(queues[m], disc));
    const bool is_empty = queues[m].empty();
    if (was_empty && !is_empty) ++nonempty;
    if (!was_empty && is_empty) --nonempty;
  };

  double occupancy_integral = 0.0;
  while (true) {
    const auto lambda = net.lambda_at(t);
    double lambda_sum = 0.0;
    for (int j = 0; j < nj; ++j) lambda_sum += lambda[j];
    const double external = static_cast<double>(M) * lambda_sum;
    const double total = external + tree.total();
    const double boundary = std::min(cfg.t_end, net.lambda().next_change_after(t));
    const double t_next = total > 0.0 ? t - std::log(rng.uniform01()) / total : boundary;
    if (t_next >= boundary) {
      emit_samples_before(boundary, false);
      occupancy_integral += static_cast<double>(nonempty) / static_cast<double>(M) * (boundary - t);
      t = boundary;
      if (boundary >= cfg.t_end) break;
      continue;
    }
    emit_samples_before(t_next, false);
    occupancy_integral += static_cast<double>(nonempty) / static_cast<double>(M) * (t_next - t);
    t = t_next;
    ++out.event_count;

    const double pick = rng.uniform01() * total;
    if (pick < external) {
      double target = rng.uniform01() * lambda_sum;
      int j = nj - 1;
      for (int c = 0; c < nj; ++c) {
        target -= lambda[c];
        if (target < 0.0 && lambda[c] > 0.0) {
          j = c;
          break;
        }
      }
      while (lambda[j] == 0.0) --j;
      const std::uint32_t m = pick_copy(M, rng);
      const bool was_empty = queues[m].empty();
      queues[m].push_back(static_cast<std::uint16_t>(j));
      refresh(m, was_empty);
      ++out.external_arrivals[j];
      log(EventRecord{t, EventKind::ExternalArrival, m, -1, j + 1, j + 1});
      continue;
    }

    const std::size_t m = tree.find(pick - external);
    Queue& q = queues[m];
    if (q.empty()) continue;  // unreachable unless rounding lands on an idle copy
    const std::size_t r = pick_position(q, disc, rng);
    const int i = q[r];
    q.erase(q.begin() + static_cast<std::ptrdiff_t>(r));
    refresh(m, false);
    ++out.services[i];

    double u = rng.uniform01();
    int j = -1;
    for (int c = 0; c < nj; ++c) {
      u -= routing.at(i, c);
      if (u < 0.0) {
        j = c;
        break;
      }
    }
    if (j < 0) {
      log(EventRecord{t, EventKind::ServiceLeave, static_cast<std::uint32_t>(m), -1, i + 1, 0});
      continue;
    }
    const std::uint32_t dest = pick_copy(M, rng);
    const bool dest_was_empty = queues[dest].empty();
    queues[dest].push_back(static_cast<std::uint16_t>(j));
    refresh(dest, dest_was_empty);
    ++out.routed_arrivals[j];
    log(EventRecord{t, EventKind::ServiceRoute, static_cast<std::uint32_t>(m), dest, i + 1, j + 1});
  }
  emit_samples_before(cfg.t_end, true);

  out.mean_occupancy = cfg.t_end > t_start ? occupancy_integral / (cfg.t_end - t_start) : 0.0;
  out.final_state.time = t;
  out.final_state.queues.reserve(M);
  for (const Queue& q : queues) out.final_state.queues.push_back(to_word(q));
  return out;
}

MeasureState empirical_measure(const EnsembleState& state, const WordSpace& space) {
  if (state.queues.empty()) throw Error(ErrorCode::InvalidArgument, "empty ensemble");
  std::vector<std::size_t> counts(space.size(), 0);
  std::size_t outside = 0;
  for (const QueueWord& x : state.queues) {
    if (const auto idx = space.index_of(x)) {
      ++counts[*idx];
    } else {
      ++outside;
    }
  }
  MeasureState mu = normalized(counts, outside, state.queues.size());
  mu.time = state.time;
  return mu;
}

std::vector<double> interarrival_samples(std::span<const EventRecord> events, std::uint32_t copy,
                                         ClassId cls, double t_from, double t_to) {
  if (!(t_to > t_from)) throw Error(ErrorCode::WindowEmpty, "window must have positive length");
  const int label = cls.label();
  std::vector<double> gaps;
  double last = -1.0;
  bool have_last = false;
  for (const EventRecord& e : events) {
    if (e.time < t_from || e.time > t_to) continue;
    const bool arrival =
        (e.kind == EventKind::ExternalArrival && e.copy == copy && e.class_after == label) ||
        (e.kind == EventKind::ServiceRoute && e.target == static_cast<std::int64_t>(copy) &&
         e.class_after == label);
    if (!arrival) continue;
    if (have_last) gaps.push_back(e.time - last);
    last = e.time;
    have_last = true;
  }
  return gaps;
}

double kolmogorov_survival(double x) {
  if (x <= 0.0) return 1.0;
  constexpr double pi = std::numbers::pi;
  if (x < 1.18) {
    // P(K ≤ x) = √(2π)/x Σ exp(−(2k−1)²π²/(8x²))
    double s = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double a = (2.0 * k - 1.0) * pi / x;
      const double term = std::exp(-a * a / 8.0);
      s += term;
      if (term < 1e-17 * s) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * pi) / x * s, 0.0, 1.0);
  }
  // P(K > x) = 2 Σ (−1)^{k−1} exp(−2k²x²)
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

KsResult ks_exponential(std::span<const double> gaps, double rate) {
  if (gaps.size() < 20) {
    throw Error(ErrorCode::TooFewSamples, std::to_string(gaps.size()) + " samples, need at least 20");
  }
  if (!(rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "rate must be positive");
  std::vector<double> x(gaps.begin(), gaps.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double cdf = x[i] <= 0.0 ? 0.0 : -std::expm1(-rate * x[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - cdf, cdf - static_cast<double>(i) / n});
  }
  KsResult r;
  r.statistic = d;
  r.n = x.size();
  const double sn = std::sqrt(n);
  r.p_value = kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d);
  return r;
}

}  // namespace mfnet
