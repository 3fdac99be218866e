#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "mfnet/measure.hpp"
#include "mfnet/network.hpp"

namespace mfnet {

/// Configuration of M interconnected copies of the base network.
struct EnsembleState {
  std::vector<QueueWord> queues;
  double time = 0.0;

  static EnsembleState empty(std::size_t M) { return EnsembleState{std::vector<QueueWord>(M), 0.0}; }
};

enum class EventKind { ExternalArrival, ServiceLeave, ServiceRoute };

std::string_view to_string(EventKind kind);

struct EventRecord {
  double time = 0.0;
  EventKind kind = EventKind::ExternalArrival;
  std::uint32_t copy = 0;
  std::int64_t target = -1;  // receiving copy of a routed customer, else -1
  int class_before = 0;      // one-based label; for arrivals the arriving class
  int class_after = 0;       // one-based label; 0 when the customer leaves

  friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct SimulationConfig {
  std::size_t M = 1000;
  double t_end = 100.0;
  std::uint64_t seed = 1;
  /// Empirical measures are taken on X_K every sample_interval time units.
  double sample_interval = 1.0;
  int K = 8;
  std::optional<EnsembleState> initial;

  bool log_events = false;
  double log_from = 0.0;
  double log_to = 1e300;
  /// When set, only events whose source or target is this copy are logged.
  std::optional<std::uint32_t> log_copy;
};

struct SimulationSample {
  double time = 0.0;
  MeasureState empirical;
  double occupancy = 0.0;                 // fraction of nonempty queues
  std::vector<std::uint64_t> arrivals;    // cumulative external + routed arrivals per class
  std::vector<std::uint64_t> departures;  // cumulative service completions per class
};

struct SimulationSummary {
  std::vector<SimulationSample> samples;
  std::vector<EventRecord> events;
  EnsembleState final_state;
  std::uint64_t event_count = 0;
  double mean_occupancy = 0.0;  // time average of the nonempty fraction
  std::vector<std::uint64_t> external_arrivals;
  std::vector<std::uint64_t> routed_arrivals;
  std::vector<std::uint64_t> services;
};

/// Exact-jump simulation of the mean-field network G_M. Per copy, class j
/// arrives externally at rate λ_j; a class i service at copy m (rate γ(x_m, i))
/// leaves with probability p_i0 or joins copy m' as class j at rate
/// p_ij γ(x_m, i) / M for every m', m' = m included.
SimulationSummary simulate(const ValidatedNetwork& net, const SimulationConfig& cfg);

/// (1/M) Σ δ_{x_m} on X_K; longer queues are pooled into leaked_mass.
MeasureState empirical_measure(const EnsembleState& state, const WordSpace& space);

/// Gaps between consecutive class-j arrivals (external or routed) at one copy
/// inside [t_from, t_to], in time order.
std::vector<double> interarrival_samples(std::span<const EventRecord> events, std::uint32_t copy,
                                         ClassId cls, double t_from, double t_to);

struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
  std::size_t n = 0;
};

/// One-sample Kolmogorov-Smirnov test against Exp(rate), p-value from the
/// asymptotic Kolmogorov distribution. Needs at least 20 samples.
KsResult ks_exponential(std::span<const double> gaps, double rate);

/// Survival function of the Kolmogorov distribution, P(K > x).
double kolmogorov_survival(double x);

}  // namespace mfnet
