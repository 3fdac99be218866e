#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "mfnet/measure.hpp"
#include "mfnet/network.hpp"

namespace mfnet {

/// Fixed-step RK4 settings shared by the NLMP, split and coupled solvers.
struct SolverConfig {
  int K = 8;
  double dt = 0.01;
  double t_end = 10.0;
  /// Record a sample every `output_stride` steps (and always at t = 0 and t_end).
  std::size_t output_stride = 100;
  bool record_weights = false;
};

FlowRates compute_flows(const MeasureState& mu, std::span<const double> lambda,
                        const ValidatedNetwork& net, const WordSpace& space);

struct MasterDerivative {
  std::vector<double> d;   // dμ(y) per word
  double leak_flux = 0.0;  // rate of mass absorbed at the truncation boundary
};

/// Right-hand side of the master equation for given inflow rates v.
MasterDerivative master_rhs(const MeasureState& mu, std::span<const double> v, const WordSpace& space);

struct LyapunovReport {
  double L = 0.0;      // Σ L(x) μ(x)
  double S = 0.0;      // mean service rate Σ_{x≠∅} γ(x) μ(x)
  double alpha = 0.0;  // mass of nonempty queues
  double drift = 0.0;  // Σ λ_j h(j) − S
};

LyapunovReport lyapunov_report(const MeasureState& mu, std::span<const double> lambda,
                               const ValidatedNetwork& net, const WordSpace& space);

struct GeometricBounds {
  double kappa = 0.0;            // |J| ε / γ₋
  double p0_lower = 1.0;         // 1 − ϰ
  double mean_upper = 0.0;       // ϰ / (1 − ϰ)
  double tail_mean_upper = 0.0;  // ϰ² / (1 − ϰ)
};

/// Bounds of the geometric single-queue majorant. Throws KappaNotSubcritical if ϰ ≥ 1.
GeometricBounds geometric_bounds(double epsilon, double gamma_minus, int num_classes);

struct TrajectorySample {
  double time = 0.0;
  double mass = 0.0;
  double leaked = 0.0;
  FlowRates flows;
  LyapunovReport lyapunov;
  std::vector<double> weights;  // only when SolverConfig::record_weights
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  MeasureState final_state;
  /// First step time where α(μ_t) ≤ |J| λ₊ h_max / γ₋.
  std::optional<double> alpha_threshold_time;
};

/// Step-by-step RK4 integrator of the master equation. The inflow v is
/// recomputed from the stage measure inside every RK stage.
class NlmpSolver {
 public:
  NlmpSolver(const ValidatedNetwork& net, const WordSpace& space, double dt);
  ~NlmpSolver();
  NlmpSolver(NlmpSolver&&) noexcept;

  /// Advances μ by one step of size dt. Throws StepSizeUnstable when a weight
  /// drops below −1e-9; smaller undershoots are clipped to 0 and booked
  /// against leaked_mass.
  void step(MeasureState& mu);
  TrajectorySample sample(const MeasureState& mu, bool with_weights) const;
  Trajectory run(MeasureState mu, double t_end, std::size_t output_stride, bool record_weights);

  const WordSpace& space() const { return space_; }
  double dt() const { return dt_; }

 private:
  const ValidatedNetwork& net_;
  const WordSpace& space_;
  double dt_;
  struct Workspace;
  std::unique_ptr<Workspace> ws_;
};

/// Largest dt accepted for a network: dt·(λ₊|J| + γ₊ + V|J|) ≤ 0.1.
double max_stable_dt(const ValidatedNetwork& net);

Trajectory integrate(const MeasureState& mu0, const SolverConfig& cfg, const ValidatedNetwork& net);

/// Fixed point w* = Pᵀ(λ + w*) for constant λ, by direct solve, cross-checked
/// by fixed-point iteration.
std::vector<double> stationary_internal_flow(const ValidatedNetwork& net);

struct StationaryResult {
  MeasureState state;
  double residual = 0.0;  // sup-norm of d/dt of the normalized measure at exit
  FlowRates flows;
  std::vector<double> w_star;
  double flow_defect = 0.0;  // max_j |w_j − w*_j|
};

/// Integrates from δ_∅ under constant λ until the sup-norm of the normalized
/// master derivative falls below `tolerance`. Throws NoConvergenceWithinHorizon
/// if that does not happen by cfg.t_end.
StationaryResult stationary_state(const ValidatedNetwork& net, const SolverConfig& cfg,
                                  double tolerance = 1e-10);

struct SplitTrajectory {
  std::vector<double> times;
  std::vector<MeasureState> first;
  std::vector<MeasureState> second;
};

/// Evolves μ¹ and μ² under the shared inflow v' = λ + ρw¹ + (1−ρ)w².
SplitTrajectory split_integrate(const MeasureState& mu1, const MeasureState& mu2, double rho,
                                const SolverConfig& cfg, const ValidatedNetwork& net);

/// Weighted sum ρa + (1−ρ)b, including the leak ledger.
MeasureState mix(const MeasureState& a, const MeasureState& b, double rho);

}  // namespace mfnet
