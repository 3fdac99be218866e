#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "mfnet/measure.hpp"
#include "mfnet/network.hpp"
#include "mfnet/nlmp.hpp"

namespace mfnet {

/// Red/white coupling of two NLMPs that share their inflows.
///
/// White pairs sit on the diagonal (identical, synchronized queues), so the
/// white measure W is keyed by a single word. Red pairs evolve independently
/// and R is keyed by an ordered pair (y, z), stored densely at y·N + z where N
/// is the size of the word space. The pair (∅, ∅) is always white.
struct CoupledState {
  std::size_t num_words = 0;
  std::vector<double> white;
  std::vector<double> red;
  double leaked_mass = 0.0;
  double time = 0.0;

  static CoupledState zero(std::size_t num_words);

  double red_at(std::size_t y, std::size_t z) const { return red[y * num_words + z]; }
  double& red_at(std::size_t y, std::size_t z) { return red[y * num_words + z]; }
  double white_mass() const;
  double red_mass() const;
};

/// Outflows and internal inflows of the white measure and of the two red
/// coordinates. The v members are internal inflows Pᵀu; v_total is their sum.
struct CoupledFlows {
  std::vector<double> u_white, u_first, u_second;
  std::vector<double> v_white, v_first, v_second;
  std::vector<double> v_total;
};

CoupledFlows coupled_flows(const CoupledState& state, const ValidatedNetwork& net, const WordSpace& space);

struct CoupledDerivative {
  std::vector<double> d_white;
  std::vector<double> d_red;
  double leak_flux = 0.0;
};

/// Right-hand side of the coupled system. Per unit of pair mass:
///   white x:  paired arrivals λ_j + v_j(W) keep the pair white; first-side
///             arrivals v'_j(R) send it to red (x⊕j, x), second-side arrivals
///             v''_j(R) to red (x, x⊕j); paired services keep it white.
///   red (y,z): paired arrivals λ_j + v_j(W) to (y⊕j, z⊕j); v'_j(R) to (y⊕j, z);
///             v''_j(R) to (y, z⊕j); each side is served independently, and a
///             pair that reaches (∅, ∅) turns white.
/// Any transition that would lengthen a queue past K is absorbed into the leak.
CoupledDerivative coupled_rhs(const CoupledState& state, std::span<const double> lambda,
                              const ValidatedNetwork& net, const WordSpace& space);

/// Diagonal overlap min(μ', μ'') goes to W; the remainders are paired into R
/// by a northwest-corner sweep in canonical word order.
CoupledState greedy_coupling(const MeasureState& first, const MeasureState& second);

/// (μ', μ'') with μ'(x) = W(x) + Σ_z R(x, z) and μ''(x) = W(x) + Σ_y R(y, x).
/// The leak is attributed to both marginals.
std::pair<MeasureState, MeasureState> marginals(const CoupledState& state);

/// Expected remaining services of red customers, Σ R(y,z) (L(y) + L(z)).
double red_remaining_services(const CoupledState& state, const ValidatedNetwork& net, const WordSpace& space);

struct CoupledSample {
  double time = 0.0;
  double white_mass = 0.0;
  double red_mass = 0.0;
  double leaked = 0.0;
  double tv_actual = 0.0;  // TV distance of the two marginals
  double red_L = 0.0;
  double red_integral = 0.0;  // ∫₀^t r_s ds (trapezoid over steps)
  std::optional<MeasureState> first;
  std::optional<MeasureState> second;
};

struct CoupledTrajectory {
  std::vector<CoupledSample> samples;
  CoupledState final_state;
  /// First step time at which r_t < threshold.
  std::optional<double> red_below_threshold_time;
};

/// RK4 integration of the coupled system. Marginals are stored in the samples
/// when cfg.record_weights is set.
CoupledTrajectory integrate_coupled(const CoupledState& state0, const SolverConfig& cfg,
                                    const ValidatedNetwork& net, double red_threshold = 1e-3);

}  // namespace mfnet
