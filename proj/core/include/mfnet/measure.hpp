#pragma once

#include <span>
#include <vector>

#include "mfnet/network.hpp"

namespace mfnet {

/// Probability weights over the truncated word space X_K, indexed in
/// canonical word order, plus the mass absorbed at the truncation boundary.
/// Σ weights + leaked_mass = 1 is kept as a ledger invariant.
struct MeasureState {
  std::vector<double> weights;
  double leaked_mass = 0.0;
  double time = 0.0;

  double mass() const;
  /// μ(∅).
  double empty_mass() const { return weights.empty() ? 0.0 : weights.front(); }

  static MeasureState point_mass(const WordSpace& space, const QueueWord& x);
  static MeasureState empty_queue(const WordSpace& space) { return point_mass(space, {}); }
};

/// Per-class flow rates: outflow u, internal inflow w = Pᵀu, total inflow v = λ + w.
struct FlowRates {
  std::vector<double> u;
  std::vector<double> w;
  std::vector<double> v;
};

/// w_j = Σ_i p_ij u_i.
std::vector<double> internal_inflow(const RoutingMatrix& routing, std::span<const double> u);

/// u_j = Σ_x μ(x) Σ_{r: x_r = j} γ(x, x_r), accumulated into `u` (size |J|).
void accumulate_outflow(const WordSpace& space, std::span<const double> weights, std::span<double> u);

/// ½ Σ |a − b| over words plus ½ |leak difference|.
double tv_distance(const MeasureState& a, const MeasureState& b);

/// Largest pointwise difference of the weights.
double sup_distance(const MeasureState& a, const MeasureState& b);

}  // namespace mfnet
