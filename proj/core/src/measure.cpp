#include "mfnet/measure.hpp"

#include <algorithm>
#include <cmath>

#include "mfnet/error.hpp"

namespace mfnet {

double MeasureState::mass() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

MeasureState MeasureState::point_mass(const WordSpace& space, const QueueWord& x) {
  const auto idx = space.index_of(x);
  if (!idx) {
    throw Error(ErrorCode::TruncationMismatch,
                "word " + x.to_string(space.num_classes()) + " does not fit truncation K=" +
                    std::to_string(space.K()));
  }
  MeasureState mu;
  mu.weights.assign(space.size(), 0.0);
  mu.weights[*idx] = 1.0;
  return mu;
}

std::vector<double> internal_inflow(const RoutingMatrix& routing, std::span<const double> u) {
  const int n = routing.size();
  std::vector<double> w(n, 0.0);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) w[j] += routing.at(i, j) * u[i];
  }
  return w;
}

void accumulate_outflow(const WordSpace& space, std::span<const double> weights, std::span<double> u) {
  for (std::size_t x = 0; x < space.size(); ++x) {
    const double m = weights[x];
    if (m == 0.0) continue;
    for (const auto& s : space.services(x)) u[s.cls.index] += m * s.rate;
  }
}

double tv_distance(const MeasureState& a, const MeasureState& b) {
  if (a.weights.size() != b.weights.size()) {
    throw Error(ErrorCode::TruncationMismatch, "measures live on different word spaces");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.weights.size(); ++i) s += std::abs(a.weights[i] - b.weights[i]);
  s += std::abs(a.leaked_mass - b.leaked_mass);
  return 0.5 * s;
}

double sup_distance(const MeasureState& a, const MeasureState& b) {
  if (a.weights.size() != b.weights.size()) {
    throw Error(ErrorCode::TruncationMismatch, "measures live on different word spaces");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    s = std::max(s, std::abs(a.weights[i] - b.weights[i]));
  }
  return s;
}

}  // namespace mfnet
