#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mfnet/error.hpp"
#include "mfnet/network.hpp"

namespace mfnet::detail {

struct Rk4Workspace {
  std::vector<double> k1, k2, k3, k4, tmp;

  void resize(std::size_t n) {
    k1.resize(n);
    k2.resize(n);
    k3.resize(n);
    k4.resize(n);
    tmp.resize(n);
  }
};

/// Classical RK4 on a flat state; rhs(y, dy) must overwrite dy.
template <class Rhs>
void rk4_step(std::vector<double>& y, double dt, Rhs&& rhs, Rk4Workspace& ws) {
  const std::size_t n = y.size();
  ws.resize(n);
  const double half = 0.5 * dt;
  rhs(std::span<const double>(y), std::span<double>(ws.k1));
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = y[i] + half * ws.k1[i];
  rhs(std::span<const double>(ws.tmp), std::span<double>(ws.k2));
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = y[i] + half * ws.k2[i];
  rhs(std::span<const double>(ws.tmp), std::span<double>(ws.k3));
  for (std::size_t i = 0; i < n; ++i) ws.tmp[i] = y[i] + dt * ws.k3[i];
  rhs(std::span<const double>(ws.tmp), std::span<double>(ws.k4));
  const double sixth = dt / 6.0;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] += sixth * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
  }
}

inline constexpr double kClipFloor = -1e-9;
// Magnitudes below this are flushed to zero to keep long decays out of the
// subnormal range.
inline constexpr double kUnderflowFloor = 1e-250;

/// Throws InvalidArgument if a λ breakpoint in (t0, t_end] is off the step grid.
void check_breakpoints(const ValidatedNetwork& net, double t0, double t_end, double dt);

/// Clips small negative weights and flushes tiny ones, booking the change in
/// `leak` so that the sum of the state is unchanged.
inline void sanitize_weights(std::span<double> weights, double& leak, double time) {
  for (double& w : weights) {
    if (w < kClipFloor) {
      throw Error(ErrorCode::StepSizeUnstable,
                  "weight " + std::to_string(w) + " at t=" + std::to_string(time));
    }
    if (w < kUnderflowFloor) {
      leak += w;
      w = 0.0;
    }
  }
}

}  // namespace mfnet::detail
