#pragma once

#include <vector>

namespace mfnet::detail {

/// Solves A x = b (A dense row-major n×n) by Gaussian elimination with
/// partial pivoting. Throws SingularSystem on a vanishing pivot.
std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b);

}  // namespace mfnet::detail
