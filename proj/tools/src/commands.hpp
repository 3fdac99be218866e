#pragma once

#include <iosfwd>

#include "mfnet/error.hpp"

namespace mfnet::cli {

/// Process exit status for a library error: 2 bad input, 3 invalid network,
/// 4 numerical instability, 5 no convergence.
int exit_code(ErrorCode code);

/// Entry point of the `mfnet` tool; returns the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mfnet::cli
