#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "mfnet/network.hpp"

namespace mfnet::cli {

/// Network file in JSON:
///
///   {
///     "classes": 2,
///     "nodes": [1, 2],
///     "routing": [[0.0, 0.5], [0.0, 0.0]],
///     "lambda": [0.05, 0.05],
///     "discipline": "fifo",
///     "base_rate": 1.0,
///     "truncation_K": 8
///   }
///
/// `lambda` may instead be a schedule [[t0, [..]], [t1, [..]], ...] with t0 = 0.
/// `base_rate` is a number or one rate per class. `nodes`, `truncation_K`,
/// `gamma_minus`, `gamma_plus` and `lambda_plus` are optional.
NetworkSpec parse_spec(std::string_view text);

struct LoadedSpec {
  NetworkSpec spec;
  std::string hash;  // FNV-1a of the file bytes, 16 hex digits
};

LoadedSpec load_spec(const std::filesystem::path& path);

std::string fnv1a_hex(std::string_view bytes);

}  // namespace mfnet::cli
