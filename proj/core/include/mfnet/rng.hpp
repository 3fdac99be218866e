#pragma once

#include <array>
#include <cstdint>

namespace mfnet {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). A stream is
/// fully determined by (seed, stream id); draws are reproducible across
/// platforms.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  /// Ten-round Philox bijection of one counter block.
  static Block block(Block counter, Key key);

  explicit Philox4x32(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform01();

 private:
  Key key_{};
  Block counter_{};
  Block buffer_{};
  int used_ = 4;
};

/// SplitMix64 finalizer, used to derive keys from (seed, stream).
std::uint64_t mix64(std::uint64_t x);

}  // namespace mfnet
