#include <doctest.h>

#include <cmath>
#include <set>

#include "mfnet/rng.hpp"

using mfnet::Philox4x32;

TEST_CASE("Philox4x32-10 known-answer vectors") {
  CHECK(Philox4x32::block({0, 0, 0, 0}, {0, 0}) ==
        Philox4x32::Block{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  CHECK(Philox4x32::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
        Philox4x32::Block{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  CHECK(Philox4x32::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}) ==
        Philox4x32::Block{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct") {
  Philox4x32 a(42, 0), b(42, 0), c(42, 1), d(43, 0);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    seen.insert(x);
    seen.insert(c.next_u64());
    seen.insert(d.next_u64());
  }
  CHECK(seen.size() == 300);
}

TEST_CASE("uniform01 stays inside (0, 1) with the right mean") {
  Philox4x32 rng(5);
  double sum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform01();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
  }
  // 5σ band of the sample mean of U(0, 1)
  CHECK(std::abs(sum / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
}
