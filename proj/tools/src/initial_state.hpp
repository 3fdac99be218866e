#pragma once

#include <cstdint>
#include <string_view>

#include "mfnet/measure.hpp"
#include "mfnet/simulation.hpp"

namespace mfnet::cli {

/// Initial state descriptors:
///   empty             δ_∅
///   word:<digits>     point mass on one word, e.g. word:121 (labels dot separated
///                     when there are more than nine classes)
///   geometric:<r>     P(|x| = k) ∝ r^k for k ≤ K, uniform over words of each length
///   csv:<path>        rows "word,weight" (word "-" is ∅); weights are normalized
MeasureState initial_measure(std::string_view descriptor, const WordSpace& space);

/// Ensemble of M copies for the simulator. `empty` and `word:` put every copy in
/// the same state; other descriptors draw each copy independently from the
/// measure (mass beyond K is not representable and is rejected).
EnsembleState initial_ensemble(std::string_view descriptor, std::size_t M, const WordSpace& space,
                               std::uint64_t seed);

}  // namespace mfnet::cli
