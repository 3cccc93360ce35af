#pragma once

#include <span>

#include "eslkit/map_types.hpp"

namespace esl {

// The two per-pixel confidence measures compared throughout this
// project: maximum softmax score (see max_score_map in map_types.hpp)
// and normalized Shannon entropy.

/// Normalized entropy of a class distribution:
///   E(p) = -(1 / ln C) * sum_c p_c * ln(p_c),   with 0*ln(0) := 0.
///
/// The 1/ln(C) factor maps the result into [0, 1]: exactly 0 for a
/// one-hot distribution, exactly 1 for the uniform one, and invariant to
/// the logarithm base. Terms are accumulated in double and in sorted
/// order, so the result is exactly permutation-invariant. Inputs whose
/// sum sits at the edge of the ProbMap tolerance can push the value a
/// hair above 1; overshoot within twice that tolerance is clamped to 1,
/// anything further out throws std::logic_error.
///
/// Throws std::invalid_argument when p has fewer than 2 entries.
double entropy_of_distribution(std::span<const float> p);
double entropy_of_distribution(std::span<const double> p);

/// Per-pixel normalized entropy of a probability map.
EntropyMap entropy_map(const ProbMap& map);

}  // namespace esl
