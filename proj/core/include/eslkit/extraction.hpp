#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "eslkit/map_types.hpp"
#include "eslkit/thresholds.hpp"

namespace esl {

/// Softmax-guided pseudo-labels: pixel gets class c iff c is the argmax
/// AND its probability is strictly greater than mu[c]; otherwise the
/// null label. Requires softmax-kind thresholds with matching class
/// count.
PseudoLabelMap extract_ssl(const ProbMap& prob, const ClassThresholds& mu);

/// Entropy-guided pseudo-labels: pixel gets class c iff c is the argmax
/// AND its normalized entropy is strictly below nu[c]; otherwise the
/// null label. `ent` must be entropy_map(prob) -- it is passed in so one
/// entropy pass can serve thresholding, extraction and rendering.
PseudoLabelMap extract_esl(const ProbMap& prob, const EntropyMap& ent,
                           const ClassThresholds& nu);

enum class DiffCategory : std::uint8_t {
    BothNull = 0,
    Agree = 1,
    SslOnly = 2,
    EslOnly = 3,
    Conflict = 4,  // both labeled, different class; empty when both maps
                   // derive from the same ProbMap
};
inline constexpr int kDiffCategoryCount = 5;

/// Per-pixel comparison of two pseudo-label maps plus category counts.
struct PseudoLabelDiff {
    std::int32_t height = 0;
    std::int32_t width = 0;
    std::vector<std::uint8_t> categories;  // DiffCategory per pixel
    std::array<std::uint64_t, kDiffCategoryCount> counts{};
};

PseudoLabelDiff pseudo_label_diff(const PseudoLabelMap& ssl,
                                  const PseudoLabelMap& esl);

std::string diff_counts_to_json(const PseudoLabelDiff& diff);

/// Labeled-pixel fraction and per-class label histogram.
struct Coverage {
    double fraction = 0.0;
    std::uint64_t labeled = 0;
    std::uint64_t total = 0;
    std::vector<std::uint64_t> per_class_counts;
};

Coverage coverage(const PseudoLabelMap& map);

}  // namespace esl
