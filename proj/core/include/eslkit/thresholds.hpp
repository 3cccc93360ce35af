#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eslkit/map_types.hpp"

namespace esl {

enum class ConfidenceKind { Softmax, Entropy };

std::string to_string(ConfidenceKind kind);
ConfidenceKind confidence_kind_from_string(const std::string& s);

/// Per-class collections of confidence samples gathered from pixels
/// whose argmax is that class, over any number of probability maps.
/// A bag collects either max-softmax scores or normalized entropies,
/// fixed at construction. Bags built over disjoint image shards can be
/// merged; thresholds computed from a merged bag equal those from a
/// single-pass accumulation.
struct ClassSampleBag {
    ConfidenceKind kind = ConfidenceKind::Softmax;
    std::int32_t num_classes = 0;
    std::vector<std::vector<float>> samples;  // [class][sample]

    static ClassSampleBag make(ConfidenceKind kind, std::int32_t num_classes);
    std::uint64_t total_samples() const;
};

/// Appends one confidence sample per pixel to the bag of the pixel's
/// argmax class. For an Entropy bag the entropies are computed here with
/// the same kernel extraction uses, so thresholding and filtering see
/// identical float values. Throws std::invalid_argument on class-count
/// mismatch.
void accumulate(ClassSampleBag& bag, const ProbMap& prob);

/// Same, reusing an entropy map already computed for `prob`.
void accumulate(ClassSampleBag& bag, const ProbMap& prob, const EntropyMap& ent);

/// Multiset union per class. Requires equal kind and num_classes.
ClassSampleBag merge(const ClassSampleBag& a, const ClassSampleBag& b);

/// Per-class confidence thresholds with the hyperparameter that clamps
/// them. For a Softmax bag (threshold mu): mu[c] = min(hyper, median_c),
/// a pixel is kept when its max score is strictly above mu[c]. For an
/// Entropy bag (threshold nu): nu[c] = max(hyper, median_c), a pixel is
/// kept when its entropy is strictly below nu[c].
///
/// Median convention: for odd sample counts the middle element; for even
/// counts the element on the *kept* side of the cut -- the lower median
/// for softmax scores and the upper median for entropies. Combined with
/// the strict comparisons above this retains at least floor(n_c/2)
/// samples of every non-empty class c in the tie-free case.
///
/// Classes with no samples get threshold = hyper and a null median.
struct ClassThresholds {
    ConfidenceKind kind = ConfidenceKind::Softmax;
    std::int32_t num_classes = 0;
    double hyper = 0.0;
    std::vector<double> values;
    std::vector<std::uint64_t> per_class_counts;
    std::vector<std::optional<double>> per_class_medians;  // pre-clamp

    bool clamped(std::int32_t c) const;
};

/// Eq.-style min-clamped softmax thresholds. Requires a Softmax bag and
/// 0 < mu_star <= 1.
ClassThresholds compute_mu(const ClassSampleBag& bag, double mu_star);

/// Max-clamped entropy thresholds. Requires an Entropy bag and
/// 0 < nu_star <= 1.
ClassThresholds compute_nu(const ClassSampleBag& bag, double nu_star);

/// Limit case used by the sweep: thresholds are the raw per-class
/// medians with no clamp (hyper recorded as 0). Classes with no samples
/// get threshold 0; no pixel maps to them under the same model anyway.
ClassThresholds compute_nu_median(const ClassSampleBag& bag);

/// Structured report, also the on-disk interchange format:
/// { "kind": "softmax"|"entropy", "hyper": float,
///   "classes": [ { "id", "count", "median": float|null,
///                  "threshold", "clamped" } ] }
std::string thresholds_to_json(const ClassThresholds& t);
ClassThresholds thresholds_from_json(const std::string& json_text);

void save_thresholds(const ClassThresholds& t, const std::filesystem::path& path);
ClassThresholds load_thresholds(const std::filesystem::path& path);

}  // namespace esl
