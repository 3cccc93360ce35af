#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace esl {

/// Reserved sentinel for unlabeled pixels. In a LabelMap it means VOID
/// (ignore in evaluation); in a PseudoLabelMap it means the null
/// pseudo-label (pixel excluded from the self-supervised loss). Class
/// counts are limited to 255 so the sentinel never collides with an id.
inline constexpr std::uint8_t kUnlabeled = 255;

inline constexpr int kMaxClasses = 255;

/// Dense per-pixel class distribution, H x W x C, row-major with the
/// channel fastest-varying: index = (h*W + w)*C + c. Values are
/// post-softmax probabilities stored as 32-bit floats.
struct ProbMap {
    std::int32_t height = 0;
    std::int32_t width = 0;
    std::int32_t num_classes = 0;
    std::vector<float> values;

    std::int64_t pixel_count() const {
        return static_cast<std::int64_t>(height) * width;
    }
    std::span<const float> pixel(std::int64_t p) const {
        return {values.data() + p * num_classes,
                static_cast<std::size_t>(num_classes)};
    }
    float at(std::int32_t h, std::int32_t w, std::int32_t c) const {
        return values[(static_cast<std::int64_t>(h) * width + w) * num_classes + c];
    }
};

/// Per-pixel class ids in [0, num_classes) or kUnlabeled (VOID).
struct LabelMap {
    std::int32_t height = 0;
    std::int32_t width = 0;
    std::int32_t num_classes = 0;
    std::vector<std::uint8_t> labels;

    std::int64_t pixel_count() const {
        return static_cast<std::int64_t>(height) * width;
    }
    std::uint8_t at(std::int32_t h, std::int32_t w) const {
        return labels[static_cast<std::int64_t>(h) * width + w];
    }
};

/// Per-pixel class ids in [0, num_classes) or kUnlabeled (null
/// pseudo-label). Same layout as LabelMap, kept as a distinct type so a
/// ground-truth map cannot be passed where a pseudo-label map is meant.
struct PseudoLabelMap {
    std::int32_t height = 0;
    std::int32_t width = 0;
    std::int32_t num_classes = 0;
    std::vector<std::uint8_t> labels;

    std::int64_t pixel_count() const {
        return static_cast<std::int64_t>(height) * width;
    }
    std::uint8_t at(std::int32_t h, std::int32_t w) const {
        return labels[static_cast<std::int64_t>(h) * width + w];
    }
};

/// Per-pixel normalized entropies in [0, 1].
struct EntropyMap {
    std::int32_t height = 0;
    std::int32_t width = 0;
    std::vector<float> values;

    std::int64_t pixel_count() const {
        return static_cast<std::int64_t>(height) * width;
    }
    float at(std::int32_t h, std::int32_t w) const {
        return values[static_cast<std::int64_t>(h) * width + w];
    }
};

/// Dense per-pixel feature vectors, H x W x D, channel fastest-varying.
struct FeatureMap {
    std::int32_t height = 0;
    std::int32_t width = 0;
    std::int32_t feature_dim = 0;
    std::vector<float> values;

    std::int64_t pixel_count() const {
        return static_cast<std::int64_t>(height) * width;
    }
    std::span<const float> pixel(std::int64_t p) const {
        return {values.data() + p * feature_dim,
                static_cast<std::size_t>(feature_dim)};
    }
};

/// Tolerance on the per-pixel probability sum. Producers renormalize at
/// generation time; readers never renormalize, so a violation here
/// points at the producer.
inline constexpr double kProbSumTolerance = 1e-4;

/// Checks all ProbMap invariants. Returns std::nullopt when the map is
/// well formed, otherwise a description of the first violation found
/// (dimensions, then payload size, then value range, then pixel sums).
std::optional<std::string> validate(const ProbMap& map);

std::optional<std::string> validate(const LabelMap& map);
std::optional<std::string> validate(const PseudoLabelMap& map);
std::optional<std::string> validate(const EntropyMap& map);

/// Per-pixel argmax over channels; ties resolve to the lowest class
/// index so the result is deterministic. Never produces kUnlabeled.
LabelMap argmax_map(const ProbMap& map);

/// Per-pixel maximum probability, row-major H*W. Consistent with
/// argmax_map: max_score_map(m)[p] == m.pixel(p)[argmax_map(m).labels[p]].
std::vector<float> max_score_map(const ProbMap& map);

}  // namespace esl
