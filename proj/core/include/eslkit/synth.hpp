#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "eslkit/map_types.hpp"

namespace esl {

// Deterministic synthetic segmentation domains. A scene is a Voronoi
// partition of random sites; each region carries a class, pixels carry
// that class as ground truth, and features are the class mean plus
// Gaussian noise. Near region borders the feature mean is blended
// toward the neighboring class, so border pixels are genuinely
// ambiguous while their labels stay crisp.
//
// All randomness is counter-based (rng.hpp): every draw keys on
// (seed, stream, scene_index, entity index), so any scene can be
// regenerated in isolation and distinct scenes never share draws.
// Stream 0 is the source domain, stream 1 the target domain.

struct SceneSpec {
    std::int32_t height = 0;
    std::int32_t width = 0;
    std::int32_t num_classes = 0;
    std::int32_t num_regions = 0;
    std::int32_t feature_dim = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<float>> class_palette;  // [C][D] feature means
    float noise_sigma = 0.0f;
    float boundary_blur = 0.0f;  // half-width of the blend band, in pixels
};

/// Differences applied to the scene law for the target domain.
struct DomainShiftSpec {
    std::vector<std::vector<float>> mean_shift;  // [C][D] additive offsets
    float sigma_scale = 1.0f;
    std::vector<float> class_prior_skew;  // [C] region-frequency multipliers

    static DomainShiftSpec none(std::int32_t num_classes, std::int32_t feature_dim);
};

struct LabeledScene {
    FeatureMap features;
    LabelMap labels;  // fully labeled at generation; target labels are
                      // withheld from training and used only for evaluation
};

/// Scene plus the cross-class boundary-band mask (1 where the feature
/// mean was blended with a different class). The mask is derived from
/// the same geometry as the labels and is meant for analysis, not
/// training.
struct GeneratedScene {
    FeatureMap features;
    LabelMap labels;
    std::vector<std::uint8_t> boundary_band;
};

/// Deterministic per-scene seed, recorded in manifests.
std::uint64_t scene_seed(const SceneSpec& spec, std::uint32_t stream,
                         std::int64_t scene_index);

LabeledScene gen_scene(const SceneSpec& spec, std::int64_t scene_index = 0);
GeneratedScene gen_scene_full(const SceneSpec& spec, std::int64_t scene_index = 0);

LabeledScene gen_target_scene(const SceneSpec& spec, const DomainShiftSpec& shift,
                              std::int64_t scene_index);
GeneratedScene gen_target_scene_full(const SceneSpec& spec,
                                     const DomainShiftSpec& shift,
                                     std::int64_t scene_index);

struct DomainPair {
    std::vector<LabeledScene> source;
    std::vector<LabeledScene> target;
};

/// n_source scenes from the source law and n_target from the shifted
/// law, with per-scene seeds derived from the scene index. Throws when
/// either count is zero.
DomainPair gen_domain_pair(const SceneSpec& spec, const DomainShiftSpec& shift,
                           std::int32_t n_source, std::int32_t n_target);

/// Reproducible class-mean palette: unit-scaled means drawn from the
/// seed, spaced enough to be separable at moderate noise.
std::vector<std::vector<float>> random_palette(std::int32_t num_classes,
                                               std::int32_t feature_dim,
                                               float scale, std::uint64_t seed);

// --- dataset manifest -------------------------------------------------

struct SceneEntry {
    std::string split;  // "source" | "target" | "target-eval"
    std::int64_t index = 0;
    std::uint64_t seed = 0;
    std::string features_path;  // relative to the manifest directory
    std::string labels_path;
};

struct DatasetManifest {
    std::int32_t height = 0;
    std::int32_t width = 0;
    std::int32_t num_classes = 0;
    std::int32_t feature_dim = 0;
    std::vector<SceneEntry> scenes;
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& json_text);
void save_manifest(const DatasetManifest& m, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace esl
