#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "eslkit/extraction.hpp"
#include "eslkit/map_types.hpp"

namespace eslcli {

using Rgb = std::array<std::uint8_t, 3>;
using Palette = std::array<Rgb, 256>;

/// 8-bit indexed PNG with a 256-entry palette. Output bytes depend only
/// on the inputs (fixed compression settings), so re-rendering a stored
/// map is bit-identical.
void write_indexed_png(const std::filesystem::path& path, std::int32_t width,
                       std::int32_t height, const std::uint8_t* pixels,
                       const Palette& palette);

/// Class-id palette: 20 distinct colors cycling over ids, index 255
/// (VOID / null label) black.
Palette class_palette();

/// Grayscale ramp for entropy maps.
Palette gray_palette();

/// Diff categories: both-null black, agree gray, kept-by-softmax-only
/// red, kept-by-entropy-only blue, conflict yellow.
Palette diff_palette();

void render_labels(const esl::LabelMap& map, const std::filesystem::path& path);
void render_pseudolabels(const esl::PseudoLabelMap& map,
                         const std::filesystem::path& path);
void render_entropy(const esl::EntropyMap& map, const std::filesystem::path& path);
void render_diff(const esl::PseudoLabelDiff& diff,
                 const std::filesystem::path& path);

}  // namespace eslcli
