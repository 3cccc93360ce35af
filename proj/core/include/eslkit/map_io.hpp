#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "eslkit/map_types.hpp"

namespace esl {

// Binary map container formats, all little-endian:
//   SEGP  magic "SEGP", uint32 version=1, H, W, C, then H*W*C float32
//   SEGL  magic "SEGL", uint32 version=1, H, W, C, then H*W uint8
//         (255 = VOID / null pseudo-label; C > 255 is rejected)
//   SEGE  magic "SEGE", uint32 version=1, H, W,    then H*W float32
//   SEGF  magic "SEGF", uint32 version=1, H, W, D, then H*W*D float32
// Payloads are row-major with the channel fastest-varying. Writing then
// reading any well-formed map reproduces it byte for byte.

enum class IoErrorKind {
    OpenFailed,
    BadMagic,
    BadVersion,
    DimensionOverflow,
    Truncated,
    TrailingBytes,
    RangeError,
    WriteFailed,
};

class MapIoError : public std::runtime_error {
public:
    MapIoError(IoErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}
    IoErrorKind kind() const { return kind_; }

private:
    IoErrorKind kind_;
};

ProbMap read_probmap(const std::filesystem::path& path);
void write_probmap(const ProbMap& map, const std::filesystem::path& path);

LabelMap read_labelmap(const std::filesystem::path& path);
void write_labelmap(const LabelMap& map, const std::filesystem::path& path);

PseudoLabelMap read_pseudolabels(const std::filesystem::path& path);
void write_pseudolabels(const PseudoLabelMap& map, const std::filesystem::path& path);

EntropyMap read_entropymap(const std::filesystem::path& path);
void write_entropymap(const EntropyMap& map, const std::filesystem::path& path);

FeatureMap read_featuremap(const std::filesystem::path& path);
void write_featuremap(const FeatureMap& map, const std::filesystem::path& path);

}  // namespace esl
