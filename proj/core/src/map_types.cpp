#include "eslkit/map_types.hpp"

#include <cmath>
#include <cstdio>

namespace esl {
namespace {

std::string format_pixel(std::int64_t p, std::int32_t width) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "(h=%lld, w=%lld)",
                  static_cast<long long>(p / width),
                  static_cast<long long>(p % width));
    return buf;
}

}  // namespace

std::optional<std::string> validate(const ProbMap& map) {
    if (map.height < 1 || map.width < 1) {
        return "dimensions: height and width must be >= 1";
    }
    if (map.num_classes < 2 || map.num_classes > kMaxClasses) {
        return "dimensions: num_classes must be in [2, 255]";
    }
    const std::int64_t expected =
        map.pixel_count() * static_cast<std::int64_t>(map.num_classes);
    if (static_cast<std::int64_t>(map.values.size()) != expected) {
        return "payload: value count does not match H*W*C";
    }
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        const float v = map.values[i];
        if (!(v >= 0.0f && v <= 1.0f)) {
            return "range: value " + std::to_string(v) + " outside [0,1] at index " +
                   std::to_string(i);
        }
    }
    for (std::int64_t p = 0; p < map.pixel_count(); ++p) {
        double sum = 0.0;
        for (float v : map.pixel(p)) sum += v;
        if (std::abs(sum - 1.0) > kProbSumTolerance) {
            return "pixel sum: " + std::to_string(sum) + " at pixel " +
                   format_pixel(p, map.width);
        }
    }
    return std::nullopt;
}

namespace {

std::optional<std::string> validate_labels(std::int32_t height, std::int32_t width,
                                           std::int32_t num_classes,
                                           const std::vector<std::uint8_t>& labels) {
    if (height < 1 || width < 1) {
        return "dimensions: height and width must be >= 1";
    }
    if (num_classes < 1 || num_classes > kMaxClasses) {
        return "dimensions: num_classes must be in [1, 255]";
    }
    const auto expected = static_cast<std::int64_t>(height) * width;
    if (static_cast<std::int64_t>(labels.size()) != expected) {
        return "payload: label count does not match H*W";
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] != kUnlabeled && labels[i] >= num_classes) {
            return "range: class id " + std::to_string(labels[i]) + " >= num_classes at index " +
                   std::to_string(i);
        }
    }
    return std::nullopt;
}

}  // namespace

std::optional<std::string> validate(const LabelMap& map) {
    return validate_labels(map.height, map.width, map.num_classes, map.labels);
}

std::optional<std::string> validate(const PseudoLabelMap& map) {
    return validate_labels(map.height, map.width, map.num_classes, map.labels);
}

std::optional<std::string> validate(const EntropyMap& map) {
    if (map.height < 1 || map.width < 1) {
        return "dimensions: height and width must be >= 1";
    }
    if (static_cast<std::int64_t>(map.values.size()) != map.pixel_count()) {
        return "payload: value count does not match H*W";
    }
    for (std::size_t i = 0; i < map.values.size(); ++i) {
        const float v = map.values[i];
        if (!(v >= 0.0f && v <= 1.0f + 1e-9f)) {
            return "range: entropy " + std::to_string(v) + " outside [0,1] at index " +
                   std::to_string(i);
        }
    }
    return std::nullopt;
}

LabelMap argmax_map(const ProbMap& map) {
    LabelMap out;
    out.height = map.height;
    out.width = map.width;
    out.num_classes = map.num_classes;
    out.labels.resize(map.pixel_count());
    const std::int32_t C = map.num_classes;
    for (std::int64_t p = 0; p < map.pixel_count(); ++p) {
        const float* px = map.values.data() + p * C;
        int best = 0;
        float best_v = px[0];
        for (std::int32_t c = 1; c < C; ++c) {
            if (px[c] > best_v) {
                best_v = px[c];
                best = c;
            }
        }
        out.labels[p] = static_cast<std::uint8_t>(best);
    }
    return out;
}

std::vector<float> max_score_map(const ProbMap& map) {
    std::vector<float> out(map.pixel_count());
    const std::int32_t C = map.num_classes;
    for (std::int64_t p = 0; p < map.pixel_count(); ++p) {
        const float* px = map.values.data() + p * C;
        float best = px[0];
        for (std::int32_t c = 1; c < C; ++c) {
            best = px[c] > best ? px[c] : best;
        }
        out[p] = best;
    }
    return out;
}

}  // namespace esl
