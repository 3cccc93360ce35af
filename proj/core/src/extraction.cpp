#include "eslkit/extraction.hpp"

#include <stdexcept>

#include <json.hpp>

namespace esl {

namespace {

void check_thresholds(const ProbMap& prob, const ClassThresholds& t,
                      ConfidenceKind expect, const char* who) {
    if (t.kind != expect) {
        throw std::invalid_argument(std::string(who) + ": threshold kind mismatch");
    }
    if (t.num_classes != prob.num_classes) {
        throw std::invalid_argument(std::string(who) + ": class count mismatch");
    }
}

}  // namespace

PseudoLabelMap extract_ssl(const ProbMap& prob, const ClassThresholds& mu) {
    check_thresholds(prob, mu, ConfidenceKind::Softmax, "extract_ssl");
    PseudoLabelMap out;
    out.height = prob.height;
    out.width = prob.width;
    out.num_classes = prob.num_classes;
    out.labels.assign(prob.pixel_count(), kUnlabeled);
    const std::int32_t C = prob.num_classes;
    for (std::int64_t p = 0; p < prob.pixel_count(); ++p) {
        const float* px = prob.values.data() + p * C;
        int best = 0;
        float best_v = px[0];
        for (std::int32_t c = 1; c < C; ++c) {
            if (px[c] > best_v) {
                best_v = px[c];
                best = c;
            }
        }
        if (static_cast<double>(best_v) > mu.values[best]) {
            out.labels[p] = static_cast<std::uint8_t>(best);
        }
    }
    return out;
}

PseudoLabelMap extract_esl(const ProbMap& prob, const EntropyMap& ent,
                           const ClassThresholds& nu) {
    check_thresholds(prob, nu, ConfidenceKind::Entropy, "extract_esl");
    if (ent.height != prob.height || ent.width != prob.width) {
        throw std::invalid_argument("extract_esl: entropy map dimension mismatch");
    }
    PseudoLabelMap out;
    out.height = prob.height;
    out.width = prob.width;
    out.num_classes = prob.num_classes;
    out.labels.assign(prob.pixel_count(), kUnlabeled);
    const std::int32_t C = prob.num_classes;
    for (std::int64_t p = 0; p < prob.pixel_count(); ++p) {
        const float* px = prob.values.data() + p * C;
        int best = 0;
        float best_v = px[0];
        for (std::int32_t c = 1; c < C; ++c) {
            if (px[c] > best_v) {
                best_v = px[c];
                best = c;
            }
        }
        if (static_cast<double>(ent.values[p]) < nu.values[best]) {
            out.labels[p] = static_cast<std::uint8_t>(best);
        }
    }
    return out;
}

PseudoLabelDiff pseudo_label_diff(const PseudoLabelMap& ssl,
                                  const PseudoLabelMap& esl) {
    if (ssl.height != esl.height || ssl.width != esl.width) {
        throw std::invalid_argument("pseudo_label_diff: dimension mismatch");
    }
    PseudoLabelDiff diff;
    diff.height = ssl.height;
    diff.width = ssl.width;
    diff.categories.resize(ssl.pixel_count());
    for (std::int64_t p = 0; p < ssl.pixel_count(); ++p) {
        const std::uint8_t a = ssl.labels[p];
        const std::uint8_t b = esl.labels[p];
        DiffCategory cat;
        if (a == kUnlabeled && b == kUnlabeled) {
            cat = DiffCategory::BothNull;
        } else if (a == kUnlabeled) {
            cat = DiffCategory::EslOnly;
        } else if (b == kUnlabeled) {
            cat = DiffCategory::SslOnly;
        } else if (a == b) {
            cat = DiffCategory::Agree;
        } else {
            cat = DiffCategory::Conflict;
        }
        diff.categories[p] = static_cast<std::uint8_t>(cat);
        ++diff.counts[static_cast<std::size_t>(cat)];
    }
    return diff;
}

std::string diff_counts_to_json(const PseudoLabelDiff& diff) {
    nlohmann::json j;
    j["height"] = diff.height;
    j["width"] = diff.width;
    j["both_null"] = diff.counts[0];
    j["agree"] = diff.counts[1];
    j["ssl_only"] = diff.counts[2];
    j["esl_only"] = diff.counts[3];
    j["conflict"] = diff.counts[4];
    return j.dump(2);
}

Coverage coverage(const PseudoLabelMap& map) {
    Coverage cov;
    cov.total = static_cast<std::uint64_t>(map.pixel_count());
    cov.per_class_counts.assign(map.num_classes, 0);
    for (std::uint8_t v : map.labels) {
        if (v != kUnlabeled) {
            ++cov.labeled;
            ++cov.per_class_counts[v];
        }
    }
    cov.fraction = cov.total == 0 ? 0.0
                                  : static_cast<double>(cov.labeled) /
                                        static_cast<double>(cov.total);
    return cov;
}

}  // namespace esl
