#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "eslkit/map_types.hpp"

namespace esl {

/// Pixel tallies with ground truth on rows and prediction on columns.
/// VOID ground-truth pixels are not tallied; they are counted in
/// void_pixels instead.
struct ConfusionMatrix {
    std::int32_t num_classes = 0;
    std::vector<std::uint64_t> counts;  // C*C row-major
    std::uint64_t void_pixels = 0;

    static ConfusionMatrix make(std::int32_t num_classes);
    std::uint64_t at(std::int32_t gt, std::int32_t pred) const {
        return counts[static_cast<std::size_t>(gt) * num_classes + pred];
    }
    std::uint64_t& at(std::int32_t gt, std::int32_t pred) {
        return counts[static_cast<std::size_t>(gt) * num_classes + pred];
    }
    std::uint64_t total() const;
    /// Elementwise sum; confusion over a partition of the pixels equals
    /// the sum of per-part matrices.
    ConfusionMatrix& operator+=(const ConfusionMatrix& other);
};

/// Tally one prediction map against ground truth. Throws on dimension or
/// class-count mismatch, and on a VOID entry in `pred` (predictions are
/// always fully labeled here).
ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt);

/// Per-class intersection-over-union and their mean. IoU_c =
/// TP / (TP + FP + FN); classes whose denominator is zero are undefined
/// (nullopt) and excluded from the mean.
struct IouReport {
    std::vector<std::optional<double>> per_class;
    std::optional<double> miou;
};

IouReport iou(const ConfusionMatrix& cm);

/// Mean IoU over a subset of class ids (undefined classes still
/// excluded). Lets callers reproduce reduced-class summaries without a
/// special mode.
std::optional<double> mean_iou_subset(const IouReport& report,
                                      const std::vector<std::int32_t>& classes);

/// Fraction of selected pseudo-labels whose class disagrees with ground
/// truth. Pixels with a null pseudo-label or VOID ground truth are
/// excluded. Classes with zero pseudo-labeled pixels are undefined.
struct IncorrectRatioReport {
    std::vector<std::optional<double>> per_class;
    std::optional<double> global;
    std::vector<std::uint64_t> per_class_labeled;
    std::vector<std::uint64_t> per_class_incorrect;
    std::uint64_t labeled_total = 0;
    std::uint64_t incorrect_total = 0;
};

IncorrectRatioReport incorrect_ratio(const PseudoLabelMap& pseudo,
                                     const LabelMap& gt);

/// Signed percentage change 100*(new-base)/base applied entrywise;
/// undefined when either side is undefined or the base is zero.
struct RelativeChangeReport {
    std::vector<std::optional<double>> per_class_incorrect_ratio;
    std::optional<double> global_incorrect_ratio;
    std::vector<std::optional<double>> per_class_iou;
    std::optional<double> miou;
};

/// One evaluation bundle: segmentation quality, pseudo-label quality and
/// coverage where applicable, and optionally the relative change against
/// a named baseline report.
struct MetricsReport {
    std::int32_t num_classes = 0;
    IouReport iou;
    std::optional<IncorrectRatioReport> incorrect;
    std::optional<double> coverage;
    std::string baseline_name;
    std::optional<RelativeChangeReport> relative;
};

RelativeChangeReport relative_change(const MetricsReport& latest,
                                     const MetricsReport& base);

std::optional<double> relative_change(std::optional<double> latest,
                                      std::optional<double> base);

/// Full-precision JSON; undefined entries are null.
std::string metrics_to_json(const MetricsReport& report);
MetricsReport metrics_from_json(const std::string& json_text);

/// One row per class (id, iou, incorrect_ratio, count) plus a `global`
/// summary row. Undefined entries emit empty cells.
std::string metrics_to_csv(const MetricsReport& report);

/// Human-oriented summary; ratios printed in percent with one decimal.
std::string metrics_to_text(const MetricsReport& report);

}  // namespace esl
