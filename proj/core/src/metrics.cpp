#include "eslkit/metrics.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace esl {

using nlohmann::json;

ConfusionMatrix ConfusionMatrix::make(std::int32_t num_classes) {
    if (num_classes < 1 || num_classes > kMaxClasses) {
        throw std::invalid_argument("ConfusionMatrix: num_classes out of range");
    }
    ConfusionMatrix cm;
    cm.num_classes = num_classes;
    cm.counts.assign(static_cast<std::size_t>(num_classes) * num_classes, 0);
    return cm;
}

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t n = 0;
    for (std::uint64_t v : counts) n += v;
    return n;
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
    if (num_classes != other.num_classes) {
        throw std::invalid_argument("ConfusionMatrix: class count mismatch");
    }
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
    void_pixels += other.void_pixels;
    return *this;
}

ConfusionMatrix confusion(const LabelMap& pred, const LabelMap& gt) {
    if (pred.height != gt.height || pred.width != gt.width) {
        throw std::invalid_argument("confusion: dimension mismatch");
    }
    if (pred.num_classes != gt.num_classes) {
        throw std::invalid_argument("confusion: class count mismatch");
    }
    ConfusionMatrix cm = ConfusionMatrix::make(gt.num_classes);
    for (std::int64_t p = 0; p < gt.pixel_count(); ++p) {
        const std::uint8_t t = gt.labels[p];
        if (t == kUnlabeled) {
            ++cm.void_pixels;
            continue;
        }
        const std::uint8_t y = pred.labels[p];
        if (y == kUnlabeled) {
            throw std::invalid_argument("confusion: VOID entry in prediction map");
        }
        ++cm.at(t, y);
    }
    return cm;
}

IouReport iou(const ConfusionMatrix& cm) {
    const std::int32_t C = cm.num_classes;
    IouReport rep;
    rep.per_class.resize(C);
    double sum = 0.0;
    int defined = 0;
    for (std::int32_t c = 0; c < C; ++c) {
        const std::uint64_t tp = cm.at(c, c);
        std::uint64_t fp = 0, fn = 0;
        for (std::int32_t k = 0; k < C; ++k) {
            if (k == c) continue;
            fp += cm.at(k, c);
            fn += cm.at(c, k);
        }
        const std::uint64_t denom = tp + fp + fn;
        if (denom == 0) continue;
        rep.per_class[c] = static_cast<double>(tp) / static_cast<double>(denom);
        sum += *rep.per_class[c];
        ++defined;
    }
    if (defined > 0) rep.miou = sum / defined;
    return rep;
}

std::optional<double> mean_iou_subset(const IouReport& report,
                                      const std::vector<std::int32_t>& classes) {
    double sum = 0.0;
    int defined = 0;
    for (std::int32_t c : classes) {
        if (c < 0 || c >= static_cast<std::int32_t>(report.per_class.size())) {
            throw std::invalid_argument("mean_iou_subset: class id out of range");
        }
        if (report.per_class[c]) {
            sum += *report.per_class[c];
            ++defined;
        }
    }
    if (defined == 0) return std::nullopt;
    return sum / defined;
}

IncorrectRatioReport incorrect_ratio(const PseudoLabelMap& pseudo,
                                     const LabelMap& gt) {
    if (pseudo.height != gt.height || pseudo.width != gt.width) {
        throw std::invalid_argument("incorrect_ratio: dimension mismatch");
    }
    if (pseudo.num_classes != gt.num_classes) {
        throw std::invalid_argument("incorrect_ratio: class count mismatch");
    }
    const std::int32_t C = gt.num_classes;
    IncorrectRatioReport rep;
    rep.per_class.resize(C);
    rep.per_class_labeled.assign(C, 0);
    rep.per_class_incorrect.assign(C, 0);
    for (std::int64_t p = 0; p < gt.pixel_count(); ++p) {
        const std::uint8_t y = pseudo.labels[p];
        const std::uint8_t t = gt.labels[p];
        if (y == kUnlabeled || t == kUnlabeled) continue;
        ++rep.per_class_labeled[y];
        if (y != t) ++rep.per_class_incorrect[y];
    }
    for (std::int32_t c = 0; c < C; ++c) {
        rep.labeled_total += rep.per_class_labeled[c];
        rep.incorrect_total += rep.per_class_incorrect[c];
        if (rep.per_class_labeled[c] > 0) {
            rep.per_class[c] = static_cast<double>(rep.per_class_incorrect[c]) /
                               static_cast<double>(rep.per_class_labeled[c]);
        }
    }
    if (rep.labeled_total > 0) {
        rep.global = static_cast<double>(rep.incorrect_total) /
                     static_cast<double>(rep.labeled_total);
    }
    return rep;
}

std::optional<double> relative_change(std::optional<double> latest,
                                      std::optional<double> base) {
    if (!latest || !base || *base == 0.0) return std::nullopt;
    return 100.0 * (*latest - *base) / *base;
}

RelativeChangeReport relative_change(const MetricsReport& latest,
                                     const MetricsReport& base) {
    if (latest.num_classes != base.num_classes) {
        throw std::invalid_argument("relative_change: class count mismatch");
    }
    const std::int32_t C = latest.num_classes;
    RelativeChangeReport rel;
    rel.per_class_incorrect_ratio.resize(C);
    rel.per_class_iou.resize(C);
    for (std::int32_t c = 0; c < C; ++c) {
        if (latest.incorrect && base.incorrect) {
            rel.per_class_incorrect_ratio[c] = relative_change(
                latest.incorrect->per_class[c], base.incorrect->per_class[c]);
        }
        rel.per_class_iou[c] =
            relative_change(latest.iou.per_class[c], base.iou.per_class[c]);
    }
    if (latest.incorrect && base.incorrect) {
        rel.global_incorrect_ratio =
            relative_change(latest.incorrect->global, base.incorrect->global);
    }
    rel.miou = relative_change(latest.iou.miou, base.iou.miou);
    return rel;
}

namespace {

json opt_to_json(const std::optional<double>& v) {
    if (!v) return nullptr;
    return *v;
}

std::optional<double> opt_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

json opt_vec_to_json(const std::vector<std::optional<double>>& v) {
    json arr = json::array();
    for (const auto& x : v) arr.push_back(opt_to_json(x));
    return arr;
}

std::vector<std::optional<double>> opt_vec_from_json(const json& arr) {
    std::vector<std::optional<double>> v;
    for (const json& x : arr) v.push_back(opt_from_json(x));
    return v;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& report) {
    json j;
    j["num_classes"] = report.num_classes;
    j["iou"]["per_class"] = opt_vec_to_json(report.iou.per_class);
    j["iou"]["miou"] = opt_to_json(report.iou.miou);
    if (report.incorrect) {
        json inc;
        inc["per_class"] = opt_vec_to_json(report.incorrect->per_class);
        inc["global"] = opt_to_json(report.incorrect->global);
        inc["per_class_labeled"] = report.incorrect->per_class_labeled;
        inc["per_class_incorrect"] = report.incorrect->per_class_incorrect;
        inc["labeled_total"] = report.incorrect->labeled_total;
        inc["incorrect_total"] = report.incorrect->incorrect_total;
        j["incorrect_ratio"] = std::move(inc);
    } else {
        j["incorrect_ratio"] = nullptr;
    }
    j["coverage"] = opt_to_json(report.coverage);
    if (report.relative) {
        json rel;
        rel["baseline"] = report.baseline_name;
        rel["per_class_incorrect_ratio"] =
            opt_vec_to_json(report.relative->per_class_incorrect_ratio);
        rel["global_incorrect_ratio"] =
            opt_to_json(report.relative->global_incorrect_ratio);
        rel["per_class_iou"] = opt_vec_to_json(report.relative->per_class_iou);
        rel["miou"] = opt_to_json(report.relative->miou);
        j["relative_change"] = std::move(rel);
    } else {
        j["relative_change"] = nullptr;
    }
    return j.dump(2);
}

MetricsReport metrics_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    MetricsReport rep;
    rep.num_classes = j.at("num_classes").get<std::int32_t>();
    rep.iou.per_class = opt_vec_from_json(j.at("iou").at("per_class"));
    rep.iou.miou = opt_from_json(j.at("iou").at("miou"));
    if (!j.at("incorrect_ratio").is_null()) {
        const json& inc = j.at("incorrect_ratio");
        IncorrectRatioReport r;
        r.per_class = opt_vec_from_json(inc.at("per_class"));
        r.global = opt_from_json(inc.at("global"));
        r.per_class_labeled =
            inc.at("per_class_labeled").get<std::vector<std::uint64_t>>();
        r.per_class_incorrect =
            inc.at("per_class_incorrect").get<std::vector<std::uint64_t>>();
        r.labeled_total = inc.at("labeled_total").get<std::uint64_t>();
        r.incorrect_total = inc.at("incorrect_total").get<std::uint64_t>();
        rep.incorrect = std::move(r);
    }
    rep.coverage = opt_from_json(j.at("coverage"));
    if (!j.at("relative_change").is_null()) {
        const json& rel = j.at("relative_change");
        RelativeChangeReport r;
        rep.baseline_name = rel.at("baseline").get<std::string>();
        r.per_class_incorrect_ratio =
            opt_vec_from_json(rel.at("per_class_incorrect_ratio"));
        r.global_incorrect_ratio = opt_from_json(rel.at("global_incorrect_ratio"));
        r.per_class_iou = opt_vec_from_json(rel.at("per_class_iou"));
        r.miou = opt_from_json(rel.at("miou"));
        rep.relative = std::move(r);
    }
    return rep;
}

namespace {

std::string cell(const std::optional<double>& v) {
    if (!v) return "";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", *v);
    return buf;
}

}  // namespace

std::string metrics_to_csv(const MetricsReport& report) {
    std::ostringstream out;
    out << "id,iou,incorrect_ratio,count\n";
    for (std::int32_t c = 0; c < report.num_classes; ++c) {
        out << c << ',' << cell(report.iou.per_class[c]) << ',';
        if (report.incorrect) {
            out << cell(report.incorrect->per_class[c]) << ','
                << report.incorrect->per_class_labeled[c];
        } else {
            out << ',';
        }
        out << '\n';
    }
    out << "global," << cell(report.iou.miou) << ',';
    if (report.incorrect) {
        out << cell(report.incorrect->global) << ',' << report.incorrect->labeled_total;
    } else {
        out << ',';
    }
    out << '\n';
    return out.str();
}

std::string metrics_to_text(const MetricsReport& report) {
    std::ostringstream out;
    auto pct = [](const std::optional<double>& v) -> std::string {
        if (!v) return "--";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", 100.0 * *v);
        return buf;
    };
    out << "class  iou%  incorrect%\n";
    for (std::int32_t c = 0; c < report.num_classes; ++c) {
        out << c << "  " << pct(report.iou.per_class[c]) << "  ";
        out << (report.incorrect ? pct(report.incorrect->per_class[c]) : "--");
        out << '\n';
    }
    out << "mIoU " << pct(report.iou.miou);
    if (report.incorrect) out << "  global incorrect " << pct(report.incorrect->global);
    if (report.coverage) out << "  coverage " << pct(report.coverage);
    out << '\n';
    return out.str();
}

}  // namespace esl
