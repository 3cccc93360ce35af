#include "eslkit/thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "eslkit/confidence.hpp"

namespace esl {

using nlohmann::json;

std::string to_string(ConfidenceKind kind) {
    return kind == ConfidenceKind::Softmax ? "softmax" : "entropy";
}

ConfidenceKind confidence_kind_from_string(const std::string& s) {
    if (s == "softmax") return ConfidenceKind::Softmax;
    if (s == "entropy") return ConfidenceKind::Entropy;
    throw std::invalid_argument("unknown confidence kind '" + s + "'");
}

ClassSampleBag ClassSampleBag::make(ConfidenceKind kind, std::int32_t num_classes) {
    if (num_classes < 2 || num_classes > kMaxClasses) {
        throw std::invalid_argument("ClassSampleBag: num_classes out of range");
    }
    ClassSampleBag bag;
    bag.kind = kind;
    bag.num_classes = num_classes;
    bag.samples.resize(num_classes);
    return bag;
}

std::uint64_t ClassSampleBag::total_samples() const {
    std::uint64_t n = 0;
    for (const auto& s : samples) n += s.size();
    return n;
}

namespace {

void accumulate_softmax(ClassSampleBag& bag, const ProbMap& prob) {
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
        bag.samples[best].push_back(best_v);
    }
}

void accumulate_entropy(ClassSampleBag& bag, const ProbMap& prob,
                        const EntropyMap& ent) {
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
        bag.samples[best].push_back(ent.values[p]);
    }
}

}  // namespace

void accumulate(ClassSampleBag& bag, const ProbMap& prob) {
    if (bag.num_classes != prob.num_classes) {
        throw std::invalid_argument("accumulate: class count mismatch");
    }
    if (bag.kind == ConfidenceKind::Softmax) {
        accumulate_softmax(bag, prob);
    } else {
        accumulate_entropy(bag, prob, entropy_map(prob));
    }
}

void accumulate(ClassSampleBag& bag, const ProbMap& prob, const EntropyMap& ent) {
    if (bag.num_classes != prob.num_classes) {
        throw std::invalid_argument("accumulate: class count mismatch");
    }
    if (bag.kind != ConfidenceKind::Entropy) {
        throw std::invalid_argument("accumulate: entropy overload on a softmax bag");
    }
    if (ent.height != prob.height || ent.width != prob.width) {
        throw std::invalid_argument("accumulate: entropy map dimension mismatch");
    }
    accumulate_entropy(bag, prob, ent);
}

ClassSampleBag merge(const ClassSampleBag& a, const ClassSampleBag& b) {
    if (a.kind != b.kind) {
        throw std::invalid_argument("merge: confidence kind mismatch");
    }
    if (a.num_classes != b.num_classes) {
        throw std::invalid_argument("merge: class count mismatch");
    }
    ClassSampleBag out = a;
    for (std::int32_t c = 0; c < a.num_classes; ++c) {
        out.samples[c].insert(out.samples[c].end(), b.samples[c].begin(),
                              b.samples[c].end());
    }
    return out;
}

namespace {

// Median index per kind (0-based into the sorted samples). Odd n: the
// middle. Even n: lower median for softmax, upper for entropy, so the
// strict comparison keeps floor(n/2) samples either way.
std::size_t median_index(ConfidenceKind kind, std::size_t n) {
    if (kind == ConfidenceKind::Softmax) return (n + 1) / 2 - 1;
    return n / 2;
}

std::optional<double> class_median(ConfidenceKind kind,
                                   const std::vector<float>& samples) {
    if (samples.empty()) return std::nullopt;
    std::vector<float> work = samples;
    const std::size_t k = median_index(kind, work.size());
    std::nth_element(work.begin(), work.begin() + k, work.end());
    return static_cast<double>(work[k]);
}

ClassThresholds compute_impl(const ClassSampleBag& bag, ConfidenceKind expect,
                             double hyper, bool clamp) {
    if (bag.kind != expect) {
        throw std::invalid_argument("threshold computation: bag kind mismatch");
    }
    ClassThresholds t;
    t.kind = bag.kind;
    t.num_classes = bag.num_classes;
    t.hyper = hyper;
    t.values.resize(bag.num_classes);
    t.per_class_counts.resize(bag.num_classes);
    t.per_class_medians.resize(bag.num_classes);
    for (std::int32_t c = 0; c < bag.num_classes; ++c) {
        t.per_class_counts[c] = bag.samples[c].size();
        t.per_class_medians[c] = class_median(bag.kind, bag.samples[c]);
        if (!t.per_class_medians[c]) {
            t.values[c] = hyper;
        } else if (!clamp) {
            t.values[c] = *t.per_class_medians[c];
        } else if (bag.kind == ConfidenceKind::Softmax) {
            t.values[c] = std::min(hyper, *t.per_class_medians[c]);
        } else {
            t.values[c] = std::max(hyper, *t.per_class_medians[c]);
        }
    }
    return t;
}

}  // namespace

bool ClassThresholds::clamped(std::int32_t c) const {
    if (!per_class_medians[c]) return false;
    return values[c] != *per_class_medians[c];
}

ClassThresholds compute_mu(const ClassSampleBag& bag, double mu_star) {
    if (!(mu_star > 0.0 && mu_star <= 1.0)) {
        throw std::invalid_argument("compute_mu: mu_star must be in (0, 1]");
    }
    return compute_impl(bag, ConfidenceKind::Softmax, mu_star, true);
}

ClassThresholds compute_nu(const ClassSampleBag& bag, double nu_star) {
    if (!(nu_star > 0.0 && nu_star <= 1.0)) {
        throw std::invalid_argument("compute_nu: nu_star must be in (0, 1]");
    }
    return compute_impl(bag, ConfidenceKind::Entropy, nu_star, true);
}

ClassThresholds compute_nu_median(const ClassSampleBag& bag) {
    return compute_impl(bag, ConfidenceKind::Entropy, 0.0, false);
}

std::string thresholds_to_json(const ClassThresholds& t) {
    json classes = json::array();
    for (std::int32_t c = 0; c < t.num_classes; ++c) {
        json row;
        row["id"] = c;
        row["count"] = t.per_class_counts[c];
        if (t.per_class_medians[c]) {
            row["median"] = *t.per_class_medians[c];
        } else {
            row["median"] = nullptr;
        }
        row["threshold"] = t.values[c];
        row["clamped"] = t.clamped(c);
        classes.push_back(std::move(row));
    }
    json root;
    root["kind"] = to_string(t.kind);
    root["hyper"] = t.hyper;
    root["classes"] = std::move(classes);
    return root.dump(2);
}

ClassThresholds thresholds_from_json(const std::string& json_text) {
    const json root = json::parse(json_text);
    ClassThresholds t;
    t.kind = confidence_kind_from_string(root.at("kind").get<std::string>());
    t.hyper = root.at("hyper").get<double>();
    const json& classes = root.at("classes");
    t.num_classes = static_cast<std::int32_t>(classes.size());
    if (t.num_classes < 2 || t.num_classes > kMaxClasses) {
        throw std::runtime_error("thresholds json: class count out of range");
    }
    t.values.resize(t.num_classes);
    t.per_class_counts.resize(t.num_classes);
    t.per_class_medians.resize(t.num_classes);
    for (const json& row : classes) {
        const auto id = row.at("id").get<std::int64_t>();
        if (id < 0 || id >= t.num_classes) {
            throw std::runtime_error("thresholds json: class id out of range");
        }
        t.per_class_counts[id] = row.at("count").get<std::uint64_t>();
        if (row.at("median").is_null()) {
            t.per_class_medians[id] = std::nullopt;
        } else {
            t.per_class_medians[id] = row.at("median").get<double>();
        }
        t.values[id] = row.at("threshold").get<double>();
    }
    return t;
}

void save_thresholds(const ClassThresholds& t, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    out << thresholds_to_json(t) << '\n';
}

ClassThresholds load_thresholds(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return thresholds_from_json(ss.str());
}

}  // namespace esl
