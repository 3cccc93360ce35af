#include "eslkit/confidence.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "eslkit/parallel.hpp"

namespace esl {
namespace {

// A pixel whose probabilities sum to 1 + kProbSumTolerance can carry a
// normalized entropy up to roughly 1 + kProbSumTolerance, so the
// overshoot window is tied to that tolerance. Anything further out
// means the input was not a probability vector at all.
constexpr double kEntropySlack = 2.0 * kProbSumTolerance;

// Terms are accumulated in ascending value order so the result is a
// pure function of the multiset of probabilities: shuffling a
// distribution cannot change the entropy even in the last bit.
template <typename T>
double accumulate_sorted_terms(std::span<const T> p, std::vector<double>& scratch) {
    scratch.clear();
    for (T v : p) {
        if (v > 0) scratch.push_back(static_cast<double>(v));
    }
    std::sort(scratch.begin(), scratch.end());
    double acc = 0.0;
    for (double x : scratch) acc += x * std::log(x);
    return acc;
}

template <typename T>
double entropy_impl(std::span<const T> p) {
    if (p.size() < 2) {
        throw std::invalid_argument(
            "entropy_of_distribution: need at least 2 classes");
    }
    std::vector<double> scratch;
    const double acc = accumulate_sorted_terms(p, scratch);
    double e = -acc / std::log(static_cast<double>(p.size()));
    if (e < 0.0) {
        // impossible for in-range inputs: every term is <= 0
        throw std::logic_error("entropy below 0: " + std::to_string(e));
    }
    if (e > 1.0) {
        if (e > 1.0 + kEntropySlack) {
            throw std::logic_error("entropy above 1 beyond input tolerance: " +
                                   std::to_string(e));
        }
        e = 1.0;
    }
    return e;
}

}  // namespace

double entropy_of_distribution(std::span<const float> p) {
    return entropy_impl(p);
}

double entropy_of_distribution(std::span<const double> p) {
    return entropy_impl(p);
}

EntropyMap entropy_map(const ProbMap& map) {
    if (map.num_classes < 2) {
        throw std::invalid_argument("entropy_map: need at least 2 classes");
    }
    EntropyMap out;
    out.height = map.height;
    out.width = map.width;
    out.values.resize(map.pixel_count());
    const std::int32_t C = map.num_classes;
    const double inv_log_c = 1.0 / std::log(static_cast<double>(C));
    std::atomic<bool> out_of_range{false};
    parallel_for(map.pixel_count(), [&](std::int64_t begin, std::int64_t end) {
        std::vector<double> scratch;
        scratch.reserve(C);
        for (std::int64_t p = begin; p < end; ++p) {
            const double acc = accumulate_sorted_terms(
                std::span<const float>(map.values.data() + p * C,
                                       static_cast<std::size_t>(C)),
                scratch);
            double e = -acc * inv_log_c;
            if (e > 1.0) {
                if (e > 1.0 + kEntropySlack) out_of_range.store(true);
                e = 1.0;
            }
            out.values[p] = static_cast<float>(e);
        }
    });
    if (out_of_range.load()) {
        throw std::logic_error("entropy_map: entropy above 1 beyond input tolerance");
    }
    return out;
}

}  // namespace esl
