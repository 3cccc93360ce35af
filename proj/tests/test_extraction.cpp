#include <doctest.h>

#include "eslkit/confidence.hpp"
#include "eslkit/extraction.hpp"
#include "eslkit/rng.hpp"
#include "oracles.hpp"

using namespace esl;

namespace {

ClassThresholds flat_thresholds(ConfidenceKind kind, std::int32_t C, double value,
                                double hyper) {
    ClassThresholds t;
    t.kind = kind;
    t.num_classes = C;
    t.hyper = hyper;
    t.values.assign(C, value);
    t.per_class_counts.assign(C, 0);
    t.per_class_medians.assign(C, std::nullopt);
    return t;
}

ProbMap single_pixel(std::vector<float> probs) {
    ProbMap m;
    m.height = 1;
    m.width = 1;
    m.num_classes = static_cast<std::int32_t>(probs.size());
    m.values = std::move(probs);
    return m;
}

}  // namespace

TEST_SUITE("extraction") {

TEST_CASE("confident pixel passes the softmax rule") {
    ProbMap m = single_pixel({0.95f, 0.05f});
    PseudoLabelMap out = extract_ssl(m, flat_thresholds(ConfidenceKind::Softmax, 2, 0.9, 0.9));
    CHECK(out.labels[0] == 0);
}

TEST_CASE("below-threshold pixel gets the null label") {
    ProbMap m = single_pixel({0.6f, 0.4f});
    PseudoLabelMap out = extract_ssl(m, flat_thresholds(ConfidenceKind::Softmax, 2, 0.9, 0.9));
    CHECK(out.labels[0] == kUnlabeled);
}

TEST_CASE("high max score can still fail the entropy rule") {
    // two classes at [0.95, 0.05]: normalized entropy ~0.286
    ProbMap m = single_pixel({0.95f, 0.05f});
    EntropyMap ent = entropy_map(m);
    CHECK(ent.values[0] > 0.28f);
    PseudoLabelMap out =
        extract_esl(m, ent, flat_thresholds(ConfidenceKind::Entropy, 2, 0.1, 0.1));
    CHECK(out.labels[0] == kUnlabeled);
}

TEST_CASE("one-hot pixel passes any positive entropy threshold") {
    ProbMap m = single_pixel({0.0f, 1.0f, 0.0f});
    EntropyMap ent = entropy_map(m);
    PseudoLabelMap out =
        extract_esl(m, ent, flat_thresholds(ConfidenceKind::Entropy, 3, 1e-6, 1e-6));
    CHECK(out.labels[0] == 1);
}

TEST_CASE("both rules match a literal per-pixel reference loop") {
    SplitMix rng(37);
    for (int rep = 0; rep < 25; ++rep) {
        ProbMap m = oracle::random_probmap(rng, 8, 8, 4);
        EntropyMap ent = entropy_map(m);

        ClassSampleBag sbag = ClassSampleBag::make(ConfidenceKind::Softmax, 4);
        ClassSampleBag ebag = ClassSampleBag::make(ConfidenceKind::Entropy, 4);
        accumulate(sbag, m);
        accumulate(ebag, m, ent);
        ClassThresholds mu = compute_mu(sbag, 0.9);
        ClassThresholds nu = compute_nu(ebag, 0.1);

        PseudoLabelMap ssl = extract_ssl(m, mu);
        PseudoLabelMap esl = extract_esl(m, ent, nu);
        CHECK(ssl.labels == oracle::ssl_rule(m, mu.values));
        CHECK(esl.labels == oracle::esl_rule(m, ent.values, nu.values));
    }
}

TEST_CASE("every non-null pseudo-label equals the pixel argmax") {
    SplitMix rng(41);
    ProbMap m = oracle::random_probmap(rng, 10, 10, 5);
    EntropyMap ent = entropy_map(m);
    LabelMap am = argmax_map(m);
    ClassSampleBag sbag = ClassSampleBag::make(ConfidenceKind::Softmax, 5);
    accumulate(sbag, m);
    PseudoLabelMap ssl = extract_ssl(m, compute_mu(sbag, 0.9));
    ClassSampleBag ebag = ClassSampleBag::make(ConfidenceKind::Entropy, 5);
    accumulate(ebag, m, ent);
    PseudoLabelMap esl = extract_esl(m, ent, compute_nu(ebag, 0.1));
    for (std::int64_t p = 0; p < m.pixel_count(); ++p) {
        if (ssl.labels[p] != kUnlabeled) CHECK(ssl.labels[p] == am.labels[p]);
        if (esl.labels[p] != kUnlabeled) CHECK(esl.labels[p] == am.labels[p]);
    }
}

TEST_CASE("raising a softmax threshold never adds labels") {
    SplitMix rng(43);
    ProbMap m = oracle::random_probmap(rng, 8, 8, 3);
    ClassThresholds lo = flat_thresholds(ConfidenceKind::Softmax, 3, 0.3, 0.3);
    ClassThresholds hi = lo;
    hi.values[1] = 0.6;  // raise exactly one class
    PseudoLabelMap a = extract_ssl(m, lo);
    PseudoLabelMap b = extract_ssl(m, hi);
    for (std::int64_t p = 0; p < m.pixel_count(); ++p) {
        if (b.labels[p] != kUnlabeled) CHECK(a.labels[p] == b.labels[p]);
        if (a.labels[p] != kUnlabeled && a.labels[p] != 1) {
            CHECK(b.labels[p] == a.labels[p]);  // other classes untouched
        }
    }
}

TEST_CASE("raising an entropy threshold never removes labels of that class") {
    SplitMix rng(47);
    ProbMap m = oracle::random_probmap(rng, 8, 8, 3);
    EntropyMap ent = entropy_map(m);
    ClassThresholds lo = flat_thresholds(ConfidenceKind::Entropy, 3, 0.4, 0.4);
    ClassThresholds hi = lo;
    hi.values[2] = 0.8;
    PseudoLabelMap a = extract_esl(m, ent, lo);
    PseudoLabelMap b = extract_esl(m, ent, hi);
    for (std::int64_t p = 0; p < m.pixel_count(); ++p) {
        if (a.labels[p] == 2) CHECK(b.labels[p] == 2);
    }
}

TEST_CASE("extraction is deterministic") {
    SplitMix rng(53);
    ProbMap m = oracle::random_probmap(rng, 6, 6, 4);
    EntropyMap ent = entropy_map(m);
    ClassThresholds nu = flat_thresholds(ConfidenceKind::Entropy, 4, 0.35, 0.35);
    PseudoLabelMap a = extract_esl(m, ent, nu);
    PseudoLabelMap b = extract_esl(m, ent, nu);
    CHECK(a.labels == b.labels);
}

TEST_CASE("identical maps diff to agree/both-null only") {
    SplitMix rng(59);
    ProbMap m = oracle::random_probmap(rng, 5, 5, 3);
    PseudoLabelMap x = extract_ssl(m, flat_thresholds(ConfidenceKind::Softmax, 3, 0.5, 0.5));
    PseudoLabelDiff d = pseudo_label_diff(x, x);
    CHECK(d.counts[static_cast<int>(DiffCategory::SslOnly)] == 0);
    CHECK(d.counts[static_cast<int>(DiffCategory::EslOnly)] == 0);
    CHECK(d.counts[static_cast<int>(DiffCategory::Conflict)] == 0);
    CHECK(d.counts[static_cast<int>(DiffCategory::Agree)] +
              d.counts[static_cast<int>(DiffCategory::BothNull)] ==
          static_cast<std::uint64_t>(m.pixel_count()));
}

TEST_CASE("one extra labeled pixel lands in ssl-only") {
    PseudoLabelMap a, b;
    a.height = b.height = 1;
    a.width = b.width = 2;
    a.num_classes = b.num_classes = 2;
    a.labels = {1, 0};
    b.labels = {1, kUnlabeled};
    PseudoLabelDiff d = pseudo_label_diff(a, b);
    CHECK(d.counts[static_cast<int>(DiffCategory::Agree)] == 1);
    CHECK(d.counts[static_cast<int>(DiffCategory::SslOnly)] == 1);
}

TEST_CASE("diff counts match an exhaustive recount") {
    SplitMix rng(61);
    for (int rep = 0; rep < 10; ++rep) {
        PseudoLabelMap a, b;
        a.height = b.height = 7;
        a.width = b.width = 7;
        a.num_classes = b.num_classes = 3;
        for (int p = 0; p < 49; ++p) {
            auto draw = [&](PseudoLabelMap& m) {
                const double u = rng.uniform();
                m.labels.push_back(u < 0.4 ? kUnlabeled
                                           : static_cast<std::uint8_t>(u * 10) % 3);
            };
            draw(a);
            draw(b);
        }
        PseudoLabelDiff d = pseudo_label_diff(a, b);
        std::array<std::uint64_t, 5> want{};
        for (int p = 0; p < 49; ++p) {
            const auto x = a.labels[p], y = b.labels[p];
            int cat;
            if (x == kUnlabeled && y == kUnlabeled) cat = 0;
            else if (x != kUnlabeled && y == kUnlabeled) cat = 2;
            else if (x == kUnlabeled) cat = 3;
            else cat = x == y ? 1 : 4;
            ++want[cat];
            CHECK(d.categories[p] == cat);
        }
        CHECK(d.counts == want);
    }
}

TEST_CASE("conflicts cannot arise from a shared probability map") {
    SplitMix rng(67);
    ProbMap m = oracle::random_probmap(rng, 9, 9, 4);
    EntropyMap ent = entropy_map(m);
    PseudoLabelMap ssl = extract_ssl(m, flat_thresholds(ConfidenceKind::Softmax, 4, 0.3, 0.3));
    PseudoLabelMap esl = extract_esl(m, ent, flat_thresholds(ConfidenceKind::Entropy, 4, 0.8, 0.8));
    PseudoLabelDiff d = pseudo_label_diff(ssl, esl);
    CHECK(d.counts[static_cast<int>(DiffCategory::Conflict)] == 0);
}

TEST_CASE("coverage of all-null and fully labeled maps") {
    PseudoLabelMap m;
    m.height = 2;
    m.width = 2;
    m.num_classes = 3;
    m.labels.assign(4, kUnlabeled);
    CHECK(coverage(m).fraction == 0.0);
    m.labels = {0, 1, 2, 1};
    Coverage cov = coverage(m);
    CHECK(cov.fraction == 1.0);
    CHECK(cov.per_class_counts[1] == 2);
}

TEST_CASE("coverage matches a recount on random maps") {
    SplitMix rng(71);
    PseudoLabelMap m;
    m.height = 6;
    m.width = 6;
    m.num_classes = 4;
    for (int p = 0; p < 36; ++p) {
        const double u = rng.uniform();
        m.labels.push_back(u < 0.3 ? kUnlabeled : static_cast<std::uint8_t>(u * 13) % 4);
    }
    Coverage cov = coverage(m);
    std::uint64_t labeled = 0;
    std::vector<std::uint64_t> per(4, 0);
    for (auto v : m.labels) {
        if (v != kUnlabeled) {
            ++labeled;
            ++per[v];
        }
    }
    CHECK(cov.labeled == labeled);
    CHECK(cov.per_class_counts == per);
    CHECK(cov.fraction == doctest::Approx(labeled / 36.0).epsilon(1e-12));
}

TEST_CASE("dimension mismatches are rejected") {
    SplitMix rng(73);
    ProbMap m = oracle::random_probmap(rng, 2, 2, 3);
    CHECK_THROWS_AS(extract_ssl(m, flat_thresholds(ConfidenceKind::Softmax, 4, 0.5, 0.5)),
                    std::invalid_argument);
    CHECK_THROWS_AS(extract_ssl(m, flat_thresholds(ConfidenceKind::Entropy, 3, 0.5, 0.5)),
                    std::invalid_argument);
    EntropyMap ent;
    ent.height = 1;
    ent.width = 2;
    ent.values = {0.1f, 0.1f};
    CHECK_THROWS_AS(extract_esl(m, ent, flat_thresholds(ConfidenceKind::Entropy, 3, 0.5, 0.5)),
                    std::invalid_argument);
}

}  // TEST_SUITE
