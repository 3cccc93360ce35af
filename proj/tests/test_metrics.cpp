#include <doctest.h>

#include <cmath>

#include "eslkit/metrics.hpp"
#include "eslkit/rng.hpp"
#include "oracles.hpp"

using namespace esl;

namespace {

LabelMap random_labels(SplitMix& rng, std::int32_t h, std::int32_t w,
                       std::int32_t c, double void_frac) {
    LabelMap m;
    m.height = h;
    m.width = w;
    m.num_classes = c;
    for (std::int64_t p = 0; p < static_cast<std::int64_t>(h) * w; ++p) {
        const double u = rng.uniform();
        if (u < void_frac) {
            m.labels.push_back(kUnlabeled);
        } else {
            m.labels.push_back(static_cast<std::uint8_t>(rng.uniform() * c));
        }
    }
    return m;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("perfect prediction gives a diagonal matrix and mIoU 1") {
    SplitMix rng(3);
    LabelMap gt = random_labels(rng, 6, 6, 4, 0.0);
    ConfusionMatrix cm = confusion(gt, gt);
    CHECK(cm.void_pixels == 0);
    for (std::int32_t i = 0; i < 4; ++i) {
        for (std::int32_t j = 0; j < 4; ++j) {
            if (i != j) CHECK(cm.at(i, j) == 0);
        }
    }
    IouReport rep = iou(cm);
    for (std::int32_t c = 0; c < 4; ++c) {
        if (rep.per_class[c]) CHECK(*rep.per_class[c] == 1.0);
    }
    CHECK(*rep.miou == 1.0);
}

TEST_CASE("all-VOID ground truth tallies nothing") {
    LabelMap gt;
    gt.height = 3;
    gt.width = 3;
    gt.num_classes = 2;
    gt.labels.assign(9, kUnlabeled);
    LabelMap pred = gt;
    pred.labels.assign(9, 1);
    ConfusionMatrix cm = confusion(pred, gt);
    CHECK(cm.total() == 0);
    CHECK(cm.void_pixels == 9);
    CHECK(!iou(cm).miou.has_value());
}

TEST_CASE("confusion matches a per-pixel recount") {
    SplitMix rng(5);
    LabelMap gt = random_labels(rng, 8, 8, 3, 0.2);
    LabelMap pred = random_labels(rng, 8, 8, 3, 0.0);
    ConfusionMatrix cm = confusion(pred, gt);
    std::vector<std::uint64_t> want(9, 0);
    std::uint64_t voids = 0;
    for (int p = 0; p < 64; ++p) {
        if (gt.labels[p] == kUnlabeled) {
            ++voids;
            continue;
        }
        ++want[gt.labels[p] * 3 + pred.labels[p]];
    }
    CHECK(cm.counts == want);
    CHECK(cm.void_pixels == voids);
    CHECK(cm.total() + cm.void_pixels == 64);
}

TEST_CASE("VOID prediction entries are rejected") {
    LabelMap gt;
    gt.height = 1;
    gt.width = 1;
    gt.num_classes = 2;
    gt.labels = {0};
    LabelMap pred = gt;
    pred.labels = {kUnlabeled};
    CHECK_THROWS_AS(confusion(pred, gt), std::invalid_argument);
}

TEST_CASE("disjoint prediction yields IoU 0 for that class") {
    // gt has class 0 on the left half, pred puts class 1 everywhere
    LabelMap gt, pred;
    gt.height = pred.height = 1;
    gt.width = pred.width = 4;
    gt.num_classes = pred.num_classes = 2;
    gt.labels = {0, 0, 1, 1};
    pred.labels = {1, 1, 1, 1};
    IouReport rep = iou(confusion(pred, gt));
    CHECK(*rep.per_class[0] == 0.0);
    CHECK(*rep.per_class[1] == 0.5);
}

TEST_CASE("hand-built 3-class matrix matches the formula") {
    ConfusionMatrix cm = ConfusionMatrix::make(3);
    cm.at(0, 0) = 10;
    cm.at(0, 1) = 2;
    cm.at(1, 1) = 5;
    cm.at(1, 2) = 3;
    cm.at(2, 2) = 7;
    cm.at(2, 0) = 1;
    IouReport rep = iou(cm);
    // IoU_0 = 10 / (10 + fp=1 + fn=2)
    CHECK(*rep.per_class[0] == doctest::Approx(10.0 / 13.0).epsilon(1e-12));
    // IoU_1 = 5 / (5 + fp=2 + fn=3)
    CHECK(*rep.per_class[1] == doctest::Approx(5.0 / 10.0).epsilon(1e-12));
    // IoU_2 = 7 / (7 + fp=3 + fn=1)
    CHECK(*rep.per_class[2] == doctest::Approx(7.0 / 11.0).epsilon(1e-12));
    const double want =
        (10.0 / 13.0 + 5.0 / 10.0 + 7.0 / 11.0) / 3.0;
    CHECK(*rep.miou == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("miou equals the mean of defined per-class IoUs") {
    SplitMix rng(7);
    LabelMap gt = random_labels(rng, 10, 10, 5, 0.1);
    LabelMap pred = random_labels(rng, 10, 10, 5, 0.0);
    IouReport rep = iou(confusion(pred, gt));
    double sum = 0.0;
    int n = 0;
    for (const auto& v : rep.per_class) {
        if (v) {
            sum += *v;
            ++n;
        }
    }
    REQUIRE(n > 0);
    CHECK(std::abs(*rep.miou - sum / n) < 1e-12);
}

TEST_CASE("confusion is additive over image partitions") {
    SplitMix rng(9);
    LabelMap gt1 = random_labels(rng, 5, 5, 3, 0.1);
    LabelMap pr1 = random_labels(rng, 5, 5, 3, 0.0);
    LabelMap gt2 = random_labels(rng, 5, 5, 3, 0.1);
    LabelMap pr2 = random_labels(rng, 5, 5, 3, 0.0);
    ConfusionMatrix sum = confusion(pr1, gt1);
    sum += confusion(pr2, gt2);

    // same pixels, one combined pass
    LabelMap gt_all, pr_all;
    gt_all.height = pr_all.height = 10;
    gt_all.width = pr_all.width = 5;
    gt_all.num_classes = pr_all.num_classes = 3;
    gt_all.labels = gt1.labels;
    gt_all.labels.insert(gt_all.labels.end(), gt2.labels.begin(), gt2.labels.end());
    pr_all.labels = pr1.labels;
    pr_all.labels.insert(pr_all.labels.end(), pr2.labels.begin(), pr2.labels.end());
    ConfusionMatrix whole = confusion(pr_all, gt_all);
    CHECK(sum.counts == whole.counts);
    CHECK(sum.void_pixels == whole.void_pixels);
}

TEST_CASE("iou is equivariant under simultaneous class relabeling") {
    SplitMix rng(11);
    LabelMap gt = random_labels(rng, 8, 8, 4, 0.1);
    LabelMap pred = random_labels(rng, 8, 8, 4, 0.0);
    IouReport base = iou(confusion(pred, gt));

    const std::uint8_t perm[4] = {2, 0, 3, 1};
    LabelMap gt_p = gt, pred_p = pred;
    for (auto& v : gt_p.labels) {
        if (v != kUnlabeled) v = perm[v];
    }
    for (auto& v : pred_p.labels) v = perm[v];
    IouReport mapped = iou(confusion(pred_p, gt_p));
    for (int c = 0; c < 4; ++c) {
        CHECK(mapped.per_class[perm[c]] == base.per_class[c]);
    }
    CHECK(mapped.miou == base.miou);
}

TEST_CASE("incorrect ratio of a perfect pseudo map is zero") {
    SplitMix rng(13);
    LabelMap gt = random_labels(rng, 6, 6, 3, 0.0);
    PseudoLabelMap pseudo;
    pseudo.height = 6;
    pseudo.width = 6;
    pseudo.num_classes = 3;
    pseudo.labels = gt.labels;
    // null out a few; correctness of the rest is untouched
    pseudo.labels[0] = kUnlabeled;
    pseudo.labels[7] = kUnlabeled;
    IncorrectRatioReport rep = incorrect_ratio(pseudo, gt);
    for (const auto& r : rep.per_class) {
        if (r) CHECK(*r == 0.0);
    }
    CHECK(*rep.global == 0.0);
}

TEST_CASE("three labeled, one wrong gives ratio one third") {
    LabelMap gt;
    gt.height = 1;
    gt.width = 4;
    gt.num_classes = 2;
    gt.labels = {0, 0, 0, 1};
    PseudoLabelMap pseudo;
    pseudo.height = 1;
    pseudo.width = 4;
    pseudo.num_classes = 2;
    pseudo.labels = {0, 0, kUnlabeled, 0};  // class 0: labeled 3, wrong 1
    IncorrectRatioReport rep = incorrect_ratio(pseudo, gt);
    CHECK(*rep.per_class[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(!rep.per_class[1].has_value());
}

TEST_CASE("all-null pseudo maps are undefined everywhere, never NaN") {
    SplitMix rng(17);
    LabelMap gt = random_labels(rng, 4, 4, 3, 0.0);
    PseudoLabelMap pseudo;
    pseudo.height = 4;
    pseudo.width = 4;
    pseudo.num_classes = 3;
    pseudo.labels.assign(16, kUnlabeled);
    IncorrectRatioReport rep = incorrect_ratio(pseudo, gt);
    for (const auto& r : rep.per_class) CHECK(!r.has_value());
    CHECK(!rep.global.has_value());
}

TEST_CASE("global ratio is the count-weighted mean of class ratios") {
    SplitMix rng(19);
    LabelMap gt = random_labels(rng, 12, 12, 4, 0.1);
    PseudoLabelMap pseudo;
    pseudo.height = 12;
    pseudo.width = 12;
    pseudo.num_classes = 4;
    for (int p = 0; p < 144; ++p) {
        const double u = rng.uniform();
        pseudo.labels.push_back(u < 0.4 ? kUnlabeled
                                        : static_cast<std::uint8_t>(rng.uniform() * 4));
    }
    IncorrectRatioReport rep = incorrect_ratio(pseudo, gt);
    REQUIRE(rep.global.has_value());
    double weighted = 0.0;
    for (int c = 0; c < 4; ++c) {
        if (rep.per_class[c]) {
            weighted += *rep.per_class[c] * rep.per_class_labeled[c];
        }
    }
    CHECK(std::abs(*rep.global - weighted / rep.labeled_total) < 1e-12);
}

TEST_CASE("relative change follows the plain percentage formula") {
    CHECK(*relative_change(std::optional<double>(13.9), std::optional<double>(14.5)) ==
          doctest::Approx(100.0 * (13.9 - 14.5) / 14.5).epsilon(1e-12));
    // the plain formula gives about -4.1 for 14.5 -> 13.9
    CHECK(*relative_change(std::optional<double>(13.9), std::optional<double>(14.5)) ==
          doctest::Approx(-4.1379310344827587).epsilon(1e-12));
    CHECK(*relative_change(std::optional<double>(12.0), std::optional<double>(10.0)) ==
          doctest::Approx(20.0).epsilon(1e-12));
    CHECK(!relative_change(std::optional<double>(1.0), std::optional<double>(0.0)));
    CHECK(!relative_change(std::nullopt, std::optional<double>(1.0)));
}

TEST_CASE("identical reports have all-zero relative changes") {
    SplitMix rng(23);
    LabelMap gt = random_labels(rng, 6, 6, 3, 0.0);
    LabelMap pred = random_labels(rng, 6, 6, 3, 0.0);
    MetricsReport rep;
    rep.num_classes = 3;
    rep.iou = iou(confusion(pred, gt));
    RelativeChangeReport rel = relative_change(rep, rep);
    for (int c = 0; c < 3; ++c) {
        if (rel.per_class_iou[c]) CHECK(*rel.per_class_iou[c] == 0.0);
    }
    if (rel.miou) CHECK(*rel.miou == 0.0);
}

TEST_CASE("mean over a class subset skips the excluded ids") {
    ConfusionMatrix cm = ConfusionMatrix::make(3);
    cm.at(0, 0) = 10;
    cm.at(1, 1) = 10;
    cm.at(2, 2) = 5;
    cm.at(2, 0) = 5;
    IouReport rep = iou(cm);
    const auto sub = mean_iou_subset(rep, {0, 1});
    CHECK(*sub == doctest::Approx((10.0 / 15.0 + 1.0) / 2.0).epsilon(1e-12));
    CHECK_THROWS_AS(mean_iou_subset(rep, {7}), std::invalid_argument);
}

TEST_CASE("metrics JSON and CSV round-trip undefined entries") {
    MetricsReport rep;
    rep.num_classes = 2;
    rep.iou.per_class = {std::optional<double>(0.5), std::nullopt};
    rep.iou.miou = 0.5;
    rep.coverage = 0.75;
    const std::string json_text = metrics_to_json(rep);
    MetricsReport back = metrics_from_json(json_text);
    CHECK(back.iou.per_class[0] == rep.iou.per_class[0]);
    CHECK(!back.iou.per_class[1].has_value());
    CHECK(back.coverage == rep.coverage);

    const std::string csv = metrics_to_csv(rep);
    CHECK(csv.find("1,,") != std::string::npos);  // undefined -> empty cell
}

}  // TEST_SUITE
