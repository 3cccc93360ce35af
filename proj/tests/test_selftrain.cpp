#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "eslkit/confidence.hpp"
#include "eslkit/map_io.hpp"
#include "eslkit/rng.hpp"
#include "eslkit/selftrain.hpp"

using namespace esl;

namespace {

// Small benchmark so every test trains in well under a second.
BenchmarkSpec tiny_benchmark(std::uint64_t seed) {
    BenchmarkSpec bench = default_benchmark(seed);
    bench.scene.height = 16;
    bench.scene.width = 16;
    bench.n_source = 3;
    bench.n_target = 3;
    bench.n_eval = 2;
    bench.train.epochs = 15;
    return bench;
}

SelfTrainPlan tiny_plan(const BenchmarkSpec& bench, ExtractionMode mode) {
    SelfTrainPlan plan;
    plan.mode = mode;
    plan.train = bench.train;
    return plan;
}

}  // namespace

TEST_SUITE("selftrain") {

TEST_CASE("plan JSON round-trips") {
    SelfTrainPlan plan;
    plan.mode = ExtractionMode::Ssl;
    plan.mu_star = 0.85;
    plan.iterations = 2;
    plan.train.epochs = 42;
    plan.train.seed = 1234;
    plan.out_dir = "somewhere";
    SelfTrainPlan back = plan_from_json(plan_to_json(plan));
    CHECK(back.mode == ExtractionMode::Ssl);
    CHECK(back.mu_star == 0.85);
    CHECK(back.iterations == 2);
    CHECK(back.train.epochs == 42);
    CHECK(back.train.seed == 1234);
    CHECK(back.out_dir == "somewhere");
}

TEST_CASE("plan validation rejects nonsense") {
    SelfTrainPlan plan;
    plan.iterations = 0;
    CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
    plan.iterations = 1;
    plan.mode = ExtractionMode::Esl;
    plan.nu_star = 0.0;
    CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
    plan.nu_star = 0.1;
    plan.train.epochs = 0;
    CHECK_THROWS_AS(plan.validate(), std::invalid_argument);
}

TEST_CASE("fixed plans reproduce identical reports") {
    const BenchmarkSpec bench = tiny_benchmark(404);
    const Dataset data = make_dataset(bench);
    const SelfTrainPlan plan = tiny_plan(bench, ExtractionMode::Esl);
    SelfTrainResult a = run_selftrain(plan, data);
    SelfTrainResult b = run_selftrain(plan, data);
    CHECK(experiment_to_json(a.report) == experiment_to_json(b.report));
    CHECK(a.retrained[0].classifier.weights == b.retrained[0].classifier.weights);
}

TEST_CASE("report JSON carries baseline, iterations and provenance") {
    const BenchmarkSpec bench = tiny_benchmark(405);
    const Dataset data = make_dataset(bench);
    SelfTrainPlan plan = tiny_plan(bench, ExtractionMode::Esl);
    plan.iterations = 2;
    SelfTrainResult res = run_selftrain(plan, data);
    CHECK(res.report.iterations.size() == 2);
    CHECK(res.report.baseline_eval.iou.miou.has_value());
    const std::string j = experiment_to_json(res.report);
    CHECK(j.find("\"seed\"") != std::string::npos);
    CHECK(j.find("\"nu_star\"") != std::string::npos);
    CHECK(j.find("\"thresholds\"") != std::string::npos);
}

TEST_CASE("lambda_sl = 0 retraining equals a pseudo-free run with the same seed") {
    const BenchmarkSpec bench = tiny_benchmark(406);
    const Dataset data = make_dataset(bench);
    SelfTrainPlan plan = tiny_plan(bench, ExtractionMode::Esl);
    plan.train.lambda_sl = 0.0;
    SelfTrainResult res = run_selftrain(plan, data);

    TrainConfig direct_cfg = plan.train;
    direct_cfg.seed = mix(plan.train.seed, 1);  // iteration 1 stage seed
    TrainResult direct = train_uda(data.source, data.target_features, direct_cfg,
                                   &data.eval);
    CHECK(res.retrained[0].classifier.weights == direct.classifier.weights);
}

TEST_CASE("training path never touches withheld target labels") {
    const BenchmarkSpec bench = tiny_benchmark(407);
    Dataset data = make_dataset(bench);
    const SelfTrainPlan plan = tiny_plan(bench, ExtractionMode::Esl);
    SelfTrainResult honest = run_selftrain(plan, data);

    // corrupt the withheld labels; models and pseudo-labels must not move
    Dataset corrupted = data;
    for (LabelMap& m : corrupted.target_labels) {
        for (auto& v : m.labels) v = static_cast<std::uint8_t>((v + 1) % m.num_classes);
    }
    SelfTrainResult tampered = run_selftrain(plan, corrupted);
    CHECK(tampered.retrained[0].classifier.weights ==
          honest.retrained[0].classifier.weights);
    CHECK(tampered.pseudo_labels[0][0].labels == honest.pseudo_labels[0][0].labels);
    // only the quality metrics see the difference
    CHECK(*tampered.report.iterations[0].pseudo_quality.incorrect->global !=
          *honest.report.iterations[0].pseudo_quality.incorrect->global);
}

TEST_CASE("on-disk pseudo-labels replay from the logged thresholds") {
    const BenchmarkSpec bench = tiny_benchmark(408);
    const Dataset data = make_dataset(bench);
    SelfTrainPlan plan = tiny_plan(bench, ExtractionMode::Esl);
    plan.iterations = 2;
    const auto out_dir =
        std::filesystem::temp_directory_path() / "eslkit_test_selftrain";
    std::filesystem::remove_all(out_dir);
    plan.out_dir = out_dir.string();
    SelfTrainResult res = run_selftrain(plan, data);

    // iteration k extracts from the model of iteration k-1
    for (int iter = 1; iter <= 2; ++iter) {
        char name[32];
        std::snprintf(name, sizeof(name), "iter_%03d", iter);
        const auto iter_dir = out_dir / name;
        const PixelClassifier& producer =
            iter == 1 ? res.baseline.classifier : res.retrained[iter - 2].classifier;
        ClassThresholds nu = load_thresholds(iter_dir / "thresholds.json");
        for (std::size_t i = 0; i < data.target_features.size(); ++i) {
            ProbMap probs = forward(producer, data.target_features[i]);
            EntropyMap ent = entropy_map(probs);
            PseudoLabelMap replayed = extract_esl(probs, ent, nu);
            char fname[32];
            std::snprintf(fname, sizeof(fname), "pseudo_%04zu.segl", i);
            PseudoLabelMap stored = read_pseudolabels(iter_dir / fname);
            CHECK(replayed.labels == stored.labels);
        }
    }
    CHECK(std::filesystem::exists(out_dir / "report.json"));
    CHECK(std::filesystem::exists(out_dir / "baseline.segm"));
}

TEST_CASE("comparing a report against itself yields zero deltas") {
    const BenchmarkSpec bench = tiny_benchmark(409);
    const Dataset data = make_dataset(bench);
    SelfTrainResult res = run_selftrain(tiny_plan(bench, ExtractionMode::Ssl), data);
    ReportComparison cmp = compare_reports(res.report, res.report);
    CHECK(cmp.json_text.find("\"miou_rel_change\": 0.0") != std::string::npos);
    CHECK(cmp.csv_text.find("global") != std::string::npos);
}

TEST_CASE("single-value sweep equals a direct run") {
    const BenchmarkSpec bench = tiny_benchmark(410);
    const Dataset data = make_dataset(bench);
    SelfTrainPlan plan = tiny_plan(bench, ExtractionMode::Esl);
    plan.nu_star = 0.1;
    SweepResult sweep = sweep_nu(plan, data, {0.1}, false);
    REQUIRE(sweep.entries.size() == 1);
    SelfTrainResult direct = run_selftrain(plan, data);
    CHECK(experiment_to_json(sweep.entries[0].report) ==
          experiment_to_json(direct.report));
}

TEST_CASE("sweep covers the value list plus the median mode") {
    const BenchmarkSpec bench = tiny_benchmark(411);
    const Dataset data = make_dataset(bench);
    SelfTrainPlan plan = tiny_plan(bench, ExtractionMode::Esl);
    SweepResult sweep = sweep_nu(plan, data, {0.05, 0.2}, true);
    REQUIRE(sweep.entries.size() == 3);
    CHECK(sweep.entries[0].nu_star == 0.05);
    CHECK(sweep.entries[1].nu_star == 0.2);
    CHECK(!sweep.entries[2].nu_star.has_value());
    CHECK(sweep.entries[2].report.mode == "esl-median");
    // all entries share the same baseline evaluation
    const std::string base = metrics_to_json(sweep.baseline_eval);
    for (const auto& e : sweep.entries) {
        CHECK(metrics_to_json(e.report.baseline_eval) == base);
    }
    const std::string j = sweep_to_json(sweep);
    CHECK(j.find("\"nu_star\": null") != std::string::npos);
}

TEST_CASE("dataset files round-trip through the manifest loader") {
    const BenchmarkSpec bench = tiny_benchmark(412);
    const Dataset data = make_dataset(bench);
    const auto dir = std::filesystem::temp_directory_path() / "eslkit_test_dataset";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);

    DatasetManifest manifest;
    manifest.height = bench.scene.height;
    manifest.width = bench.scene.width;
    manifest.num_classes = bench.scene.num_classes;
    manifest.feature_dim = bench.scene.feature_dim;
    auto add = [&](const std::string& split, std::int64_t idx,
                   const FeatureMap& f, const LabelMap& l) {
        char fbuf[64], lbuf[64];
        std::snprintf(fbuf, sizeof(fbuf), "%s_%03lld.segf", split.c_str(),
                      static_cast<long long>(idx));
        std::snprintf(lbuf, sizeof(lbuf), "%s_%03lld.segl", split.c_str(),
                      static_cast<long long>(idx));
        write_featuremap(f, dir / fbuf);
        write_labelmap(l, dir / lbuf);
        manifest.scenes.push_back({split, idx, 0, fbuf, lbuf});
    };
    for (std::size_t i = 0; i < data.source.size(); ++i) {
        add("source", i, data.source[i].features, data.source[i].labels);
    }
    for (std::size_t i = 0; i < data.target_features.size(); ++i) {
        add("target", i, data.target_features[i], data.target_labels[i]);
    }
    for (std::size_t i = 0; i < data.eval.size(); ++i) {
        add("target-eval", i, data.eval[i].features, data.eval[i].labels);
    }
    save_manifest(manifest, dir / "manifest.json");

    Dataset loaded = load_dataset(load_manifest(dir / "manifest.json"), dir);
    REQUIRE(loaded.source.size() == data.source.size());
    REQUIRE(loaded.target_features.size() == data.target_features.size());
    REQUIRE(loaded.eval.size() == data.eval.size());
    CHECK(loaded.source[0].features.values == data.source[0].features.values);
    CHECK(loaded.target_labels[1].labels == data.target_labels[1].labels);
    CHECK(loaded.eval[0].labels.labels == data.eval[0].labels.labels);
}

}  // TEST_SUITE
