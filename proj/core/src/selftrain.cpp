#include "eslkit/selftrain.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "eslkit/confidence.hpp"
#include "eslkit/map_io.hpp"
#include "eslkit/rng.hpp"

namespace esl {

using nlohmann::json;

std::string to_string(ExtractionMode mode) {
    switch (mode) {
        case ExtractionMode::Ssl: return "ssl";
        case ExtractionMode::Esl: return "esl";
    }
    return "esl";
}

ExtractionMode extraction_mode_from_string(const std::string& s) {
    if (s == "ssl") return ExtractionMode::Ssl;
    if (s == "esl") return ExtractionMode::Esl;
    throw std::invalid_argument("unknown extraction mode '" + s + "'");
}

void SelfTrainPlan::validate() const {
    if (iterations < 1) {
        throw std::invalid_argument("SelfTrainPlan: iterations must be >= 1");
    }
    if (mode == ExtractionMode::Ssl && !(mu_star > 0.0 && mu_star <= 1.0)) {
        throw std::invalid_argument("SelfTrainPlan: mu_star must be in (0, 1]");
    }
    if (mode == ExtractionMode::Esl && !(nu_star > 0.0 && nu_star <= 1.0)) {
        throw std::invalid_argument("SelfTrainPlan: nu_star must be in (0, 1]");
    }
    train.validate();
}

namespace {

json train_config_to_json(const TrainConfig& c) {
    json j;
    j["lr_f"] = c.lr_f;
    j["momentum"] = c.momentum;
    j["weight_decay"] = c.weight_decay;
    j["lr_d"] = c.lr_d;
    j["lambda_adv"] = c.lambda_adv;
    j["lambda_sl"] = c.lambda_sl;
    j["epochs"] = c.epochs;
    j["batch"] = c.batch;
    j["seed"] = c.seed;
    j["init_stddev"] = c.init_stddev;
    return j;
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.lr_f = j.value("lr_f", c.lr_f);
    c.momentum = j.value("momentum", c.momentum);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.lr_d = j.value("lr_d", c.lr_d);
    c.lambda_adv = j.value("lambda_adv", c.lambda_adv);
    c.lambda_sl = j.value("lambda_sl", c.lambda_sl);
    c.epochs = j.value("epochs", c.epochs);
    c.batch = j.value("batch", c.batch);
    c.seed = j.value("seed", c.seed);
    c.init_stddev = j.value("init_stddev", c.init_stddev);
    return c;
}

}  // namespace

std::string plan_to_json(const SelfTrainPlan& plan) {
    json j;
    j["mode"] = to_string(plan.mode);
    j["mu_star"] = plan.mu_star;
    j["nu_star"] = plan.nu_star;
    j["iterations"] = plan.iterations;
    j["train"] = train_config_to_json(plan.train);
    j["manifest"] = plan.manifest_path;
    j["out_dir"] = plan.out_dir;
    return j.dump(2);
}

SelfTrainPlan plan_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    SelfTrainPlan plan;
    plan.mode = extraction_mode_from_string(j.value("mode", std::string("esl")));
    plan.mu_star = j.value("mu_star", plan.mu_star);
    plan.nu_star = j.value("nu_star", plan.nu_star);
    plan.iterations = j.value("iterations", plan.iterations);
    if (j.contains("train")) plan.train = train_config_from_json(j.at("train"));
    plan.manifest_path = j.value("manifest", std::string());
    plan.out_dir = j.value("out_dir", std::string());
    plan.validate();
    return plan;
}

Dataset load_dataset(const DatasetManifest& manifest,
                     const std::filesystem::path& base_dir) {
    Dataset data;
    for (const SceneEntry& entry : manifest.scenes) {
        FeatureMap features = read_featuremap(base_dir / entry.features_path);
        LabelMap labels = read_labelmap(base_dir / entry.labels_path);
        if (features.height != manifest.height || features.width != manifest.width ||
            features.feature_dim != manifest.feature_dim ||
            labels.num_classes != manifest.num_classes) {
            throw std::runtime_error("dataset: scene dimensions disagree with manifest");
        }
        if (entry.split == "source") {
            data.source.push_back({std::move(features), std::move(labels)});
        } else if (entry.split == "target") {
            data.target_features.push_back(std::move(features));
            data.target_labels.push_back(std::move(labels));
        } else {  // target-eval
            data.eval.push_back({std::move(features), std::move(labels)});
        }
    }
    if (data.source.empty() || data.target_features.empty()) {
        throw std::runtime_error("dataset: needs source and target scenes");
    }
    return data;
}

namespace {

MetricsReport eval_report(const PixelClassifier& clf,
                          const std::vector<LabeledScene>& eval_scenes,
                          std::int32_t num_classes) {
    MetricsReport rep;
    rep.num_classes = num_classes;
    rep.iou.per_class.assign(num_classes, std::nullopt);
    if (eval_scenes.empty()) return rep;
    ConfusionMatrix cm = ConfusionMatrix::make(num_classes);
    for (const LabeledScene& scene : eval_scenes) {
        cm += confusion(argmax_map(forward(clf, scene.features)), scene.labels);
    }
    rep.iou = iou(cm);
    return rep;
}

MetricsReport pseudo_quality_report(const std::vector<PseudoLabelMap>& pseudo,
                                    const std::vector<LabelMap>& gt,
                                    std::int32_t num_classes) {
    MetricsReport rep;
    rep.num_classes = num_classes;
    rep.iou.per_class.assign(num_classes, std::nullopt);

    IncorrectRatioReport agg;
    agg.per_class.resize(num_classes);
    agg.per_class_labeled.assign(num_classes, 0);
    agg.per_class_incorrect.assign(num_classes, 0);
    std::uint64_t labeled = 0, total = 0;
    for (std::size_t i = 0; i < pseudo.size(); ++i) {
        const IncorrectRatioReport one = incorrect_ratio(pseudo[i], gt[i]);
        for (std::int32_t c = 0; c < num_classes; ++c) {
            agg.per_class_labeled[c] += one.per_class_labeled[c];
            agg.per_class_incorrect[c] += one.per_class_incorrect[c];
        }
        const Coverage cov = coverage(pseudo[i]);
        labeled += cov.labeled;
        total += cov.total;
    }
    for (std::int32_t c = 0; c < num_classes; ++c) {
        agg.labeled_total += agg.per_class_labeled[c];
        agg.incorrect_total += agg.per_class_incorrect[c];
        if (agg.per_class_labeled[c] > 0) {
            agg.per_class[c] = static_cast<double>(agg.per_class_incorrect[c]) /
                               static_cast<double>(agg.per_class_labeled[c]);
        }
    }
    if (agg.labeled_total > 0) {
        agg.global = static_cast<double>(agg.incorrect_total) /
                     static_cast<double>(agg.labeled_total);
    }
    rep.incorrect = std::move(agg);
    rep.coverage = total == 0 ? 0.0
                              : static_cast<double>(labeled) /
                                    static_cast<double>(total);
    return rep;
}

json metrics_brief(const MetricsReport& rep) {
    json j;
    j["miou"] = rep.iou.miou ? json(*rep.iou.miou) : json(nullptr);
    if (rep.incorrect) {
        j["global_incorrect"] =
            rep.incorrect->global ? json(*rep.incorrect->global) : json(nullptr);
    }
    if (rep.coverage) j["coverage"] = *rep.coverage;
    return j;
}

// Threshold policy: how an iteration turns a sample bag into thresholds.
enum class ThresholdRule { Mu, Nu, NuMedian };

ClassThresholds apply_rule(ThresholdRule rule, const ClassSampleBag& bag,
                           const SelfTrainPlan& plan) {
    switch (rule) {
        case ThresholdRule::Mu: return compute_mu(bag, plan.mu_star);
        case ThresholdRule::Nu: return compute_nu(bag, plan.nu_star);
        case ThresholdRule::NuMedian: return compute_nu_median(bag);
    }
    throw std::logic_error("unreachable");
}

// Shared driver for plain runs, sweeps and the median limit case.
SelfTrainResult run_loop(const SelfTrainPlan& plan, const Dataset& data,
                         const TrainResult* baseline, ThresholdRule rule,
                         const std::string& mode_name) {
    if (data.target_labels.size() != data.target_features.size()) {
        throw std::invalid_argument(
            "run_selftrain: withheld labels must align with target");
    }
    if (data.source.empty() || data.target_features.empty()) {
        throw std::invalid_argument("run_selftrain: needs source and target scenes");
    }
    const std::int32_t C = data.source.front().labels.num_classes;
    const bool use_entropy = rule != ThresholdRule::Mu;

    const bool to_disk = !plan.out_dir.empty();
    const std::filesystem::path out_dir(plan.out_dir);
    if (to_disk) std::filesystem::create_directories(out_dir);

    SelfTrainResult result;
    result.report.mode = mode_name;
    result.report.plan = plan;
    result.report.num_classes = C;
    // `current` below points into this vector; keep it stable
    result.retrained.reserve(plan.iterations);
    result.pseudo_labels.reserve(plan.iterations);

    // step 1: domain-aligned training without self-supervision
    if (baseline) {
        result.baseline = *baseline;
    } else {
        TrainConfig cfg = plan.train;
        cfg.seed = mix(plan.train.seed, 0);
        result.baseline = train_uda(data.source, data.target_features, cfg, &data.eval);
    }
    result.report.baseline_eval =
        eval_report(result.baseline.classifier, data.eval, C);
    if (to_disk) {
        save_checkpoint(result.baseline.classifier, result.baseline.discriminator,
                        "", out_dir / "baseline.segm");
        std::ofstream(out_dir / "baseline_trainlog.json")
            << train_log_to_json(result.baseline.log) << '\n';
    }

    const PixelClassifier* current = &result.baseline.classifier;
    for (std::int32_t iter = 1; iter <= plan.iterations; ++iter) {
        IterationReport ir;

        // step 2: predictions, dataset-wide thresholds, extraction
        std::vector<ProbMap> probs;
        probs.reserve(data.target_features.size());
        for (const FeatureMap& features : data.target_features) {
            probs.push_back(forward(*current, features));
        }
        std::vector<EntropyMap> entropies;
        if (use_entropy) {
            entropies.reserve(probs.size());
            for (const ProbMap& p : probs) entropies.push_back(entropy_map(p));
        }

        ClassSampleBag bag = ClassSampleBag::make(
            use_entropy ? ConfidenceKind::Entropy : ConfidenceKind::Softmax, C);
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (use_entropy) {
                accumulate(bag, probs[i], entropies[i]);
            } else {
                accumulate(bag, probs[i]);
            }
        }
        ir.thresholds = apply_rule(rule, bag, plan);

        std::vector<PseudoLabelMap> pseudo;
        pseudo.reserve(probs.size());
        for (std::size_t i = 0; i < probs.size(); ++i) {
            pseudo.push_back(use_entropy
                                 ? extract_esl(probs[i], entropies[i], ir.thresholds)
                                 : extract_ssl(probs[i], ir.thresholds));
        }
        ir.pseudo_quality = pseudo_quality_report(pseudo, data.target_labels, C);
        if (ir.pseudo_quality.coverage && *ir.pseudo_quality.coverage == 0.0) {
            std::fprintf(stderr,
                         "[selftrain] warning: iteration %d extracted no "
                         "pseudo-labels; retraining reduces to the baseline "
                         "objective\n",
                         iter);
        }

        // step 3: retrain from scratch with the self-supervised objective
        TrainConfig cfg = plan.train;
        cfg.seed = mix(plan.train.seed, static_cast<std::uint64_t>(iter));
        TrainResult retrained =
            train_uda(data.source, data.target_features, cfg, &data.eval, &pseudo);
        ir.eval = eval_report(retrained.classifier, data.eval, C);

        if (to_disk) {
            char name[32];
            std::snprintf(name, sizeof(name), "iter_%03d", iter);
            const std::filesystem::path iter_dir = out_dir / name;
            std::filesystem::create_directories(iter_dir);
            save_thresholds(ir.thresholds, iter_dir / "thresholds.json");
            for (std::size_t i = 0; i < pseudo.size(); ++i) {
                char fname[32];
                std::snprintf(fname, sizeof(fname), "pseudo_%04zu.segl", i);
                write_pseudolabels(pseudo[i], iter_dir / fname);
            }
            save_checkpoint(retrained.classifier, retrained.discriminator, "",
                            iter_dir / "checkpoint.segm");
            std::ofstream(iter_dir / "trainlog.json")
                << train_log_to_json(retrained.log) << '\n';
        }

        result.pseudo_labels.push_back(std::move(pseudo));
        result.retrained.push_back(std::move(retrained));
        result.report.iterations.push_back(std::move(ir));
        current = &result.retrained.back().classifier;
    }

    if (to_disk) {
        std::ofstream(out_dir / "report.json")
            << experiment_to_json(result.report) << '\n';
    }
    return result;
}

}  // namespace

SelfTrainResult run_selftrain(const SelfTrainPlan& plan, const Dataset& data,
                              const TrainResult* baseline) {
    plan.validate();
    const ThresholdRule rule =
        plan.mode == ExtractionMode::Ssl ? ThresholdRule::Mu : ThresholdRule::Nu;
    return run_loop(plan, data, baseline, rule, to_string(plan.mode));
}

std::string experiment_to_json(const ExperimentReport& report) {
    json j;
    j["mode"] = report.mode;
    j["plan"] = json::parse(plan_to_json(report.plan));
    j["num_classes"] = report.num_classes;
    j["baseline_eval"] = json::parse(metrics_to_json(report.baseline_eval));
    json iters = json::array();
    for (const IterationReport& ir : report.iterations) {
        json e;
        e["thresholds"] = json::parse(thresholds_to_json(ir.thresholds));
        e["pseudo_quality"] = json::parse(metrics_to_json(ir.pseudo_quality));
        e["eval"] = json::parse(metrics_to_json(ir.eval));
        iters.push_back(std::move(e));
    }
    j["iterations"] = std::move(iters);
    return j.dump(2);
}

SweepResult sweep_nu(const SelfTrainPlan& plan, const Dataset& data,
                     const std::vector<double>& nu_values,
                     bool include_median_mode) {
    if (nu_values.empty() && !include_median_mode) {
        throw std::invalid_argument("sweep_nu: empty value list");
    }
    const std::int32_t C = data.source.front().labels.num_classes;

    TrainConfig cfg = plan.train;
    cfg.seed = mix(plan.train.seed, 0);
    const TrainResult baseline =
        train_uda(data.source, data.target_features, cfg, &data.eval);

    SweepResult sweep;
    sweep.baseline_eval = eval_report(baseline.classifier, data.eval, C);
    for (double v : nu_values) {
        SelfTrainPlan p = plan;
        p.mode = ExtractionMode::Esl;
        p.nu_star = v;
        if (!plan.out_dir.empty()) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "nu_%g", v);
            p.out_dir = (std::filesystem::path(plan.out_dir) / buf).string();
        }
        p.validate();
        SweepEntry entry;
        entry.nu_star = v;
        entry.report = run_loop(p, data, &baseline, ThresholdRule::Nu, "esl").report;
        sweep.entries.push_back(std::move(entry));
    }
    if (include_median_mode) {
        SelfTrainPlan p = plan;
        p.mode = ExtractionMode::Esl;
        if (!plan.out_dir.empty()) {
            p.out_dir = (std::filesystem::path(plan.out_dir) / "nu_median").string();
        }
        SweepEntry entry;
        entry.nu_star = std::nullopt;
        entry.report =
            run_loop(p, data, &baseline, ThresholdRule::NuMedian, "esl-median").report;
        sweep.entries.push_back(std::move(entry));
    }
    return sweep;
}

std::string sweep_to_json(const SweepResult& sweep) {
    json j;
    j["baseline"] = metrics_brief(sweep.baseline_eval);
    json entries = json::array();
    for (const SweepEntry& e : sweep.entries) {
        json row;
        row["nu_star"] = e.nu_star ? json(*e.nu_star) : json(nullptr);
        const MetricsReport& final_eval = e.report.iterations.back().eval;
        const MetricsReport& quality = e.report.iterations.back().pseudo_quality;
        row["miou"] = final_eval.iou.miou ? json(*final_eval.iou.miou) : json(nullptr);
        row["pseudo_quality"] = metrics_brief(quality);
        row["report"] = json::parse(experiment_to_json(e.report));
        entries.push_back(std::move(row));
    }
    j["entries"] = std::move(entries);
    return j.dump(2);
}

ReportComparison compare_reports(const ExperimentReport& a,
                                 const ExperimentReport& b) {
    if (a.num_classes != b.num_classes) {
        throw std::invalid_argument("compare_reports: class set mismatch");
    }
    const MetricsReport& ra =
        a.iterations.empty() ? a.baseline_eval : a.iterations.back().eval;
    const MetricsReport& rb =
        b.iterations.empty() ? b.baseline_eval : b.iterations.back().eval;
    const MetricsReport* qa =
        a.iterations.empty() ? nullptr : &a.iterations.back().pseudo_quality;
    const MetricsReport* qb =
        b.iterations.empty() ? nullptr : &b.iterations.back().pseudo_quality;

    auto opt_cell = [](const std::optional<double>& v) {
        return v ? json(*v) : json(nullptr);
    };
    auto cell = [](const std::optional<double>& v) -> std::string {
        if (!v) return "";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.17g", *v);
        return buf;
    };

    json j;
    j["a"]["mode"] = a.mode;
    j["b"]["mode"] = b.mode;
    j["a"]["miou"] = opt_cell(ra.iou.miou);
    j["b"]["miou"] = opt_cell(rb.iou.miou);
    j["miou_rel_change"] = opt_cell(relative_change(rb.iou.miou, ra.iou.miou));

    std::ostringstream csv;
    csv << "id,iou_a,iou_b,incorrect_a,incorrect_b,incorrect_rel_change\n";
    json per_class = json::array();
    for (std::int32_t c = 0; c < a.num_classes; ++c) {
        json row;
        row["id"] = c;
        row["iou_a"] = opt_cell(ra.iou.per_class[c]);
        row["iou_b"] = opt_cell(rb.iou.per_class[c]);
        std::optional<double> ia, ib;
        if (qa && qa->incorrect) ia = qa->incorrect->per_class[c];
        if (qb && qb->incorrect) ib = qb->incorrect->per_class[c];
        const auto rel = relative_change(ib, ia);
        row["incorrect_a"] = opt_cell(ia);
        row["incorrect_b"] = opt_cell(ib);
        row["incorrect_rel_change"] = opt_cell(rel);
        per_class.push_back(std::move(row));
        csv << c << ',' << cell(ra.iou.per_class[c]) << ',' << cell(rb.iou.per_class[c])
            << ',' << cell(ia) << ',' << cell(ib) << ',' << cell(rel) << '\n';
    }
    j["per_class"] = std::move(per_class);
    if (qa && qb && qa->incorrect && qb->incorrect) {
        const auto rel = relative_change(qb->incorrect->global, qa->incorrect->global);
        j["global_incorrect_a"] = opt_cell(qa->incorrect->global);
        j["global_incorrect_b"] = opt_cell(qb->incorrect->global);
        j["global_incorrect_rel_change"] = opt_cell(rel);
        csv << "global," << cell(ra.iou.miou) << ',' << cell(rb.iou.miou) << ','
            << cell(qa->incorrect->global) << ',' << cell(qb->incorrect->global)
            << ',' << cell(rel) << '\n';
    }

    ReportComparison cmp;
    cmp.json_text = j.dump(2);
    cmp.csv_text = csv.str();
    return cmp;
}

// The pinned values come out of a calibration pass over this generator
// and learner: scenes sharp enough that the per-class clamps engage on
// easy classes, a drift large enough to leave adaptation headroom, and
// a training budget short of full convergence so pseudo-label noise
// still steers the retrained model.
BenchmarkSpec default_benchmark(std::uint64_t seed) {
    BenchmarkSpec bench;
    bench.scene.height = 40;
    bench.scene.width = 40;
    bench.scene.num_classes = 8;
    bench.scene.num_regions = 14;
    bench.scene.feature_dim = 6;
    bench.scene.seed = seed;
    bench.scene.class_palette =
        random_palette(bench.scene.num_classes, bench.scene.feature_dim, 5.0f,
                       mix(seed, 11));
    bench.scene.noise_sigma = 0.32f;
    bench.scene.boundary_blur = 1.5f;

    // Each class drifts toward its two palette neighbors (60/40) plus a
    // small random offset, so target clusters sit between classes and
    // carry genuinely multi-class ambiguity.
    const auto& palette = bench.scene.class_palette;
    const std::int32_t C = bench.scene.num_classes;
    const std::int32_t D = bench.scene.feature_dim;
    bench.shift.mean_shift.assign(C, std::vector<float>(D));
    for (std::int32_t c = 0; c < C; ++c) {
        for (std::int32_t d = 0; d < D; ++d) {
            const double toward_next = palette[(c + 1) % C][d] - palette[c][d];
            const double toward_second = palette[(c + 2) % C][d] - palette[c][d];
            bench.shift.mean_shift[c][d] = static_cast<float>(
                0.47 * (0.6 * toward_next + 0.4 * toward_second) +
                0.1 * normal01(mix(mix(seed, 12), c * 64 + d)));
        }
    }
    bench.shift.sigma_scale = 1.15f;
    bench.shift.class_prior_skew.resize(C);
    for (std::int32_t c = 0; c < C; ++c) {
        bench.shift.class_prior_skew[c] =
            static_cast<float>(0.7 + 0.7 * uniform01(mix(mix(seed, 13), c)));
    }

    bench.n_source = 3;
    bench.n_target = 6;
    bench.n_eval = 3;

    bench.train.seed = mix(seed, 14);
    bench.train.epochs = 80;
    bench.train.batch = 2;
    bench.train.lambda_sl = 2.0;
    return bench;
}

Dataset make_dataset(const BenchmarkSpec& bench) {
    Dataset data;
    for (std::int32_t i = 0; i < bench.n_source; ++i) {
        data.source.push_back(gen_scene(bench.scene, i));
    }
    for (std::int32_t i = 0; i < bench.n_target; ++i) {
        LabeledScene scene = gen_target_scene(bench.scene, bench.shift, i);
        data.target_features.push_back(std::move(scene.features));
        data.target_labels.push_back(std::move(scene.labels));
    }
    for (std::int32_t i = 0; i < bench.n_eval; ++i) {
        data.eval.push_back(
            gen_target_scene(bench.scene, bench.shift, bench.n_target + i));
    }
    return data;
}

}  // namespace esl
