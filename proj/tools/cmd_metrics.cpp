#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "eslkit/extraction.hpp"
#include "eslkit/map_io.hpp"
#include "eslkit/metrics.hpp"

#include "commands.hpp"
#include "util.hpp"

namespace eslcli {

namespace {

struct MetricsOpts {
    std::string pred;
    std::string gt;
    std::string out;
    std::string baseline;  // optional baseline report.json for relative change
    std::int32_t classes = 0;
    std::string class_subset;
    bool force = false;
};

std::vector<std::int32_t> parse_ids(const std::string& csv) {
    std::vector<std::int32_t> out;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
    return out;
}

void run_metrics(const MetricsOpts& opt) {
    using namespace esl;
    const auto pred_files = list_maps(opt.pred, ".segl");
    const auto gt_files = list_maps(opt.gt, ".segl");
    if (pred_files.size() != gt_files.size()) {
        throw std::invalid_argument("prediction and ground-truth counts differ (" +
                                    std::to_string(pred_files.size()) + " vs " +
                                    std::to_string(gt_files.size()) + ")");
    }

    bool has_nulls = false;
    std::vector<PseudoLabelMap> preds;
    std::vector<LabelMap> gts;
    for (std::size_t i = 0; i < pred_files.size(); ++i) {
        preds.push_back(read_pseudolabels(pred_files[i]));
        gts.push_back(read_labelmap(gt_files[i]));
        if (opt.classes > 0 && preds.back().num_classes != opt.classes) {
            throw std::invalid_argument("prediction class count " +
                                        std::to_string(preds.back().num_classes) +
                                        " does not match --classes");
        }
        for (std::uint8_t v : preds.back().labels) has_nulls |= v == kUnlabeled;
    }
    const std::int32_t C = preds.front().num_classes;

    MetricsReport report;
    report.num_classes = C;
    report.iou.per_class.assign(C, std::nullopt);

    // IoU only makes sense for fully labeled predictions
    if (!has_nulls) {
        ConfusionMatrix cm = ConfusionMatrix::make(C);
        for (std::size_t i = 0; i < preds.size(); ++i) {
            LabelMap as_labels;
            as_labels.height = preds[i].height;
            as_labels.width = preds[i].width;
            as_labels.num_classes = C;
            as_labels.labels = preds[i].labels;
            cm += confusion(as_labels, gts[i]);
        }
        report.iou = iou(cm);
    }

    // pseudo-label quality: incorrect ratios and coverage
    {
        IncorrectRatioReport agg;
        agg.per_class.resize(C);
        agg.per_class_labeled.assign(C, 0);
        agg.per_class_incorrect.assign(C, 0);
        std::uint64_t labeled = 0, total = 0;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            const IncorrectRatioReport one = incorrect_ratio(preds[i], gts[i]);
            for (std::int32_t c = 0; c < C; ++c) {
                agg.per_class_labeled[c] += one.per_class_labeled[c];
                agg.per_class_incorrect[c] += one.per_class_incorrect[c];
            }
            const Coverage cov = coverage(preds[i]);
            labeled += cov.labeled;
            total += cov.total;
        }
        for (std::int32_t c = 0; c < C; ++c) {
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
        report.incorrect = std::move(agg);
        report.coverage =
            total == 0 ? 0.0 : static_cast<double>(labeled) / total;
    }

    if (!opt.baseline.empty()) {
        if (!std::filesystem::exists(opt.baseline)) {
            throw IoFailure("baseline report not found: '" + opt.baseline + "'");
        }
        std::ifstream in(opt.baseline);
        std::stringstream ss;
        ss << in.rdbuf();
        const MetricsReport base = metrics_from_json(ss.str());
        report.baseline_name = opt.baseline;
        report.relative = relative_change(report, base);
    }

    std::printf("%s", metrics_to_text(report).c_str());
    if (!opt.class_subset.empty()) {
        const auto subset = mean_iou_subset(report.iou, parse_ids(opt.class_subset));
        if (subset) {
            std::printf("mIoU over classes {%s}: %.1f\n", opt.class_subset.c_str(),
                        100.0 * *subset);
        } else {
            std::printf("mIoU over classes {%s}: undefined\n",
                        opt.class_subset.c_str());
        }
    }

    if (!opt.out.empty()) {
        Provenance prov;
        prov.command = "metrics";
        prov.config = {{"pred", opt.pred},
                       {"gt", opt.gt},
                       {"classes", opt.classes},
                       {"class_subset", opt.class_subset},
                       {"baseline", opt.baseline}};
        prov.add_inputs(pred_files);
        prov.add_inputs(gt_files);
        const std::filesystem::path out_dir(opt.out);
        if (!begin_run(prov, out_dir, opt.force)) return;
        write_text_file(out_dir / "report.json", metrics_to_json(report) + "\n");
        write_text_file(out_dir / "report.csv", metrics_to_csv(report));
        finish_run(prov, out_dir);
    }
}

}  // namespace

void setup_metrics(CLI::App& app) {
    auto opt = std::make_shared<MetricsOpts>();
    CLI::App* cmd = app.add_subcommand(
        "metrics", "IoU, incorrect-prediction ratios and coverage");
    cmd->add_option("--pred", opt->pred, "predicted label maps (.segl file or dir)")
        ->required();
    cmd->add_option("--gt", opt->gt, "ground-truth label maps (.segl file or dir)")
        ->required();
    cmd->add_option("--classes", opt->classes, "expected class count (validated)");
    cmd->add_option("--class-subset", opt->class_subset,
                    "comma-separated ids for an extra subset mean IoU");
    cmd->add_option("--baseline", opt->baseline,
                    "baseline report.json for relative changes");
    cmd->add_option("--out", opt->out, "directory for report.json / report.csv");
    cmd->add_flag("--force", opt->force, "rerun even if output is up to date");
    cmd->callback([opt] { run_metrics(*opt); });
}

}  // namespace eslcli
