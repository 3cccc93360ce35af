#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>

#include "eslkit/selftrain.hpp"

#include "commands.hpp"
#include "util.hpp"

namespace eslcli {

namespace {

struct PlanOpts {
    std::string plan_path;
    std::string manifest;
    std::string mode;
    double mu_star = -1.0;
    double nu_star = -1.0;
    std::int32_t iterations = 0;
    std::string out;
    // train overrides; negative/zero = keep plan value
    double lr_f = -1, lr_d = -1, momentum = -1, weight_decay = -1;
    double lambda_adv = -1, lambda_sl = -1, init_stddev = -1;
    std::int32_t epochs = 0, batch = 0;
    std::uint64_t seed = 0;
    bool seed_set = false;
    bool force = false;
};

void add_plan_flags(CLI::App* cmd, const std::shared_ptr<PlanOpts>& opt) {
    cmd->add_option("--plan", opt->plan_path,
                    "plan JSON; flags override its values");
    cmd->add_option("--manifest", opt->manifest, "dataset manifest JSON");
    cmd->add_option("--mu-star", opt->mu_star, "softmax threshold cap");
    cmd->add_option("--nu-star", opt->nu_star, "entropy threshold floor");
    cmd->add_option("--iterations", opt->iterations, "self-training iterations");
    cmd->add_option("--out", opt->out, "output directory")->required();
    cmd->add_option("--epochs", opt->epochs, "training epochs");
    cmd->add_option("--batch", opt->batch, "scenes per step");
    cmd->add_option("--lr-f", opt->lr_f, "segmenter learning rate");
    cmd->add_option("--lr-d", opt->lr_d, "discriminator learning rate");
    cmd->add_option("--momentum", opt->momentum, "segmenter momentum");
    cmd->add_option("--weight-decay", opt->weight_decay, "segmenter weight decay");
    cmd->add_option("--lambda-adv", opt->lambda_adv, "adversarial term weight");
    cmd->add_option("--lambda-sl", opt->lambda_sl, "self-supervised term weight");
    cmd->add_option("--seed", opt->seed, "experiment seed")
        ->each([opt](const std::string&) { opt->seed_set = true; });
    cmd->add_option("--init-stddev", opt->init_stddev, "weight init scale");
    cmd->add_flag("--force", opt->force, "rerun even if output is up to date");
}

// Precedence: flags > plan file > built-in defaults.
esl::SelfTrainPlan effective_plan(const PlanOpts& opt) {
    esl::SelfTrainPlan plan;
    if (!opt.plan_path.empty()) {
        if (!std::filesystem::exists(opt.plan_path)) {
            throw IoFailure("plan not found: '" + opt.plan_path + "'");
        }
        std::ifstream in(opt.plan_path);
        std::stringstream ss;
        ss << in.rdbuf();
        plan = esl::plan_from_json(ss.str());
    }
    if (!opt.mode.empty()) plan.mode = esl::extraction_mode_from_string(opt.mode);
    if (opt.mu_star >= 0) plan.mu_star = opt.mu_star;
    if (opt.nu_star >= 0) plan.nu_star = opt.nu_star;
    if (opt.iterations > 0) plan.iterations = opt.iterations;
    if (!opt.manifest.empty()) plan.manifest_path = opt.manifest;
    if (opt.epochs > 0) plan.train.epochs = opt.epochs;
    if (opt.batch > 0) plan.train.batch = opt.batch;
    if (opt.lr_f > 0) plan.train.lr_f = opt.lr_f;
    if (opt.lr_d > 0) plan.train.lr_d = opt.lr_d;
    if (opt.momentum >= 0) plan.train.momentum = opt.momentum;
    if (opt.weight_decay >= 0) plan.train.weight_decay = opt.weight_decay;
    if (opt.lambda_adv >= 0) plan.train.lambda_adv = opt.lambda_adv;
    if (opt.lambda_sl >= 0) plan.train.lambda_sl = opt.lambda_sl;
    if (opt.init_stddev > 0) plan.train.init_stddev = opt.init_stddev;
    if (opt.seed_set) plan.train.seed = opt.seed;
    plan.out_dir = opt.out;
    if (plan.manifest_path.empty()) {
        throw std::invalid_argument("a dataset manifest is required "
                                    "(--manifest or the plan file)");
    }
    plan.validate();
    return plan;
}

esl::Dataset dataset_for(const esl::SelfTrainPlan& plan, Provenance& prov) {
    if (!std::filesystem::exists(plan.manifest_path)) {
        throw IoFailure("manifest not found: '" + plan.manifest_path + "'");
    }
    const std::filesystem::path path(plan.manifest_path);
    const esl::DatasetManifest manifest = esl::load_manifest(path);
    prov.add_input(path);
    for (const esl::SceneEntry& s : manifest.scenes) {
        prov.add_input(path.parent_path() / s.features_path);
        prov.add_input(path.parent_path() / s.labels_path);
    }
    return esl::load_dataset(manifest, path.parent_path());
}

void print_report(const esl::ExperimentReport& report) {
    auto pct = [](const std::optional<double>& v) {
        return v ? 100.0 * *v : -1.0;
    };
    std::printf("baseline: target mIoU %.2f%%\n",
                pct(report.baseline_eval.iou.miou));
    for (std::size_t k = 0; k < report.iterations.size(); ++k) {
        const esl::IterationReport& it = report.iterations[k];
        std::printf("iteration %zu: coverage %.1f%%, incorrect %.2f%%, "
                    "target mIoU %.2f%%\n",
                    k + 1, pct(it.pseudo_quality.coverage),
                    it.pseudo_quality.incorrect && it.pseudo_quality.incorrect->global
                        ? 100.0 * *it.pseudo_quality.incorrect->global
                        : -1.0,
                    pct(it.eval.iou.miou));
    }
}

void run_selftrain_cmd(const PlanOpts& opt) {
    esl::SelfTrainPlan plan = effective_plan(opt);
    Provenance prov;
    prov.command = "selftrain";
    prov.config = nlohmann::json::parse(esl::plan_to_json(plan));
    const esl::Dataset data = dataset_for(plan, prov);
    const std::filesystem::path out_dir(opt.out);
    if (!begin_run(prov, out_dir, opt.force)) return;
    write_text_file(out_dir / "plan_effective.json", esl::plan_to_json(plan) + "\n");
    const esl::SelfTrainResult result = esl::run_selftrain(plan, data);
    finish_run(prov, out_dir);
    print_report(result.report);
}

struct SweepOpts : PlanOpts {
    std::string nu_stars = "0.05,0.1,0.15,0.2,0.3";
    bool median_mode = false;
};

void run_sweep_cmd(const SweepOpts& opt) {
    esl::SelfTrainPlan plan = effective_plan(opt);
    plan.mode = esl::ExtractionMode::Esl;

    std::vector<double> values;
    std::stringstream ss(opt.nu_stars);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) values.push_back(std::stod(tok));
    }

    Provenance prov;
    prov.command = "sweep";
    prov.config = nlohmann::json::parse(esl::plan_to_json(plan));
    prov.config["nu_stars"] = values;
    prov.config["median_mode"] = opt.median_mode;
    const esl::Dataset data = dataset_for(plan, prov);
    const std::filesystem::path out_dir(opt.out);
    if (!begin_run(prov, out_dir, opt.force)) return;

    const esl::SweepResult sweep =
        esl::sweep_nu(plan, data, values, opt.median_mode);
    write_text_file(out_dir / "sweep.json", esl::sweep_to_json(sweep) + "\n");
    finish_run(prov, out_dir);

    std::printf("baseline mIoU %.2f%%\n",
                sweep.baseline_eval.iou.miou ? 100.0 * *sweep.baseline_eval.iou.miou
                                             : -1.0);
    for (const esl::SweepEntry& e : sweep.entries) {
        const auto& miou = e.report.iterations.back().eval.iou.miou;
        if (e.nu_star) {
            std::printf("nu*=%-5g mIoU %.2f%%\n", *e.nu_star,
                        miou ? 100.0 * *miou : -1.0);
        } else {
            std::printf("median  mIoU %.2f%%\n", miou ? 100.0 * *miou : -1.0);
        }
    }
}

}  // namespace

void setup_selftrain(CLI::App& app) {
    auto opt = std::make_shared<PlanOpts>();
    CLI::App* cmd = app.add_subcommand(
        "selftrain", "train, extract pseudo-labels, retrain from scratch");
    add_plan_flags(cmd, opt);
    cmd->add_option("--mode", opt->mode, "ssl | esl")
        ->check(CLI::IsMember({"ssl", "esl"}));
    cmd->callback([opt] { run_selftrain_cmd(*opt); });
}

void setup_sweep(CLI::App& app) {
    auto opt = std::make_shared<SweepOpts>();
    CLI::App* cmd = app.add_subcommand(
        "sweep", "entropy self-training across a grid of nu* values");
    add_plan_flags(cmd, std::static_pointer_cast<PlanOpts>(opt));
    cmd->add_option("--nu-stars", opt->nu_stars, "comma-separated nu* values");
    cmd->add_flag("--median-mode", opt->median_mode,
                  "add the unclamped per-class-median limit case");
    cmd->callback([opt] { run_sweep_cmd(*opt); });
}

}  // namespace eslcli
