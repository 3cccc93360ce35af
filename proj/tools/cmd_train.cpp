#include <cstdio>
#include <memory>

#include "eslkit/map_io.hpp"
#include "eslkit/model.hpp"
#include "eslkit/selftrain.hpp"

#include "commands.hpp"
#include "util.hpp"

namespace eslcli {

namespace {

struct TrainOpts {
    std::string manifest;
    std::string out;
    std::string pseudo_dir;
    esl::TrainConfig cfg;
    bool emit_preds = false;
    bool force = false;
};

nlohmann::json config_json(const esl::TrainConfig& c) {
    return {
        {"lr_f", c.lr_f},         {"momentum", c.momentum},
        {"weight_decay", c.weight_decay}, {"lr_d", c.lr_d},
        {"lambda_adv", c.lambda_adv},     {"lambda_sl", c.lambda_sl},
        {"epochs", c.epochs},     {"batch", c.batch},
        {"seed", c.seed},         {"init_stddev", c.init_stddev},
    };
}

void run_train(const TrainOpts& opt) {
    using namespace esl;
    if (!std::filesystem::exists(opt.manifest)) {
        throw IoFailure("manifest not found: '" + opt.manifest + "'");
    }
    const std::filesystem::path manifest_path(opt.manifest);
    const DatasetManifest manifest = load_manifest(manifest_path);
    const Dataset data = load_dataset(manifest, manifest_path.parent_path());

    Provenance prov;
    prov.command = "train";
    prov.config = config_json(opt.cfg);
    prov.config["manifest"] = opt.manifest;
    prov.config["pseudo_dir"] = opt.pseudo_dir;
    prov.config["emit_preds"] = opt.emit_preds;
    prov.add_input(manifest_path);
    for (const SceneEntry& s : manifest.scenes) {
        prov.add_input(manifest_path.parent_path() / s.features_path);
        prov.add_input(manifest_path.parent_path() / s.labels_path);
    }

    std::vector<PseudoLabelMap> pseudo;
    if (!opt.pseudo_dir.empty()) {
        const auto files = list_maps(opt.pseudo_dir, ".segl");
        if (files.size() != data.target_features.size()) {
            throw std::invalid_argument(
                "pseudo-label count does not match the target split (" +
                std::to_string(files.size()) + " vs " +
                std::to_string(data.target_features.size()) + ")");
        }
        prov.add_inputs(files);
        for (const auto& f : files) pseudo.push_back(read_pseudolabels(f));
    }

    const std::filesystem::path out_dir(opt.out);
    if (!begin_run(prov, out_dir, opt.force)) return;

    const TrainResult result =
        train_uda(data.source, data.target_features, opt.cfg,
                  data.eval.empty() ? nullptr : &data.eval,
                  pseudo.empty() ? nullptr : &pseudo);

    save_checkpoint(result.classifier, result.discriminator, prov.config_hash(),
                    out_dir / "checkpoint.segm");
    write_text_file(out_dir / "trainlog.json", train_log_to_json(result.log) + "\n");

    if (opt.emit_preds) {
        const std::filesystem::path preds = out_dir / "preds";
        std::filesystem::create_directories(preds);
        for (std::size_t i = 0; i < data.target_features.size(); ++i) {
            char name[64];
            std::snprintf(name, sizeof(name), "target_%03zu.segp", i);
            write_probmap(forward(result.classifier, data.target_features[i]),
                          preds / name);
        }
    }
    finish_run(prov, out_dir);

    const EpochRecord& last = result.log.epochs.back();
    std::printf("train: %d epochs, final seg loss %.4f, d loss %.4f",
                opt.cfg.epochs, last.seg_loss, last.d_loss);
    if (last.eval_miou) std::printf(", eval mIoU %.4f", *last.eval_miou);
    std::printf(" -> %s\n", opt.out.c_str());
}

}  // namespace

void setup_train(CLI::App& app) {
    auto opt = std::make_shared<TrainOpts>();
    CLI::App* cmd = app.add_subcommand(
        "train", "adversarial domain-aligned training, optionally self-supervised");
    cmd->add_option("--manifest", opt->manifest, "dataset manifest JSON")->required();
    cmd->add_option("--out", opt->out, "output directory")->required();
    cmd->add_option("--pseudo", opt->pseudo_dir,
                    "directory of pseudo-label maps aligned with the target split");
    cmd->add_flag("--emit-preds", opt->emit_preds,
                  "write probability maps for the target split");
    cmd->add_option("--epochs", opt->cfg.epochs, "training epochs");
    cmd->add_option("--batch", opt->cfg.batch, "scenes per step");
    cmd->add_option("--lr-f", opt->cfg.lr_f, "segmenter learning rate");
    cmd->add_option("--lr-d", opt->cfg.lr_d, "discriminator learning rate");
    cmd->add_option("--momentum", opt->cfg.momentum, "segmenter momentum");
    cmd->add_option("--weight-decay", opt->cfg.weight_decay, "segmenter weight decay");
    cmd->add_option("--lambda-adv", opt->cfg.lambda_adv, "adversarial term weight");
    cmd->add_option("--lambda-sl", opt->cfg.lambda_sl, "self-supervised term weight");
    cmd->add_option("--seed", opt->cfg.seed, "training seed");
    cmd->add_option("--init-stddev", opt->cfg.init_stddev, "weight init scale");
    cmd->add_flag("--force", opt->force, "rerun even if output is up to date");
    cmd->callback([opt] { run_train(*opt); });
}

}  // namespace eslcli
