#include <cmath>
#include <cstdio>
#include <memory>

#include <json.hpp>

#include "eslkit/confidence.hpp"
#include "eslkit/extraction.hpp"
#include "eslkit/map_io.hpp"

#include "commands.hpp"
#include "util.hpp"

namespace eslcli {

namespace {

struct ExtractOpts {
    std::string mode;
    std::string in;
    std::string thresholds_path;
    std::string out;
    double mu_star = 0.9;
    double nu_star = 0.1;
    bool emit_entropy = false;
    bool force = false;
};

void run_extract(const ExtractOpts& opt) {
    using namespace esl;
    const bool use_entropy = opt.mode == "esl";
    const auto files = list_maps(opt.in, ".segp");

    Provenance prov;
    prov.command = "extract";
    prov.config = {{"mode", opt.mode},
                   {"in", opt.in},
                   {"thresholds", opt.thresholds_path},
                   {"mu_star", opt.mu_star},
                   {"nu_star", opt.nu_star},
                   {"emit_entropy", opt.emit_entropy}};
    prov.add_inputs(files);
    if (!opt.thresholds_path.empty()) {
        if (!std::filesystem::exists(opt.thresholds_path)) {
            throw IoFailure("thresholds file not found: '" + opt.thresholds_path + "'");
        }
        prov.add_input(opt.thresholds_path);
    }
    const std::filesystem::path out_dir(opt.out);
    if (!begin_run(prov, out_dir, opt.force)) return;

    // load maps once; entropy maps are shared by thresholding and extraction
    std::vector<ProbMap> probs;
    std::vector<EntropyMap> entropies;
    probs.reserve(files.size());
    for (const auto& path : files) {
        probs.push_back(read_probmap(path));
        if (use_entropy) entropies.push_back(entropy_map(probs.back()));
    }

    ClassThresholds thresholds;
    if (!opt.thresholds_path.empty()) {
        thresholds = load_thresholds(opt.thresholds_path);
        const ConfidenceKind want =
            use_entropy ? ConfidenceKind::Entropy : ConfidenceKind::Softmax;
        if (thresholds.kind != want) {
            throw std::invalid_argument("thresholds kind '" +
                                        to_string(thresholds.kind) +
                                        "' does not match mode '" + opt.mode + "'");
        }
        const double hyper = use_entropy ? opt.nu_star : opt.mu_star;
        if (std::abs(thresholds.hyper - hyper) > 1e-12) {
            throw std::invalid_argument(
                "hyperparameter mismatch: thresholds file has " +
                std::to_string(thresholds.hyper) + ", flags say " +
                std::to_string(hyper));
        }
    } else {
        ClassSampleBag bag = ClassSampleBag::make(
            use_entropy ? ConfidenceKind::Entropy : ConfidenceKind::Softmax,
            probs.front().num_classes);
        for (std::size_t i = 0; i < probs.size(); ++i) {
            if (use_entropy) {
                accumulate(bag, probs[i], entropies[i]);
            } else {
                accumulate(bag, probs[i]);
            }
        }
        thresholds = use_entropy ? compute_nu(bag, opt.nu_star)
                                 : compute_mu(bag, opt.mu_star);
        save_thresholds(thresholds, out_dir / "thresholds.json");
    }

    nlohmann::json per_file = nlohmann::json::array();
    std::uint64_t labeled = 0, total = 0;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const PseudoLabelMap pseudo =
            use_entropy ? extract_esl(probs[i], entropies[i], thresholds)
                        : extract_ssl(probs[i], thresholds);
        const std::filesystem::path out_path =
            out_dir / files[i].filename().replace_extension(".segl");
        write_pseudolabels(pseudo, out_path);
        if (opt.emit_entropy && use_entropy) {
            write_entropymap(entropies[i],
                             out_dir / files[i].filename().replace_extension(".sege"));
        }
        const Coverage cov = coverage(pseudo);
        labeled += cov.labeled;
        total += cov.total;
        per_file.push_back({{"input", files[i].string()},
                            {"output", out_path.string()},
                            {"coverage", cov.fraction},
                            {"labeled", cov.labeled},
                            {"pixels", cov.total}});
    }

    nlohmann::json summary;
    summary["mode"] = opt.mode;
    summary["maps"] = files.size();
    summary["coverage"] = total == 0 ? 0.0 : static_cast<double>(labeled) / total;
    summary["files"] = std::move(per_file);
    write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");
    finish_run(prov, out_dir);
    std::printf("extract: %s over %zu maps, coverage %.3f -> %s\n", opt.mode.c_str(),
                files.size(), summary["coverage"].get<double>(), opt.out.c_str());
}

}  // namespace

void setup_extract(CLI::App& app) {
    auto opt = std::make_shared<ExtractOpts>();
    CLI::App* cmd =
        app.add_subcommand("extract", "pseudo-label maps from probability maps");
    cmd->add_option("--mode", opt->mode, "ssl (max softmax) | esl (entropy)")
        ->required()
        ->check(CLI::IsMember({"ssl", "esl"}));
    cmd->add_option("--in", opt->in, "directory of probability maps (.segp)")
        ->required();
    cmd->add_option("--out", opt->out, "output directory for .segl maps")->required();
    cmd->add_option("--thresholds", opt->thresholds_path,
                    "thresholds JSON (computed from --in when omitted)");
    cmd->add_option("--mu-star", opt->mu_star, "softmax threshold cap");
    cmd->add_option("--nu-star", opt->nu_star, "entropy threshold floor");
    cmd->add_flag("--emit-entropy", opt->emit_entropy,
                  "also write .sege entropy maps (esl mode)");
    cmd->add_flag("--force", opt->force, "rerun even if output is up to date");
    cmd->callback([opt] { run_extract(*opt); });
}

}  // namespace eslcli
