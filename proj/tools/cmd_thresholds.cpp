#include <cstdio>
#include <memory>

#include "eslkit/confidence.hpp"
#include "eslkit/map_io.hpp"
#include "eslkit/thresholds.hpp"

#include "commands.hpp"
#include "util.hpp"

namespace eslcli {

namespace {

struct ThresholdsOpts {
    std::string preds;
    std::string out = "thresholds.json";
    std::string kind = "entropy";
    double mu_star = 0.9;
    double nu_star = 0.1;
    bool median_mode = false;
};

void run_thresholds(const ThresholdsOpts& opt) {
    using namespace esl;
    const auto files = list_maps(opt.preds, ".segp");
    const ConfidenceKind kind = confidence_kind_from_string(opt.kind);
    if (opt.median_mode && kind != ConfidenceKind::Entropy) {
        throw std::invalid_argument("--median-mode applies to the entropy kind only");
    }

    ClassSampleBag bag;
    bool first = true;
    for (const auto& path : files) {
        const ProbMap prob = read_probmap(path);
        if (first) {
            bag = ClassSampleBag::make(kind, prob.num_classes);
            first = false;
        }
        accumulate(bag, prob);
    }
    ClassThresholds t;
    if (opt.median_mode) {
        t = compute_nu_median(bag);
    } else if (kind == ConfidenceKind::Softmax) {
        t = compute_mu(bag, opt.mu_star);
    } else {
        t = compute_nu(bag, opt.nu_star);
    }
    save_thresholds(t, opt.out);

    Provenance prov;
    prov.command = "thresholds";
    prov.config = {{"preds", opt.preds},
                   {"kind", opt.kind},
                   {"mu_star", opt.mu_star},
                   {"nu_star", opt.nu_star},
                   {"median_mode", opt.median_mode},
                   {"out", opt.out}};
    prov.add_inputs(files);
    write_text_file(std::filesystem::path(opt.out).string() + ".provenance.json",
                    prov.to_json().dump(2) + "\n");

    std::uint64_t samples = bag.total_samples();
    std::printf("thresholds: %s over %zu maps (%llu pixels) -> %s\n",
                opt.kind.c_str(), files.size(),
                static_cast<unsigned long long>(samples), opt.out.c_str());
}

}  // namespace

void setup_thresholds(CLI::App& app) {
    auto opt = std::make_shared<ThresholdsOpts>();
    CLI::App* cmd = app.add_subcommand(
        "thresholds", "per-class confidence thresholds over a prediction set");
    cmd->add_option("--preds", opt->preds, "directory of probability maps (.segp)")
        ->required();
    cmd->add_option("--out", opt->out, "output thresholds JSON path");
    cmd->add_option("--kind", opt->kind, "softmax | entropy")
        ->check(CLI::IsMember({"softmax", "entropy"}));
    cmd->add_option("--mu-star", opt->mu_star, "softmax threshold cap");
    cmd->add_option("--nu-star", opt->nu_star, "entropy threshold floor");
    cmd->add_flag("--median-mode", opt->median_mode,
                  "use raw per-class medians with no clamp (entropy only)");
    cmd->callback([opt] { run_thresholds(*opt); });
}

}  // namespace eslcli
