#include <cstdio>
#include <memory>

#include "eslkit/confidence.hpp"
#include "eslkit/extraction.hpp"
#include "eslkit/map_io.hpp"

#include "commands.hpp"
#include "png_writer.hpp"
#include "util.hpp"

namespace eslcli {

namespace {

struct RenderOpts {
    std::string labels;
    std::string entropy;
    std::string prob;
    std::string diff_a;
    std::string diff_b;
    std::string out;
};

void run_render(const RenderOpts& opt) {
    using namespace esl;
    const int sources = !opt.labels.empty() + !opt.entropy.empty() +
                        !opt.prob.empty() + !opt.diff_a.empty();
    if (sources != 1) {
        throw std::invalid_argument(
            "pass exactly one of --labels, --entropy, --prob, --diff-a/--diff-b");
    }

    Provenance prov;
    prov.command = "render";
    prov.config = {{"labels", opt.labels},
                   {"entropy", opt.entropy},
                   {"prob", opt.prob},
                   {"diff_a", opt.diff_a},
                   {"diff_b", opt.diff_b},
                   {"out", opt.out}};

    if (!opt.labels.empty()) {
        prov.add_input(opt.labels);
        render_pseudolabels(read_pseudolabels(opt.labels), opt.out);
    } else if (!opt.entropy.empty()) {
        prov.add_input(opt.entropy);
        render_entropy(read_entropymap(opt.entropy), opt.out);
    } else if (!opt.prob.empty()) {
        prov.add_input(opt.prob);
        render_labels(argmax_map(read_probmap(opt.prob)), opt.out);
    } else {
        if (opt.diff_b.empty()) {
            throw std::invalid_argument("--diff-a requires --diff-b");
        }
        prov.add_input(opt.diff_a);
        prov.add_input(opt.diff_b);
        const PseudoLabelDiff diff = pseudo_label_diff(
            read_pseudolabels(opt.diff_a), read_pseudolabels(opt.diff_b));
        render_diff(diff, opt.out);
    }
    write_text_file(std::filesystem::path(opt.out).string() + ".provenance.json",
                    prov.to_json().dump(2) + "\n");
    std::printf("render: %s\n", opt.out.c_str());
}

}  // namespace

void setup_render(CLI::App& app) {
    auto opt = std::make_shared<RenderOpts>();
    CLI::App* cmd =
        app.add_subcommand("render", "8-bit indexed PNG views of stored maps");
    cmd->add_option("--labels", opt->labels,
                    "label or pseudo-label map (.segl); null/VOID renders black");
    cmd->add_option("--entropy", opt->entropy, "entropy map (.sege), grayscale");
    cmd->add_option("--prob", opt->prob, "probability map (.segp), argmax colors");
    cmd->add_option("--diff-a", opt->diff_a, "first pseudo-label map of a diff");
    cmd->add_option("--diff-b", opt->diff_b, "second pseudo-label map of a diff");
    cmd->add_option("--out", opt->out, "output PNG path")->required();
    cmd->callback([opt] { run_render(*opt); });
}

}  // namespace eslcli
