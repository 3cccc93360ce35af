#include <cstdio>
#include <memory>

#include <json.hpp>

#include "eslkit/extraction.hpp"
#include "eslkit/map_io.hpp"

#include "commands.hpp"
#include "png_writer.hpp"
#include "util.hpp"

namespace eslcli {

namespace {

struct DiffOpts {
    std::string ssl;
    std::string esl;
    std::string out;
    bool force = false;
};

void run_diff(const DiffOpts& opt) {
    using namespace esl;
    const auto ssl_files = list_maps(opt.ssl, ".segl");
    const auto esl_files = list_maps(opt.esl, ".segl");
    if (ssl_files.size() != esl_files.size()) {
        throw std::invalid_argument("map counts differ (" +
                                    std::to_string(ssl_files.size()) + " vs " +
                                    std::to_string(esl_files.size()) + ")");
    }

    Provenance prov;
    prov.command = "diff";
    prov.config = {{"ssl", opt.ssl}, {"esl", opt.esl}};
    prov.add_inputs(ssl_files);
    prov.add_inputs(esl_files);
    const std::filesystem::path out_dir(opt.out);
    if (!begin_run(prov, out_dir, opt.force)) return;

    nlohmann::json per_pair = nlohmann::json::array();
    std::array<std::uint64_t, kDiffCategoryCount> totals{};
    for (std::size_t i = 0; i < ssl_files.size(); ++i) {
        const PseudoLabelMap a = read_pseudolabels(ssl_files[i]);
        const PseudoLabelMap b = read_pseudolabels(esl_files[i]);
        const PseudoLabelDiff diff = pseudo_label_diff(a, b);
        char name[64];
        std::snprintf(name, sizeof(name), "diff_%04zu.png", i);
        render_diff(diff, out_dir / name);
        for (int k = 0; k < kDiffCategoryCount; ++k) totals[k] += diff.counts[k];
        per_pair.push_back({{"ssl", ssl_files[i].string()},
                            {"esl", esl_files[i].string()},
                            {"png", name},
                            {"counts", nlohmann::json::parse(diff_counts_to_json(diff))}});
    }
    nlohmann::json summary;
    summary["pairs"] = ssl_files.size();
    summary["total"] = {{"both_null", totals[0]},
                        {"agree", totals[1]},
                        {"ssl_only", totals[2]},
                        {"esl_only", totals[3]},
                        {"conflict", totals[4]}};
    summary["files"] = std::move(per_pair);
    write_text_file(out_dir / "summary.json", summary.dump(2) + "\n");
    finish_run(prov, out_dir);
    std::printf(
        "diff: %zu pairs; agree %llu, ssl-only %llu, esl-only %llu, conflict %llu\n",
        ssl_files.size(), static_cast<unsigned long long>(totals[1]),
        static_cast<unsigned long long>(totals[2]),
        static_cast<unsigned long long>(totals[3]),
        static_cast<unsigned long long>(totals[4]));
}

}  // namespace

void setup_diff(CLI::App& app) {
    auto opt = std::make_shared<DiffOpts>();
    CLI::App* cmd = app.add_subcommand(
        "diff", "pixel-level comparison of two pseudo-label sets");
    cmd->add_option("--ssl", opt->ssl, "first pseudo-label set (.segl file or dir)")
        ->required();
    cmd->add_option("--esl", opt->esl, "second pseudo-label set (.segl file or dir)")
        ->required();
    cmd->add_option("--out", opt->out, "output directory")->required();
    cmd->add_flag("--force", opt->force, "rerun even if output is up to date");
    cmd->callback([opt] { run_diff(*opt); });
}

}  // namespace eslcli
