#include <cstdio>
#include <exception>

#include <CLI11.hpp>

#include "eslkit/map_io.hpp"
#include "eslkit/model.hpp"
#include "eslkit/parallel.hpp"

#include "commands.hpp"
#include "util.hpp"

int main(int argc, char** argv) {
    CLI::App app{"entropy- and softmax-guided pseudo-label extraction and "
                 "self-training for semantic segmentation, desk scale"};
    app.set_version_flag("--version", eslcli::kToolVersion);
    app.require_subcommand(1);

    app.add_option_function<int>(
        "--jobs", [](const int& v) { esl::set_default_jobs(v); },
        "worker bound for per-pixel stages (0 = hardware concurrency)");

    eslcli::setup_synth(app);
    eslcli::setup_train(app);
    eslcli::setup_thresholds(app);
    eslcli::setup_extract(app);
    eslcli::setup_metrics(app);
    eslcli::setup_diff(app);
    eslcli::setup_selftrain(app);
    eslcli::setup_sweep(app);
    eslcli::setup_render(app);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? eslcli::kExitOk : eslcli::kExitUsage;
    } catch (const esl::MapIoError& e) {
        std::fprintf(stderr, "eslkit: i/o error: %s\n", e.what());
        return eslcli::kExitIo;
    } catch (const eslcli::IoFailure& e) {
        std::fprintf(stderr, "eslkit: i/o error: %s\n", e.what());
        return eslcli::kExitIo;
    } catch (const esl::DivergenceError& e) {
        std::fprintf(stderr, "eslkit: training diverged: %s\n", e.what());
        return eslcli::kExitDivergence;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "eslkit: %s\n", e.what());
        return eslcli::kExitData;
    }
    return eslcli::kExitOk;
}
