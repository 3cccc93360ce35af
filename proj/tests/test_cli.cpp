#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "eslkit/map_io.hpp"
#include "eslkit/thresholds.hpp"

// Drives the installed-style binary end to end. The path to the built
// tool arrives via the ESLKIT_BIN environment variable.

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string binary() {
    const char* bin = std::getenv("ESLKIT_BIN");
    REQUIRE(bin != nullptr);
    return bin;
}

int run(const std::string& args) {
    const std::string cmd = binary() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WEXITSTATUS(status);
}

std::string run_capture(const std::string& args, const fs::path& tmp) {
    const fs::path log = tmp / "stdout.txt";
    const std::string cmd =
        binary() + " " + args + " >" + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    REQUIRE(WEXITSTATUS(status) == 0);
    std::ifstream in(log);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load_json(const fs::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return json::parse(in);
}

struct Workspace {
    fs::path root;
    Workspace() {
        root = fs::temp_directory_path() / "eslkit_cli_test";
        fs::remove_all(root);
        fs::create_directories(root);
    }
    std::string p(const std::string& rel) const { return (root / rel).string(); }
};

// tiny but non-trivial dataset all cases share
const std::string kSynthFlags =
    "--seed 5 --height 18 --width 18 --classes 4 --regions 6 --feature-dim 3 "
    "--source 2 --target 3 --eval 1";

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("full pipeline: synth, train, thresholds, extract, metrics, diff, render") {
    Workspace ws;

    // synth
    CHECK(run("synth --out " + ws.p("data") + " " + kSynthFlags) == 0);
    CHECK(fs::exists(ws.p("data/manifest.json")));
    CHECK(fs::exists(ws.p("data/source_000.segf")));
    CHECK(fs::exists(ws.p("data/target_002.segl")));
    CHECK(fs::exists(ws.p("data/target-eval_003.segf")));
    CHECK(fs::exists(ws.p("data/provenance.json")));

    // rerun detection: same config skips, exit 0
    CHECK(run("synth --out " + ws.p("data") + " " + kSynthFlags) == 0);

    // train with prediction dump
    CHECK(run("train --manifest " + ws.p("data/manifest.json") + " --out " +
              ws.p("run") + " --epochs 6 --batch 1 --seed 9 --emit-preds") == 0);
    CHECK(fs::exists(ws.p("run/checkpoint.segm")));
    CHECK(fs::exists(ws.p("run/trainlog.json")));
    CHECK(fs::exists(ws.p("run/preds/target_000.segp")));
    CHECK(fs::exists(ws.p("run/preds/target_002.segp")));

    // thresholds over the prediction set
    CHECK(run("thresholds --preds " + ws.p("run/preds") +
              " --kind entropy --nu-star 0.1 --out " + ws.p("nu.json")) == 0);
    const esl::ClassThresholds nu = esl::load_thresholds(ws.p("nu.json"));
    CHECK(nu.kind == esl::ConfidenceKind::Entropy);
    CHECK(nu.hyper == 0.1);
    for (std::int32_t c = 0; c < nu.num_classes; ++c) {
        CHECK(nu.values[c] >= 0.1);
    }

    // extract with the stored thresholds
    CHECK(run("extract --mode esl --nu-star 0.1 --thresholds " + ws.p("nu.json") +
              " --in " + ws.p("run/preds") + " --out " + ws.p("pseudo") +
              " --emit-entropy") == 0);
    CHECK(fs::exists(ws.p("pseudo/target_000.segl")));
    CHECK(fs::exists(ws.p("pseudo/target_001.segl")));
    CHECK(fs::exists(ws.p("pseudo/target_002.segl")));
    CHECK(fs::exists(ws.p("pseudo/target_000.sege")));
    const json summary = load_json(ws.p("pseudo/summary.json"));
    CHECK(summary.at("maps") == 3);
    CHECK(summary.at("coverage").get<double>() > 0.0);

    // a mismatched hyperparameter is a data error
    CHECK(run("extract --mode esl --nu-star 0.2 --thresholds " + ws.p("nu.json") +
              " --in " + ws.p("run/preds") + " --out " + ws.p("pseudo2")) == 65);

    // ssl extraction without a thresholds file computes its own
    CHECK(run("extract --mode ssl --mu-star 0.9 --in " + ws.p("run/preds") +
              " --out " + ws.p("pseudo_ssl")) == 0);
    CHECK(fs::exists(ws.p("pseudo_ssl/thresholds.json")));

    // metrics of the ground truth against itself: mIoU 1.0
    const std::string metrics_out = run_capture(
        "metrics --pred " + ws.p("data/target_000.segl") + " --gt " +
            ws.p("data/target_000.segl") + " --classes 4 --out " + ws.p("m"),
        ws.root);
    CHECK(metrics_out.find("mIoU 100.0") != std::string::npos);
    const json report = load_json(ws.p("m/report.json"));
    CHECK(report.at("iou").at("miou").get<double>() == 1.0);
    CHECK(fs::exists(ws.p("m/report.csv")));

    // pseudo-label quality against the withheld target labels
    CHECK(run("metrics --pred " + ws.p("pseudo/target_000.segl") + " --gt " +
              ws.p("data/target_000.segl") + " --out " + ws.p("mq")) == 0);
    const json quality = load_json(ws.p("mq/report.json"));
    CHECK(quality.at("coverage").get<double>() > 0.0);
    CHECK(!quality.at("incorrect_ratio").is_null());

    // relative change against a stored baseline report
    CHECK(run("metrics --pred " + ws.p("pseudo_ssl/target_000.segl") + " --gt " +
              ws.p("data/target_000.segl") + " --baseline " +
              ws.p("mq/report.json") + " --out " + ws.p("mrel")) == 0);
    const json rel = load_json(ws.p("mrel/report.json"));
    CHECK(!rel.at("relative_change").is_null());

    // median-mode thresholds carry no clamp
    CHECK(run("thresholds --preds " + ws.p("run/preds") +
              " --kind entropy --median-mode --out " + ws.p("nu_median.json")) == 0);
    const esl::ClassThresholds med = esl::load_thresholds(ws.p("nu_median.json"));
    CHECK(med.hyper == 0.0);
    // a subset mean over the first two classes prints an extra line
    const std::string subset_out = run_capture(
        "metrics --pred " + ws.p("data/target_001.segl") + " --gt " +
            ws.p("data/target_001.segl") + " --class-subset 0,1",
        ws.root);
    CHECK(subset_out.find("classes {0,1}") != std::string::npos);

    // diff of the two extraction rules
    CHECK(run("diff --ssl " + ws.p("pseudo_ssl") + " --esl " + ws.p("pseudo") +
              " --out " + ws.p("d")) == 0);
    CHECK(fs::exists(ws.p("d/diff_0000.png")));
    const json dsum = load_json(ws.p("d/summary.json"));
    CHECK(dsum.at("pairs") == 3);
    CHECK(dsum.at("total").at("conflict").get<std::uint64_t>() == 0);

    // render views; PNG magic; re-render is bit-identical
    CHECK(run("render --labels " + ws.p("pseudo/target_000.segl") + " --out " +
              ws.p("a.png")) == 0);
    {
        std::ifstream png(ws.p("a.png"), std::ios::binary);
        unsigned char magic[8] = {};
        png.read(reinterpret_cast<char*>(magic), 8);
        CHECK(magic[0] == 0x89);
        CHECK(magic[1] == 'P');
        CHECK(magic[2] == 'N');
        CHECK(magic[3] == 'G');
    }
    CHECK(run("render --entropy " + ws.p("pseudo/target_000.sege") + " --out " +
              ws.p("e.png")) == 0);
    CHECK(run("render --prob " + ws.p("run/preds/target_000.segp") + " --out " +
              ws.p("p.png")) == 0);
    CHECK(run("render --diff-a " + ws.p("pseudo_ssl/target_000.segl") +
              " --diff-b " + ws.p("pseudo/target_000.segl") + " --out " +
              ws.p("dd.png")) == 0);
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const std::string first_bytes = slurp(ws.p("a.png"));
    fs::remove(ws.p("a.png"));
    CHECK(run("render --labels " + ws.p("pseudo/target_000.segl") + " --out " +
              ws.p("a.png")) == 0);
    CHECK(slurp(ws.p("a.png")) == first_bytes);
}

TEST_CASE("error paths map to distinct exit codes") {
    Workspace ws;
    CHECK(run("--no-such-flag") == 64);
    CHECK(run("extract --mode nonsense --in x --out y") == 64);
    CHECK(run("train --manifest " + ws.p("missing.json") + " --out " +
              ws.p("out")) == 74);
    CHECK(run("render --labels " + ws.p("missing.segl") + " --out " +
              ws.p("x.png")) == 74);
    // validation failure: metrics over mismatched class counts
    CHECK(run("synth --out " + ws.p("data") + " " + kSynthFlags) == 0);
    CHECK(run("metrics --pred " + ws.p("data/target_000.segl") + " --gt " +
              ws.p("data/target_000.segl") + " --classes 7") == 65);
    // runaway training reports divergence
    CHECK(run("train --manifest " + ws.p("data/manifest.json") + " --out " +
              ws.p("boom") + " --epochs 60 --batch 1 --lr-f 1e30 "
              "--weight-decay 1.0") == 70);
}

TEST_CASE("selftrain and sweep write reports and reproduce themselves") {
    Workspace ws;
    CHECK(run("synth --out " + ws.p("data") + " " + kSynthFlags) == 0);
    const std::string common =
        " --manifest " + ws.p("data/manifest.json") +
        " --epochs 5 --batch 1 --seed 3";

    CHECK(run("selftrain --mode esl --nu-star 0.1 --iterations 1 --out " +
              ws.p("st") + common) == 0);
    CHECK(fs::exists(ws.p("st/report.json")));
    CHECK(fs::exists(ws.p("st/baseline.segm")));
    CHECK(fs::exists(ws.p("st/iter_001/thresholds.json")));
    CHECK(fs::exists(ws.p("st/iter_001/pseudo_0000.segl")));
    CHECK(fs::exists(ws.p("st/plan_effective.json")));
    const json report = load_json(ws.p("st/report.json"));
    CHECK(report.at("mode") == "esl");
    CHECK(report.at("iterations").size() == 1);

    // identical rerun is detected and skipped
    CHECK(run("selftrain --mode esl --nu-star 0.1 --iterations 1 --out " +
              ws.p("st") + common) == 0);

    // a forced rerun reproduces the identical report
    const std::string before = load_json(ws.p("st/report.json")).dump();
    CHECK(run("selftrain --mode esl --nu-star 0.1 --iterations 1 --force --out " +
              ws.p("st") + common) == 0);
    CHECK(load_json(ws.p("st/report.json")).dump() == before);

    CHECK(run("sweep --nu-stars 0.1,0.3 --median-mode --out " + ws.p("sw") +
              common) == 0);
    const json sweep = load_json(ws.p("sw/sweep.json"));
    CHECK(sweep.at("entries").size() == 3);
    CHECK(fs::exists(ws.p("sw/nu_0.1/report.json")));
    CHECK(fs::exists(ws.p("sw/nu_0.3/report.json")));
    CHECK(fs::exists(ws.p("sw/nu_median/report.json")));
}

TEST_CASE("plan files feed selftrain with flag overrides") {
    Workspace ws;
    CHECK(run("synth --out " + ws.p("data") + " " + kSynthFlags) == 0);
    json plan;
    plan["mode"] = "ssl";
    plan["mu_star"] = 0.9;
    plan["iterations"] = 1;
    plan["train"] = {{"epochs", 4}, {"batch", 1}, {"seed", 11}};
    plan["manifest"] = ws.p("data/manifest.json");
    std::ofstream(ws.p("plan.json")) << plan.dump(2);

    CHECK(run("selftrain --plan " + ws.p("plan.json") + " --out " + ws.p("st")) == 0);
    const json effective = load_json(ws.p("st/plan_effective.json"));
    CHECK(effective.at("mode") == "ssl");
    CHECK(effective.at("train").at("epochs") == 4);

    // flags beat the plan file
    CHECK(run("selftrain --plan " + ws.p("plan.json") + " --mode esl --epochs 3 "
              "--force --out " + ws.p("st2")) == 0);
    const json overridden = load_json(ws.p("st2/plan_effective.json"));
    CHECK(overridden.at("mode") == "esl");
    CHECK(overridden.at("train").at("epochs") == 3);
}

}  // TEST_SUITE
