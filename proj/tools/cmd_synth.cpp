#include <cstdio>
#include <memory>

#include "eslkit/map_io.hpp"
#include "eslkit/rng.hpp"
#include "eslkit/selftrain.hpp"
#include "eslkit/synth.hpp"

#include "commands.hpp"
#include "util.hpp"

namespace eslcli {

namespace {

struct SynthOpts {
    std::string out;
    std::uint64_t seed = 1;
    std::int32_t height = 0, width = 0, classes = 0, regions = 0, feature_dim = 0;
    double noise_sigma = -1.0, boundary_blur = -1.0, palette_scale = 5.0;
    double shift_next = 0.282, shift_second = 0.188, shift_noise = 0.1;
    double sigma_scale = 1.15, skew_min = 0.7, skew_max = 1.4;
    std::int32_t n_source = -1, n_target = -1, n_eval = -1;
    bool force = false;
};

void run_synth(const SynthOpts& opt) {
    using namespace esl;

    // benchmark defaults, overridden field by field
    BenchmarkSpec bench = default_benchmark(opt.seed);
    SceneSpec& scene = bench.scene;
    if (opt.height > 0) scene.height = opt.height;
    if (opt.width > 0) scene.width = opt.width;
    if (opt.classes > 0) scene.num_classes = opt.classes;
    if (opt.regions > 0) scene.num_regions = opt.regions;
    if (opt.feature_dim > 0) scene.feature_dim = opt.feature_dim;
    if (opt.noise_sigma >= 0.0) scene.noise_sigma = static_cast<float>(opt.noise_sigma);
    if (opt.boundary_blur >= 0.0) {
        scene.boundary_blur = static_cast<float>(opt.boundary_blur);
    }
    scene.class_palette =
        random_palette(scene.num_classes, scene.feature_dim,
                       static_cast<float>(opt.palette_scale), mix(opt.seed, 11));

    DomainShiftSpec& shift = bench.shift;
    const std::int32_t C = scene.num_classes;
    const std::int32_t D = scene.feature_dim;
    shift.mean_shift.assign(C, std::vector<float>(D));
    for (std::int32_t c = 0; c < C; ++c) {
        for (std::int32_t d = 0; d < D; ++d) {
            const auto& palette = scene.class_palette;
            shift.mean_shift[c][d] = static_cast<float>(
                opt.shift_next * (palette[(c + 1) % C][d] - palette[c][d]) +
                opt.shift_second * (palette[(c + 2) % C][d] - palette[c][d]) +
                opt.shift_noise * normal01(mix(mix(opt.seed, 12), c * 64 + d)));
        }
    }
    shift.sigma_scale = static_cast<float>(opt.sigma_scale);
    shift.class_prior_skew.resize(C);
    for (std::int32_t c = 0; c < C; ++c) {
        shift.class_prior_skew[c] = static_cast<float>(
            opt.skew_min +
            (opt.skew_max - opt.skew_min) * uniform01(mix(mix(opt.seed, 13), c)));
    }
    if (opt.n_source >= 0) bench.n_source = opt.n_source;
    if (opt.n_target >= 0) bench.n_target = opt.n_target;
    if (opt.n_eval >= 0) bench.n_eval = opt.n_eval;

    Provenance prov;
    prov.command = "synth";
    prov.config = {
        {"seed", opt.seed},
        {"height", scene.height},
        {"width", scene.width},
        {"classes", scene.num_classes},
        {"regions", scene.num_regions},
        {"feature_dim", scene.feature_dim},
        {"noise_sigma", scene.noise_sigma},
        {"boundary_blur", scene.boundary_blur},
        {"palette_scale", opt.palette_scale},
        {"shift_next", opt.shift_next},
        {"shift_second", opt.shift_second},
        {"shift_noise", opt.shift_noise},
        {"sigma_scale", opt.sigma_scale},
        {"skew_min", opt.skew_min},
        {"skew_max", opt.skew_max},
        {"source", bench.n_source},
        {"target", bench.n_target},
        {"eval", bench.n_eval},
    };
    const std::filesystem::path out_dir(opt.out);
    if (!begin_run(prov, out_dir, opt.force)) return;

    DatasetManifest manifest;
    manifest.height = scene.height;
    manifest.width = scene.width;
    manifest.num_classes = scene.num_classes;
    manifest.feature_dim = scene.feature_dim;

    auto emit = [&](const std::string& split, std::uint32_t stream,
                    std::int64_t index, const LabeledScene& s) {
        char fbuf[64], lbuf[64];
        std::snprintf(fbuf, sizeof(fbuf), "%s_%03lld.segf", split.c_str(),
                      static_cast<long long>(index));
        std::snprintf(lbuf, sizeof(lbuf), "%s_%03lld.segl", split.c_str(),
                      static_cast<long long>(index));
        write_featuremap(s.features, out_dir / fbuf);
        write_labelmap(s.labels, out_dir / lbuf);
        manifest.scenes.push_back(
            {split, index, scene_seed(scene, stream, index), fbuf, lbuf});
    };

    for (std::int32_t i = 0; i < bench.n_source; ++i) {
        emit("source", 0, i, gen_scene(scene, i));
    }
    for (std::int32_t i = 0; i < bench.n_target; ++i) {
        emit("target", 1, i, gen_target_scene(scene, shift, i));
    }
    for (std::int32_t i = 0; i < bench.n_eval; ++i) {
        emit("target-eval", 1, bench.n_target + i,
             gen_target_scene(scene, shift, bench.n_target + i));
    }
    save_manifest(manifest, out_dir / "manifest.json");
    finish_run(prov, out_dir);
    std::printf("synth: %d source, %d target, %d eval scenes (%dx%d, C=%d, D=%d) -> %s\n",
                bench.n_source, bench.n_target, bench.n_eval, scene.height,
                scene.width, scene.num_classes, scene.feature_dim,
                opt.out.c_str());
}

}  // namespace

void setup_synth(CLI::App& app) {
    auto opt = std::make_shared<SynthOpts>();
    CLI::App* cmd = app.add_subcommand(
        "synth", "generate a paired source/target synthetic dataset");
    cmd->add_option("--out", opt->out, "output directory")->required();
    cmd->add_option("--seed", opt->seed, "dataset seed");
    cmd->add_option("--height", opt->height, "scene height (default 40)");
    cmd->add_option("--width", opt->width, "scene width (default 40)");
    cmd->add_option("--classes", opt->classes, "class count (default 8)");
    cmd->add_option("--regions", opt->regions, "Voronoi sites per scene (default 14)");
    cmd->add_option("--feature-dim", opt->feature_dim, "feature dimension (default 6)");
    cmd->add_option("--noise-sigma", opt->noise_sigma, "feature noise (default 0.32)");
    cmd->add_option("--boundary-blur", opt->boundary_blur,
                    "border blend half-width in pixels (default 1.5)");
    cmd->add_option("--palette-scale", opt->palette_scale,
                    "class mean magnitude (default 5.0)");
    cmd->add_option("--shift-next", opt->shift_next,
                    "target drift toward the next class");
    cmd->add_option("--shift-second", opt->shift_second,
                    "target drift toward the second-next class");
    cmd->add_option("--shift-noise", opt->shift_noise, "random drift component");
    cmd->add_option("--sigma-scale", opt->sigma_scale, "target noise multiplier");
    cmd->add_option("--skew-min", opt->skew_min, "class prior skew lower bound");
    cmd->add_option("--skew-max", opt->skew_max, "class prior skew upper bound");
    cmd->add_option("--source", opt->n_source, "source scene count (default 3)");
    cmd->add_option("--target", opt->n_target, "target scene count (default 6)");
    cmd->add_option("--eval", opt->n_eval, "held-out eval scene count (default 3)");
    cmd->add_flag("--force", opt->force, "rerun even if output is up to date");
    cmd->callback([opt] { run_synth(*opt); });
}

}  // namespace eslcli
