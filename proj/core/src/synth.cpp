#include "eslkit/synth.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "eslkit/rng.hpp"

namespace esl {

using nlohmann::json;

namespace {

// Stream tags inside a scene key.
constexpr std::uint64_t kSiteX = 101;
constexpr std::uint64_t kSiteY = 102;
constexpr std::uint64_t kSiteClass = 103;
constexpr std::uint64_t kNoise = 104;

void check_spec(const SceneSpec& spec) {
    if (spec.height < 1 || spec.width < 1) {
        throw std::invalid_argument("SceneSpec: zero-area scene");
    }
    if (spec.num_classes < 2 || spec.num_classes > kMaxClasses) {
        throw std::invalid_argument("SceneSpec: num_classes out of range");
    }
    if (spec.num_regions < 1) {
        throw std::invalid_argument("SceneSpec: need at least one region");
    }
    if (spec.feature_dim < 1) {
        throw std::invalid_argument("SceneSpec: feature_dim must be >= 1");
    }
    if (static_cast<std::int32_t>(spec.class_palette.size()) != spec.num_classes) {
        throw std::invalid_argument("SceneSpec: palette size != num_classes");
    }
    for (const auto& mean : spec.class_palette) {
        if (static_cast<std::int32_t>(mean.size()) != spec.feature_dim) {
            throw std::invalid_argument("SceneSpec: palette vector size != feature_dim");
        }
        for (float v : mean) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("SceneSpec: non-finite palette entry");
            }
        }
    }
    if (!(spec.noise_sigma >= 0.0f)) {
        throw std::invalid_argument("SceneSpec: noise_sigma must be >= 0");
    }
    if (!(spec.boundary_blur >= 0.0f)) {
        throw std::invalid_argument("SceneSpec: boundary_blur must be >= 0");
    }
}

void check_shift(const SceneSpec& spec, const DomainShiftSpec& shift) {
    if (static_cast<std::int32_t>(shift.mean_shift.size()) != spec.num_classes) {
        throw std::invalid_argument("DomainShiftSpec: mean_shift size != num_classes");
    }
    for (const auto& off : shift.mean_shift) {
        if (static_cast<std::int32_t>(off.size()) != spec.feature_dim) {
            throw std::invalid_argument("DomainShiftSpec: offset size != feature_dim");
        }
    }
    if (!(shift.sigma_scale > 0.0f)) {
        throw std::invalid_argument("DomainShiftSpec: sigma_scale must be > 0");
    }
    if (static_cast<std::int32_t>(shift.class_prior_skew.size()) != spec.num_classes) {
        throw std::invalid_argument("DomainShiftSpec: skew size != num_classes");
    }
    for (float s : shift.class_prior_skew) {
        if (!(s > 0.0f)) {
            throw std::invalid_argument("DomainShiftSpec: skew entries must be > 0");
        }
    }
}

struct Site {
    double x, y;
    int cls;
};

// One generator for both domains: `prior` is the normalized class prior
// for region classes, `palette`/`sigma` the (possibly shifted) law.
GeneratedScene generate(const SceneSpec& spec,
                        const std::vector<std::vector<float>>& palette,
                        double sigma, const std::vector<double>& prior,
                        std::uint32_t stream, std::int64_t scene_index) {
    const std::uint64_t key = scene_seed(spec, stream, scene_index);
    const std::int32_t C = spec.num_classes;
    const std::int32_t D = spec.feature_dim;

    std::vector<Site> sites(spec.num_regions);
    for (std::int32_t i = 0; i < spec.num_regions; ++i) {
        sites[i].x = uniform01(mix(mix(key, kSiteX), i)) * spec.width;
        sites[i].y = uniform01(mix(mix(key, kSiteY), i)) * spec.height;
        const double u = uniform01(mix(mix(key, kSiteClass), i));
        double acc = 0.0;
        int cls = C - 1;
        for (std::int32_t c = 0; c < C; ++c) {
            acc += prior[c];
            if (u < acc) {
                cls = c;
                break;
            }
        }
        sites[i].cls = cls;
    }

    GeneratedScene out;
    out.features.height = spec.height;
    out.features.width = spec.width;
    out.features.feature_dim = D;
    out.features.values.resize(static_cast<std::size_t>(spec.height) * spec.width * D);
    out.labels.height = spec.height;
    out.labels.width = spec.width;
    out.labels.num_classes = C;
    out.labels.labels.resize(static_cast<std::size_t>(spec.height) * spec.width);
    out.boundary_band.assign(static_cast<std::size_t>(spec.height) * spec.width, 0);

    const std::uint64_t noise_key = mix(key, kNoise);
    std::vector<double> mean(D);
    for (std::int32_t h = 0; h < spec.height; ++h) {
        for (std::int32_t w = 0; w < spec.width; ++w) {
            const std::int64_t p = static_cast<std::int64_t>(h) * spec.width + w;
            const double px = w + 0.5;
            const double py = h + 0.5;

            // nearest and second-nearest site; ties go to the lower index
            int i1 = -1, i2 = -1;
            double d1 = std::numeric_limits<double>::infinity();
            double d2 = d1;
            for (std::size_t i = 0; i < sites.size(); ++i) {
                const double dx = px - sites[i].x;
                const double dy = py - sites[i].y;
                const double d = dx * dx + dy * dy;
                if (d < d1) {
                    d2 = d1;
                    i2 = i1;
                    d1 = d;
                    i1 = static_cast<int>(i);
                } else if (d < d2) {
                    d2 = d;
                    i2 = static_cast<int>(i);
                }
            }
            const int c1 = sites[i1].cls;
            out.labels.labels[p] = static_cast<std::uint8_t>(c1);

            for (std::int32_t d = 0; d < D; ++d) mean[d] = palette[c1][d];
            if (i2 >= 0 && spec.boundary_blur > 0.0f) {
                // distance to the Voronoi edge between the two nearest sites
                const double border_dist =
                    (std::sqrt(d2) - std::sqrt(d1)) * 0.5;
                if (border_dist < spec.boundary_blur) {
                    const int c2 = sites[i2].cls;
                    if (c2 != c1) {
                        // 0.5 at the edge, fading to 0 at the band limit
                        const double t =
                            0.5 * (1.0 - border_dist / spec.boundary_blur);
                        for (std::int32_t d = 0; d < D; ++d) {
                            mean[d] = (1.0 - t) * palette[c1][d] +
                                      t * palette[c2][d];
                        }
                        out.boundary_band[p] = 1;
                    }
                }
            }

            float* dst = out.features.values.data() + p * D;
            for (std::int32_t d = 0; d < D; ++d) {
                const double n =
                    sigma > 0.0 ? sigma * normal01(mix(noise_key, p * D + d)) : 0.0;
                dst[d] = static_cast<float>(mean[d] + n);
            }
        }
    }
    return out;
}

std::vector<double> uniform_prior(std::int32_t num_classes) {
    return std::vector<double>(num_classes, 1.0 / num_classes);
}

std::vector<double> skewed_prior(const std::vector<float>& skew) {
    std::vector<double> prior(skew.begin(), skew.end());
    double sum = 0.0;
    for (double v : prior) sum += v;
    for (double& v : prior) v /= sum;
    return prior;
}

std::vector<std::vector<float>> shifted_palette(
    const SceneSpec& spec, const DomainShiftSpec& shift) {
    auto palette = spec.class_palette;
    for (std::int32_t c = 0; c < spec.num_classes; ++c) {
        for (std::int32_t d = 0; d < spec.feature_dim; ++d) {
            palette[c][d] += shift.mean_shift[c][d];
        }
    }
    return palette;
}

}  // namespace

DomainShiftSpec DomainShiftSpec::none(std::int32_t num_classes,
                                      std::int32_t feature_dim) {
    DomainShiftSpec s;
    s.mean_shift.assign(num_classes, std::vector<float>(feature_dim, 0.0f));
    s.sigma_scale = 1.0f;
    s.class_prior_skew.assign(num_classes, 1.0f);
    return s;
}

std::uint64_t scene_seed(const SceneSpec& spec, std::uint32_t stream,
                         std::int64_t scene_index) {
    return mix(mix(spec.seed, stream), static_cast<std::uint64_t>(scene_index));
}

GeneratedScene gen_scene_full(const SceneSpec& spec, std::int64_t scene_index) {
    check_spec(spec);
    return generate(spec, spec.class_palette, spec.noise_sigma,
                    uniform_prior(spec.num_classes), 0, scene_index);
}

LabeledScene gen_scene(const SceneSpec& spec, std::int64_t scene_index) {
    GeneratedScene g = gen_scene_full(spec, scene_index);
    return {std::move(g.features), std::move(g.labels)};
}

GeneratedScene gen_target_scene_full(const SceneSpec& spec,
                                     const DomainShiftSpec& shift,
                                     std::int64_t scene_index) {
    check_spec(spec);
    check_shift(spec, shift);
    return generate(spec, shifted_palette(spec, shift),
                    static_cast<double>(spec.noise_sigma) * shift.sigma_scale,
                    skewed_prior(shift.class_prior_skew), 1, scene_index);
}

LabeledScene gen_target_scene(const SceneSpec& spec, const DomainShiftSpec& shift,
                              std::int64_t scene_index) {
    GeneratedScene g = gen_target_scene_full(spec, shift, scene_index);
    return {std::move(g.features), std::move(g.labels)};
}

DomainPair gen_domain_pair(const SceneSpec& spec, const DomainShiftSpec& shift,
                           std::int32_t n_source, std::int32_t n_target) {
    if (n_source < 1 || n_target < 1) {
        throw std::invalid_argument("gen_domain_pair: scene counts must be >= 1");
    }
    DomainPair pair;
    pair.source.reserve(n_source);
    pair.target.reserve(n_target);
    for (std::int32_t i = 0; i < n_source; ++i) {
        pair.source.push_back(gen_scene(spec, i));
    }
    for (std::int32_t i = 0; i < n_target; ++i) {
        pair.target.push_back(gen_target_scene(spec, shift, i));
    }
    return pair;
}

std::vector<std::vector<float>> random_palette(std::int32_t num_classes,
                                               std::int32_t feature_dim,
                                               float scale, std::uint64_t seed) {
    std::vector<std::vector<float>> palette(num_classes,
                                            std::vector<float>(feature_dim));
    for (std::int32_t c = 0; c < num_classes; ++c) {
        double norm2 = 0.0;
        std::vector<double> raw(feature_dim);
        for (std::int32_t d = 0; d < feature_dim; ++d) {
            raw[d] = normal01(mix(mix(seed, c), d));
            norm2 += raw[d] * raw[d];
        }
        const double norm = std::sqrt(norm2);
        for (std::int32_t d = 0; d < feature_dim; ++d) {
            palette[c][d] = static_cast<float>(scale * raw[d] / (norm > 0 ? norm : 1));
        }
    }
    return palette;
}

std::string manifest_to_json(const DatasetManifest& m) {
    json j;
    j["height"] = m.height;
    j["width"] = m.width;
    j["num_classes"] = m.num_classes;
    j["feature_dim"] = m.feature_dim;
    json scenes = json::array();
    for (const SceneEntry& s : m.scenes) {
        json e;
        e["split"] = s.split;
        e["index"] = s.index;
        e["seed"] = s.seed;
        e["features"] = s.features_path;
        e["labels"] = s.labels_path;
        scenes.push_back(std::move(e));
    }
    j["scenes"] = std::move(scenes);
    return j.dump(2);
}

DatasetManifest manifest_from_json(const std::string& json_text) {
    const json j = json::parse(json_text);
    DatasetManifest m;
    m.height = j.at("height").get<std::int32_t>();
    m.width = j.at("width").get<std::int32_t>();
    m.num_classes = j.at("num_classes").get<std::int32_t>();
    m.feature_dim = j.at("feature_dim").get<std::int32_t>();
    for (const json& e : j.at("scenes")) {
        SceneEntry s;
        s.split = e.at("split").get<std::string>();
        if (s.split != "source" && s.split != "target" && s.split != "target-eval") {
            throw std::runtime_error("manifest: unknown split '" + s.split + "'");
        }
        s.index = e.at("index").get<std::int64_t>();
        s.seed = e.at("seed").get<std::uint64_t>();
        s.features_path = e.at("features").get<std::string>();
        s.labels_path = e.at("labels").get<std::string>();
        m.scenes.push_back(std::move(s));
    }
    return m;
}

void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    }
    out << manifest_to_json(m) << '\n';
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open '" + path.string() + "'");
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return manifest_from_json(ss.str());
}

}  // namespace esl
