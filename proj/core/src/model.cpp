#include "eslkit/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>

#include <json.hpp>

#include "eslkit/map_io.hpp"
#include "eslkit/metrics.hpp"
#include "eslkit/rng.hpp"

namespace esl {

using nlohmann::json;

namespace {

constexpr double kLogFloor = 1e-12;

double safe_log(double p) { return std::log(p < kLogFloor ? kLogFloor : p); }

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

PixelClassifier PixelClassifier::zeros(std::int32_t feature_dim,
                                       std::int32_t num_classes) {
    PixelClassifier clf;
    clf.feature_dim = feature_dim;
    clf.num_classes = num_classes;
    clf.weights.assign(static_cast<std::size_t>(feature_dim + 1) * num_classes, 0.0);
    return clf;
}

PixelClassifier PixelClassifier::random_init(std::int32_t feature_dim,
                                             std::int32_t num_classes,
                                             double stddev, std::uint64_t seed) {
    PixelClassifier clf = zeros(feature_dim, num_classes);
    for (std::size_t i = 0; i < clf.weights.size(); ++i) {
        clf.weights[i] = stddev * normal01(mix(seed, i));
    }
    return clf;
}

Discriminator Discriminator::zeros(std::int32_t num_classes) {
    Discriminator d;
    d.num_classes = num_classes;
    d.weights.assign(static_cast<std::size_t>(num_classes) + 1, 0.0);
    return d;
}

Discriminator Discriminator::random_init(std::int32_t num_classes, double stddev,
                                         std::uint64_t seed) {
    Discriminator d = zeros(num_classes);
    for (std::size_t i = 0; i < d.weights.size(); ++i) {
        d.weights[i] = stddev * normal01(mix(seed, i));
    }
    return d;
}

void TrainConfig::validate() const {
    if (!(lr_f > 0.0) || !(lr_d > 0.0)) {
        throw std::invalid_argument("TrainConfig: learning rates must be > 0");
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw std::invalid_argument("TrainConfig: momentum must be in [0, 1)");
    }
    if (weight_decay < 0.0 || lambda_adv < 0.0 || lambda_sl < 0.0) {
        throw std::invalid_argument("TrainConfig: decay and lambdas must be >= 0");
    }
    if (epochs < 1 || batch < 1) {
        throw std::invalid_argument("TrainConfig: epochs and batch must be >= 1");
    }
}

std::vector<double> forward_probs(const PixelClassifier& clf,
                                  const FeatureMap& features) {
    if (features.feature_dim != clf.feature_dim) {
        throw std::invalid_argument("forward: feature_dim mismatch");
    }
    const std::int32_t D = clf.feature_dim;
    const std::int32_t C = clf.num_classes;
    const std::int64_t npx = features.pixel_count();
    std::vector<double> probs(static_cast<std::size_t>(npx) * C);
    const double* bias = clf.weights.data() + static_cast<std::size_t>(D) * C;
    for (std::int64_t p = 0; p < npx; ++p) {
        const float* x = features.values.data() + p * D;
        double* out = probs.data() + p * C;
        for (std::int32_t c = 0; c < C; ++c) out[c] = bias[c];
        for (std::int32_t d = 0; d < D; ++d) {
            const double xd = x[d];
            const double* wrow = clf.weights.data() + static_cast<std::size_t>(d) * C;
            for (std::int32_t c = 0; c < C; ++c) out[c] += wrow[c] * xd;
        }
        double mx = out[0];
        for (std::int32_t c = 1; c < C; ++c) mx = std::max(mx, out[c]);
        double sum = 0.0;
        for (std::int32_t c = 0; c < C; ++c) {
            out[c] = std::exp(out[c] - mx);
            sum += out[c];
        }
        for (std::int32_t c = 0; c < C; ++c) out[c] /= sum;
    }
    return probs;
}

ProbMap forward(const PixelClassifier& clf, const FeatureMap& features) {
    const std::vector<double> probs = forward_probs(clf, features);
    ProbMap map;
    map.height = features.height;
    map.width = features.width;
    map.num_classes = clf.num_classes;
    map.values.resize(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        map.values[i] = static_cast<float>(probs[i]);
    }
    return map;
}

namespace {

// Cross-entropy over labeled pixels on a probability buffer of type T.
// Adds value and the score-space gradient (prob - onehot).
template <typename T>
SegLoss seg_loss_impl(const T* probs, std::int64_t npx, std::int32_t C,
                      const std::vector<std::uint8_t>& labels) {
    SegLoss out;
    out.score_grad.assign(static_cast<std::size_t>(npx) * C, 0.0);
    for (std::int64_t p = 0; p < npx; ++p) {
        const std::uint8_t y = labels[p];
        if (y == kUnlabeled) continue;
        const T* px = probs + p * C;
        out.value -= safe_log(static_cast<double>(px[y]));
        double* g = out.score_grad.data() + p * C;
        for (std::int32_t c = 0; c < C; ++c) g[c] = static_cast<double>(px[c]);
        g[y] -= 1.0;
        ++out.labeled_pixels;
    }
    return out;
}

void check_seg_dims(std::int32_t ph, std::int32_t pw, std::int32_t pc,
                    std::int32_t lh, std::int32_t lw, std::int32_t lc) {
    if (ph != lh || pw != lw || pc != lc) {
        throw std::invalid_argument("loss_seg: dimension mismatch");
    }
}

}  // namespace

SegLoss loss_seg(const ProbMap& prob, const LabelMap& labels) {
    check_seg_dims(prob.height, prob.width, prob.num_classes, labels.height,
                   labels.width, labels.num_classes);
    return seg_loss_impl(prob.values.data(), prob.pixel_count(), prob.num_classes,
                         labels.labels);
}

SegLoss loss_seg(const ProbMap& prob, const PseudoLabelMap& labels) {
    check_seg_dims(prob.height, prob.width, prob.num_classes, labels.height,
                   labels.width, labels.num_classes);
    return seg_loss_impl(prob.values.data(), prob.pixel_count(), prob.num_classes,
                         labels.labels);
}

namespace {

// Per-image discriminator cross-entropy, averaged over pixels.
// domain_label is 1 for source, 0 for target. Adds scale * loss to
// *value and scale * gradient to *disc_grad (size C+1, bias last).
template <typename T>
void adv_bce_accumulate(const Discriminator& disc, const T* probs,
                        std::int64_t npx, std::int32_t C, double domain_label,
                        double scale, double* value,
                        std::vector<double>* disc_grad) {
    const double inv = 1.0 / static_cast<double>(npx);
    double loss = 0.0;
    for (std::int64_t p = 0; p < npx; ++p) {
        const T* px = probs + p * C;
        double z = disc.weights[C];
        for (std::int32_t c = 0; c < C; ++c) {
            z += disc.weights[c] * static_cast<double>(px[c]);
        }
        const double d = sigmoid(z);
        loss -= domain_label > 0.5 ? safe_log(d) : safe_log(1.0 - d);
        if (disc_grad) {
            // dloss/dz: (d - 1) for label 1, d for label 0
            const double gz = (d - domain_label) * inv * scale;
            double* g = disc_grad->data();
            for (std::int32_t c = 0; c < C; ++c) {
                g[c] += gz * static_cast<double>(px[c]);
            }
            g[C] += gz;
        }
    }
    *value += scale * loss * inv;
}

// Adversarial term of the segmenter objective for one target image:
// L_adv(x, 1) through the fixed discriminator, gradient w.r.t. the
// classifier weights. probs must be the double softmax output for
// `features` under `clf`.
void adv_f_accumulate(const PixelClassifier& clf, const Discriminator& disc,
                      const FeatureMap& features, const std::vector<double>& probs,
                      double scale, double* adv_value,
                      std::vector<double>* clf_grad) {
    const std::int32_t C = clf.num_classes;
    const std::int32_t D = clf.feature_dim;
    const std::int64_t npx = features.pixel_count();
    const double inv = 1.0 / static_cast<double>(npx);
    double loss = 0.0;
    std::vector<double> sgrad(C);
    for (std::int64_t p = 0; p < npx; ++p) {
        const double* px = probs.data() + p * C;
        double z = disc.weights[C];
        double wbar = 0.0;
        for (std::int32_t c = 0; c < C; ++c) {
            z += disc.weights[c] * px[c];
            wbar += disc.weights[c] * px[c];
        }
        const double d = sigmoid(z);
        loss -= safe_log(d);
        if (!clf_grad) continue;
        // d z / d s_k = P_k (w_k - sum_c w_c P_c); d(-log d)/dz = d - 1
        const double gz = (d - 1.0) * inv * scale;
        for (std::int32_t c = 0; c < C; ++c) {
            sgrad[c] = gz * px[c] * (disc.weights[c] - wbar);
        }
        const float* x = features.values.data() + p * D;
        for (std::int32_t dd = 0; dd < D; ++dd) {
            const double xd = x[dd];
            double* wrow = clf_grad->data() + static_cast<std::size_t>(dd) * C;
            for (std::int32_t c = 0; c < C; ++c) wrow[c] += sgrad[c] * xd;
        }
        double* brow = clf_grad->data() + static_cast<std::size_t>(D) * C;
        for (std::int32_t c = 0; c < C; ++c) brow[c] += sgrad[c];
    }
    *adv_value += loss * inv;
}

// Chain the score-space segmentation gradient to classifier weights.
void seg_chain_accumulate(const PixelClassifier& clf, const FeatureMap& features,
                          const std::vector<double>& score_grad, double scale,
                          std::vector<double>* clf_grad) {
    const std::int32_t C = clf.num_classes;
    const std::int32_t D = clf.feature_dim;
    const std::int64_t npx = features.pixel_count();
    for (std::int64_t p = 0; p < npx; ++p) {
        const double* g = score_grad.data() + p * C;
        bool all_zero = true;
        for (std::int32_t c = 0; c < C; ++c) {
            if (g[c] != 0.0) {
                all_zero = false;
                break;
            }
        }
        if (all_zero) continue;
        const float* x = features.values.data() + p * D;
        for (std::int32_t d = 0; d < D; ++d) {
            const double xd = static_cast<double>(x[d]) * scale;
            double* wrow = clf_grad->data() + static_cast<std::size_t>(d) * C;
            for (std::int32_t c = 0; c < C; ++c) wrow[c] += g[c] * xd;
        }
        double* brow = clf_grad->data() + static_cast<std::size_t>(D) * C;
        for (std::int32_t c = 0; c < C; ++c) brow[c] += g[c] * scale;
    }
}

template <typename LabelsT>
SegLoss seg_loss_double(const std::vector<double>& probs, std::int64_t npx,
                        std::int32_t C, const LabelsT& labels) {
    return seg_loss_impl(probs.data(), npx, C, labels.labels);
}

}  // namespace

DLoss loss_D(const Discriminator& disc, const std::vector<ProbMap>& source_probs,
             const std::vector<ProbMap>& target_probs) {
    if (source_probs.empty() || target_probs.empty()) {
        throw std::invalid_argument("loss_D: empty domain set");
    }
    DLoss out;
    out.disc_grad.assign(disc.weights.size(), 0.0);
    const double ws = 1.0 / static_cast<double>(source_probs.size());
    const double wt = 1.0 / static_cast<double>(target_probs.size());
    for (const ProbMap& m : source_probs) {
        if (m.num_classes != disc.num_classes) {
            throw std::invalid_argument("loss_D: class count mismatch");
        }
        adv_bce_accumulate(disc, m.values.data(), m.pixel_count(), m.num_classes,
                           1.0, ws, &out.value, &out.disc_grad);
    }
    for (const ProbMap& m : target_probs) {
        if (m.num_classes != disc.num_classes) {
            throw std::invalid_argument("loss_D: class count mismatch");
        }
        adv_bce_accumulate(disc, m.values.data(), m.pixel_count(), m.num_classes,
                           0.0, wt, &out.value, &out.disc_grad);
    }
    return out;
}

FLoss loss_F(const PixelClassifier& clf, const Discriminator& disc,
             const std::vector<LabeledScene>& source,
             const std::vector<FeatureMap>& target, double lambda_adv) {
    if (source.empty() || target.empty()) {
        throw std::invalid_argument("loss_F: empty batch");
    }
    FLoss out;
    out.clf_grad.assign(clf.weights.size(), 0.0);
    const double ws = 1.0 / static_cast<double>(source.size());
    const double wt = 1.0 / static_cast<double>(target.size());
    for (const LabeledScene& scene : source) {
        const std::vector<double> probs = forward_probs(clf, scene.features);
        SegLoss seg = seg_loss_double(probs, scene.features.pixel_count(),
                                      clf.num_classes, scene.labels);
        out.seg_term += ws * seg.value;
        seg_chain_accumulate(clf, scene.features, seg.score_grad, ws, &out.clf_grad);
    }
    for (const FeatureMap& features : target) {
        const std::vector<double> probs = forward_probs(clf, features);
        adv_f_accumulate(clf, disc, features, probs, lambda_adv * wt,
                         &out.adv_term, &out.clf_grad);
    }
    out.value = out.seg_term + lambda_adv * out.adv_term;
    return out;
}

FStarLoss loss_F_star(const PixelClassifier& clf, const Discriminator& disc,
                      const std::vector<LabeledScene>& source,
                      const std::vector<FeatureMap>& target,
                      const std::vector<PseudoLabelMap>& pseudo,
                      double lambda_adv, double lambda_sl) {
    if (pseudo.size() != target.size()) {
        throw std::invalid_argument("loss_F_star: pseudo-label maps must align with target");
    }
    if (source.empty() || target.empty()) {
        throw std::invalid_argument("loss_F_star: empty batch");
    }
    FStarLoss out;
    out.clf_grad.assign(clf.weights.size(), 0.0);
    const double ws = 1.0 / static_cast<double>(source.size());
    const double wt = 1.0 / static_cast<double>(target.size());
    for (const LabeledScene& scene : source) {
        const std::vector<double> probs = forward_probs(clf, scene.features);
        SegLoss seg = seg_loss_double(probs, scene.features.pixel_count(),
                                      clf.num_classes, scene.labels);
        out.seg_term += ws * seg.value;
        seg_chain_accumulate(clf, scene.features, seg.score_grad, ws, &out.clf_grad);
    }
    for (std::size_t i = 0; i < target.size(); ++i) {
        const FeatureMap& features = target[i];
        const std::vector<double> probs = forward_probs(clf, features);
        adv_f_accumulate(clf, disc, features, probs, lambda_adv * wt,
                         &out.adv_term, &out.clf_grad);
        SegLoss seg = seg_loss_double(probs, features.pixel_count(),
                                      clf.num_classes, pseudo[i]);
        out.sl_term += wt * seg.value;
        seg_chain_accumulate(clf, features, seg.score_grad, lambda_sl * wt,
                             &out.clf_grad);
    }
    out.f_value = out.seg_term + lambda_adv * out.adv_term;
    out.value = out.f_value + lambda_sl * out.sl_term;
    return out;
}

void MomentumSgd::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != velocity_.size() || grad.size() != velocity_.size()) {
        throw std::invalid_argument("MomentumSgd: size mismatch");
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity_[i] = momentum_ * velocity_[i] + grad[i];
        params[i] -= lr_ * velocity_[i] + lr_ * weight_decay_ * params[i];
    }
}

void AdamOpt::step(std::vector<double>& params, const std::vector<double>& grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
        throw std::invalid_argument("AdamOpt: size mismatch");
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
    }
}

std::optional<double> evaluate_miou(const PixelClassifier& clf,
                                    const std::vector<LabeledScene>& scenes) {
    if (scenes.empty()) return std::nullopt;
    ConfusionMatrix cm = ConfusionMatrix::make(clf.num_classes);
    for (const LabeledScene& scene : scenes) {
        const ProbMap probs = forward(clf, scene.features);
        cm += confusion(argmax_map(probs), scene.labels);
    }
    return iou(cm).miou;
}

namespace {

// Cycling shuffled index stream over [0, n).
class BatchCursor {
public:
    BatchCursor(std::size_t n, std::uint64_t seed) : rng_(seed), order_(n) {
        for (std::size_t i = 0; i < n; ++i) order_[i] = i;
        rng_.shuffle(order_);
    }
    std::size_t next() {
        if (pos_ == order_.size()) {
            rng_.shuffle(order_);
            pos_ = 0;
        }
        return order_[pos_++];
    }

private:
    SplitMix rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

}  // namespace

TrainResult train_uda(const std::vector<LabeledScene>& source,
                      const std::vector<FeatureMap>& target,
                      const TrainConfig& config,
                      const std::vector<LabeledScene>* eval_scenes,
                      const std::vector<PseudoLabelMap>* pseudo) {
    config.validate();
    if (source.empty() || target.empty()) {
        throw std::invalid_argument("train_uda: empty scene set");
    }
    if (pseudo && pseudo->size() != target.size()) {
        throw std::invalid_argument("train_uda: pseudo maps must align with target");
    }
    const std::int32_t D = source.front().features.feature_dim;
    const std::int32_t C = source.front().labels.num_classes;

    TrainResult res;
    res.classifier =
        PixelClassifier::random_init(D, C, config.init_stddev, mix(config.seed, 0xF0));
    res.discriminator =
        Discriminator::random_init(C, config.init_stddev, mix(config.seed, 0xD0));

    MomentumSgd sgd(config.lr_f, config.momentum, config.weight_decay,
                    res.classifier.param_count());
    AdamOpt adam(config.lr_d, res.discriminator.param_count());

    BatchCursor source_cursor(source.size(), mix(config.seed, 0x51));
    BatchCursor target_cursor(target.size(), mix(config.seed, 0x52));

    const std::size_t batch_s =
        std::min<std::size_t>(config.batch, source.size());
    const std::size_t batch_t =
        std::min<std::size_t>(config.batch, target.size());
    const std::size_t steps_per_epoch =
        (std::max(source.size(), target.size()) + config.batch - 1) / config.batch;

    for (std::int32_t epoch = 0; epoch < config.epochs; ++epoch) {
        EpochRecord rec;
        rec.epoch = epoch;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            std::vector<LabeledScene> sbatch;
            std::vector<FeatureMap> tbatch;
            std::vector<PseudoLabelMap> pbatch;
            sbatch.reserve(batch_s);
            tbatch.reserve(batch_t);
            for (std::size_t i = 0; i < batch_s; ++i) {
                sbatch.push_back(source[source_cursor.next()]);
            }
            for (std::size_t i = 0; i < batch_t; ++i) {
                const std::size_t idx = target_cursor.next();
                tbatch.push_back(target[idx]);
                if (pseudo) pbatch.push_back((*pseudo)[idx]);
            }

            // discriminator step on the current classifier's outputs
            std::vector<ProbMap> sprobs, tprobs;
            sprobs.reserve(sbatch.size());
            tprobs.reserve(tbatch.size());
            for (const LabeledScene& s : sbatch) {
                sprobs.push_back(forward(res.classifier, s.features));
            }
            for (const FeatureMap& t : tbatch) {
                tprobs.push_back(forward(res.classifier, t));
            }
            DLoss dl = loss_D(res.discriminator, sprobs, tprobs);
            if (!std::isfinite(dl.value)) {
                throw DivergenceError("discriminator loss diverged at epoch " +
                                      std::to_string(epoch));
            }
            adam.step(res.discriminator.weights, dl.disc_grad);

            // segmenter step against the updated discriminator
            double value, seg_term, adv_term, sl_term = 0.0;
            if (pseudo) {
                FStarLoss fl = loss_F_star(res.classifier, res.discriminator, sbatch,
                                           tbatch, pbatch, config.lambda_adv,
                                           config.lambda_sl);
                value = fl.value;
                seg_term = fl.seg_term;
                adv_term = fl.adv_term;
                sl_term = fl.sl_term;
                sgd.step(res.classifier.weights, fl.clf_grad);
            } else {
                FLoss fl = loss_F(res.classifier, res.discriminator, sbatch, tbatch,
                                  config.lambda_adv);
                value = fl.value;
                seg_term = fl.seg_term;
                adv_term = fl.adv_term;
                sgd.step(res.classifier.weights, fl.clf_grad);
            }
            if (!std::isfinite(value)) {
                throw DivergenceError("segmenter loss diverged at epoch " +
                                      std::to_string(epoch));
            }
            rec.seg_loss += seg_term;
            rec.adv_loss += adv_term;
            rec.sl_loss += sl_term;
            rec.d_loss += dl.value;
        }
        const double inv = 1.0 / static_cast<double>(steps_per_epoch);
        rec.seg_loss *= inv;
        rec.adv_loss *= inv;
        rec.sl_loss *= inv;
        rec.d_loss *= inv;
        if (eval_scenes) {
            rec.eval_miou = evaluate_miou(res.classifier, *eval_scenes);
        }
        res.log.epochs.push_back(rec);
    }
    return res;
}

std::string train_log_to_json(const TrainLog& log) {
    json epochs = json::array();
    for (const EpochRecord& r : log.epochs) {
        json e;
        e["epoch"] = r.epoch;
        e["seg_loss"] = r.seg_loss;
        e["adv_loss"] = r.adv_loss;
        e["sl_loss"] = r.sl_loss;
        e["d_loss"] = r.d_loss;
        e["eval_miou"] = r.eval_miou ? json(*r.eval_miou) : json(nullptr);
        epochs.push_back(std::move(e));
    }
    json j;
    j["epochs"] = std::move(epochs);
    return j.dump(2);
}

namespace {

void put_u32_file(std::string& out, std::uint32_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>((v >> 8) & 0xff));
    out.push_back(static_cast<char>((v >> 16) & 0xff));
    out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_f64(std::string& out, double v) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
    }
}

double get_f64(const unsigned char* p) {
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) {
        bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    }
    return std::bit_cast<double>(bits);
}

}  // namespace

void save_checkpoint(const PixelClassifier& clf, const Discriminator& disc,
                     const std::string& config_hash,
                     const std::filesystem::path& path) {
    json header;
    header["feature_dim"] = clf.feature_dim;
    header["num_classes"] = clf.num_classes;
    header["classifier_weights"] = clf.weights.size();
    header["discriminator_weights"] = disc.weights.size();
    header["config_hash"] = config_hash;
    const std::string header_text = header.dump();

    std::string blob = "SEGM";
    put_u32_file(blob, static_cast<std::uint32_t>(header_text.size()));
    blob += header_text;
    for (double w : clf.weights) put_f64(blob, w);
    for (double w : disc.weights) put_f64(blob, w);

    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) {
        throw MapIoError(IoErrorKind::OpenFailed,
                         "cannot open '" + path.string() + "'");
    }
    const std::size_t written = std::fwrite(blob.data(), 1, blob.size(), f);
    std::fclose(f);
    if (written != blob.size()) {
        throw MapIoError(IoErrorKind::WriteFailed,
                         "short write to '" + path.string() + "'");
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::FILE* f = std::fopen(path.string().c_str(), "rb");
    if (!f) {
        throw MapIoError(IoErrorKind::OpenFailed,
                         "cannot open '" + path.string() + "'");
    }
    std::string blob;
    char buf[4096];
    std::size_t n;
    while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) blob.append(buf, n);
    std::fclose(f);

    if (blob.size() < 8 || blob.compare(0, 4, "SEGM") != 0) {
        throw MapIoError(IoErrorKind::BadMagic,
                         "bad magic in '" + path.string() + "'");
    }
    const auto* bytes = reinterpret_cast<const unsigned char*>(blob.data());
    const std::uint32_t hlen = static_cast<std::uint32_t>(bytes[4]) |
                               (static_cast<std::uint32_t>(bytes[5]) << 8) |
                               (static_cast<std::uint32_t>(bytes[6]) << 16) |
                               (static_cast<std::uint32_t>(bytes[7]) << 24);
    if (blob.size() < 8 + hlen) {
        throw MapIoError(IoErrorKind::Truncated,
                         "header truncated in '" + path.string() + "'");
    }
    const json header = json::parse(blob.substr(8, hlen));
    Checkpoint ck;
    ck.classifier.feature_dim = header.at("feature_dim").get<std::int32_t>();
    ck.classifier.num_classes = header.at("num_classes").get<std::int32_t>();
    ck.discriminator.num_classes = ck.classifier.num_classes;
    ck.config_hash = header.at("config_hash").get<std::string>();
    const std::size_t nclf = header.at("classifier_weights").get<std::size_t>();
    const std::size_t ndisc = header.at("discriminator_weights").get<std::size_t>();
    const std::size_t need = 8 + hlen + 8 * (nclf + ndisc);
    if (blob.size() < need) {
        throw MapIoError(IoErrorKind::Truncated,
                         "payload truncated in '" + path.string() + "'");
    }
    const unsigned char* payload = bytes + 8 + hlen;
    ck.classifier.weights.resize(nclf);
    for (std::size_t i = 0; i < nclf; ++i) {
        ck.classifier.weights[i] = get_f64(payload + 8 * i);
    }
    ck.discriminator.weights.resize(ndisc);
    for (std::size_t i = 0; i < ndisc; ++i) {
        ck.discriminator.weights[i] = get_f64(payload + 8 * (nclf + i));
    }
    return ck;
}

}  // namespace esl
