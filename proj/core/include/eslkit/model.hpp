#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eslkit/map_types.hpp"
#include "eslkit/synth.hpp"

namespace esl {

// Toy-scale learners with fully analytic gradients. The segmenter is a
// per-pixel linear softmax classifier; the domain discriminator is a
// per-pixel logistic regression over the segmenter's softmax vector,
// with its cross-entropy averaged over the pixels of each image. All
// training math runs in double; ProbMap (float) is only produced at the
// boundary for extraction, metrics and I/O.

/// Linear softmax segmenter. Weights are (D+1) x C row-major with the
/// bias in the last row: score(x)_c = sum_d w[d*C+c]*x_d + w[D*C+c].
struct PixelClassifier {
    std::int32_t feature_dim = 0;
    std::int32_t num_classes = 0;
    std::vector<double> weights;

    static PixelClassifier zeros(std::int32_t feature_dim, std::int32_t num_classes);
    static PixelClassifier random_init(std::int32_t feature_dim,
                                       std::int32_t num_classes, double stddev,
                                       std::uint64_t seed);
    std::size_t param_count() const { return weights.size(); }
};

/// Logistic domain discriminator on a per-pixel class distribution:
/// d = sigmoid(sum_c w_c * p_c + w_C). Output 1 means source.
struct Discriminator {
    std::int32_t num_classes = 0;
    std::vector<double> weights;  // C + 1, bias last

    static Discriminator zeros(std::int32_t num_classes);
    static Discriminator random_init(std::int32_t num_classes, double stddev,
                                     std::uint64_t seed);
    std::size_t param_count() const { return weights.size(); }
};

struct TrainConfig {
    double lr_f = 2.5e-4;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double lr_d = 1e-4;
    double lambda_adv = 1e-3;
    double lambda_sl = 1.0;
    std::int32_t epochs = 200;
    std::int32_t batch = 2;  // whole scenes per step
    std::uint64_t seed = 1;
    double init_stddev = 0.01;

    void validate() const;
};

/// Per-pixel softmax over linear scores; the float ProbMap view of the
/// double-precision forward pass.
ProbMap forward(const PixelClassifier& clf, const FeatureMap& features);

/// Double-precision probabilities, H*W*C row-major. Used by the training
/// path and the gradient checks.
std::vector<double> forward_probs(const PixelClassifier& clf,
                                  const FeatureMap& features);

/// Cross-entropy segmentation loss summed over labeled pixels, with the
/// gradient w.r.t. the pre-softmax scores (prob - onehot). VOID / null
/// pixels contribute exactly zero loss and zero gradient. Probabilities
/// are floored at 1e-12 inside the log only.
struct SegLoss {
    double value = 0.0;
    std::vector<double> score_grad;  // H*W*C
    std::int64_t labeled_pixels = 0;
};

SegLoss loss_seg(const ProbMap& prob, const LabelMap& labels);
SegLoss loss_seg(const ProbMap& prob, const PseudoLabelMap& labels);

/// Discriminator objective: mean-per-domain binary cross-entropy with
/// source maps labeled 1 and target maps labeled 0. Each map's
/// cross-entropy is averaged over its pixels. Returns the gradient
/// w.r.t. the discriminator weights. Throws when either set is empty.
struct DLoss {
    double value = 0.0;
    std::vector<double> disc_grad;  // C + 1
};

DLoss loss_D(const Discriminator& disc, const std::vector<ProbMap>& source_probs,
             const std::vector<ProbMap>& target_probs);

/// Segmenter objective: mean source segmentation loss plus
/// lambda_adv * mean adversarial loss on target maps labeled as source.
/// The gradient flows through the (fixed) discriminator into the
/// classifier weights.
struct FLoss {
    double value = 0.0;
    double seg_term = 0.0;  // (1/|Xs|) sum L_seg
    double adv_term = 0.0;  // (1/|Xt|) sum L_adv(x_t, 1), pre-lambda
    std::vector<double> clf_grad;  // (D+1) x C
};

FLoss loss_F(const PixelClassifier& clf, const Discriminator& disc,
             const std::vector<LabeledScene>& source,
             const std::vector<FeatureMap>& target, double lambda_adv);

/// Self-supervised segmenter objective: loss_F plus
/// (lambda_sl/|Xt|) * sum L_seg(x_t, pseudo_t). Null pseudo-labels
/// contribute nothing, so an all-null map reduces this to loss_F.
struct FStarLoss {
    double value = 0.0;
    double f_value = 0.0;
    double seg_term = 0.0;
    double adv_term = 0.0;
    double sl_term = 0.0;  // (1/|Xt|) sum L_seg(x_t, pseudo), pre-lambda
    std::vector<double> clf_grad;
};

FStarLoss loss_F_star(const PixelClassifier& clf, const Discriminator& disc,
                      const std::vector<LabeledScene>& source,
                      const std::vector<FeatureMap>& target,
                      const std::vector<PseudoLabelMap>& pseudo,
                      double lambda_adv, double lambda_sl);

/// Momentum SGD with decoupled weight decay:
///   v <- momentum * v + g
///   p <- p - lr * v - lr * wd * p
class MomentumSgd {
public:
    MomentumSgd(double lr, double momentum, double weight_decay, std::size_t n)
        : lr_(lr), momentum_(momentum), weight_decay_(weight_decay),
          velocity_(n, 0.0) {}
    void step(std::vector<double>& params, const std::vector<double>& grad);
    const std::vector<double>& velocity() const { return velocity_; }

private:
    double lr_, momentum_, weight_decay_;
    std::vector<double> velocity_;
};

/// Adam with bias correction, beta1 = 0.9, beta2 = 0.999, eps = 1e-8.
class AdamOpt {
public:
    AdamOpt(double lr, std::size_t n)
        : lr_(lr), m_(n, 0.0), v_(n, 0.0) {}
    void step(std::vector<double>& params, const std::vector<double>& grad);

private:
    double lr_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::int64_t t_ = 0;
    std::vector<double> m_, v_;
};

class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct EpochRecord {
    std::int32_t epoch = 0;
    double seg_loss = 0.0;   // mean source L_seg per scene
    double adv_loss = 0.0;   // mean target L_adv(x_t, 1) per scene
    double sl_loss = 0.0;    // mean pseudo-label L_seg per scene (0 without)
    double d_loss = 0.0;     // mean discriminator objective
    std::optional<double> eval_miou;
};

struct TrainLog {
    std::vector<EpochRecord> epochs;
};

struct TrainResult {
    PixelClassifier classifier;
    Discriminator discriminator;
    TrainLog log;
};

/// Alternating adversarial training: per batch one discriminator step
/// (Adam) then one segmenter step (momentum SGD). When `pseudo` is
/// non-null it must align 1:1 with `target` and the segmenter objective
/// gains the self-supervised term. Deterministic given config.seed.
/// Throws DivergenceError when any loss becomes non-finite.
TrainResult train_uda(const std::vector<LabeledScene>& source,
                      const std::vector<FeatureMap>& target,
                      const TrainConfig& config,
                      const std::vector<LabeledScene>* eval_scenes = nullptr,
                      const std::vector<PseudoLabelMap>* pseudo = nullptr);

/// mIoU of `clf` over labeled scenes (confusions summed across scenes).
std::optional<double> evaluate_miou(const PixelClassifier& clf,
                                    const std::vector<LabeledScene>& scenes);

std::string train_log_to_json(const TrainLog& log);

// Checkpoint: 4-byte magic "SEGM", uint32 little-endian JSON header
// length, JSON header (dims and config hash), then classifier followed
// by discriminator weights as little-endian float64.
void save_checkpoint(const PixelClassifier& clf, const Discriminator& disc,
                     const std::string& config_hash,
                     const std::filesystem::path& path);

struct Checkpoint {
    PixelClassifier classifier;
    Discriminator discriminator;
    std::string config_hash;
};

Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace esl
