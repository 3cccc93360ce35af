#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "eslkit/extraction.hpp"
#include "eslkit/metrics.hpp"
#include "eslkit/model.hpp"
#include "eslkit/synth.hpp"
#include "eslkit/thresholds.hpp"

namespace esl {

// Orchestration of the three-step self-training loop:
//   1. train a segmenter with adversarial alignment, no self-supervision;
//   2. extract pseudo-labels on the target training set from its
//      predictions (thresholds recomputed from the full target set);
//   3. retrain from scratch with the self-supervised objective.
// Iterating repeats steps 2-3 against the latest model, recomputing
// thresholds each time. Target ground truth only ever feeds metrics.

enum class ExtractionMode { Ssl, Esl };

std::string to_string(ExtractionMode mode);
ExtractionMode extraction_mode_from_string(const std::string& s);

struct SelfTrainPlan {
    ExtractionMode mode = ExtractionMode::Esl;
    double mu_star = 0.9;
    double nu_star = 0.1;
    std::int32_t iterations = 1;
    TrainConfig train;
    std::string manifest_path;  // dataset manifest (CLI runs)
    std::string out_dir;        // empty = keep everything in memory

    void validate() const;
};

std::string plan_to_json(const SelfTrainPlan& plan);
SelfTrainPlan plan_from_json(const std::string& json_text);

/// In-memory dataset split. `target_features` is the training view of
/// the target domain; `target_labels` are the withheld ground-truth maps
/// used only to score pseudo-label quality, and `eval` is the held-out
/// labeled split used to measure target mIoU.
struct Dataset {
    std::vector<LabeledScene> source;
    std::vector<FeatureMap> target_features;
    std::vector<LabelMap> target_labels;
    std::vector<LabeledScene> eval;
};

Dataset load_dataset(const DatasetManifest& manifest,
                     const std::filesystem::path& base_dir);

struct IterationReport {
    ClassThresholds thresholds;
    MetricsReport pseudo_quality;  // coverage + incorrect ratios vs withheld labels
    MetricsReport eval;            // retrained model on the eval split
};

struct ExperimentReport {
    std::string mode;
    SelfTrainPlan plan;  // full config provenance, seeds included
    std::int32_t num_classes = 0;
    MetricsReport baseline_eval;
    std::vector<IterationReport> iterations;
};

std::string experiment_to_json(const ExperimentReport& report);

/// Report plus the trained models, so callers can reuse the baseline
/// across runs (paired comparisons, sweeps) or extract again.
struct SelfTrainResult {
    ExperimentReport report;
    TrainResult baseline;
    std::vector<TrainResult> retrained;  // one per iteration
    std::vector<std::vector<PseudoLabelMap>> pseudo_labels;  // per iteration
};

/// Runs the full loop. When `baseline` is non-null, step 1 is skipped
/// and the given model is used (it must match the plan's training seed
/// for reports to be comparable). When plan.out_dir is non-empty the
/// run also writes checkpoints, thresholds JSON, pseudo-label maps, the
/// train logs and report.json under it.
SelfTrainResult run_selftrain(const SelfTrainPlan& plan, const Dataset& data,
                              const TrainResult* baseline = nullptr);

struct SweepEntry {
    std::optional<double> nu_star;  // nullopt = median-only mode
    ExperimentReport report;
};

struct SweepResult {
    std::vector<SweepEntry> entries;
    MetricsReport baseline_eval;
};

/// One full ESL self-training run per nu* value, plus the limit case
/// where every class threshold is its raw median. The step-1 baseline is
/// trained once and shared across all entries.
SweepResult sweep_nu(const SelfTrainPlan& plan, const Dataset& data,
                     const std::vector<double>& nu_values,
                     bool include_median_mode);

std::string sweep_to_json(const SweepResult& sweep);

struct ReportComparison {
    std::string json_text;
    std::string csv_text;
};

/// Side-by-side per-class IoU and incorrect ratios of two runs' final
/// iterations, with relative changes of b against a.
ReportComparison compare_reports(const ExperimentReport& a,
                                 const ExperimentReport& b);

/// The pinned desk-scale domain-shift benchmark: scene law, shift,
/// split sizes and training config, all derived from `seed`.
struct BenchmarkSpec {
    SceneSpec scene;
    DomainShiftSpec shift;
    std::int32_t n_source = 0;
    std::int32_t n_target = 0;
    std::int32_t n_eval = 0;
    TrainConfig train;
};

BenchmarkSpec default_benchmark(std::uint64_t seed);
Dataset make_dataset(const BenchmarkSpec& bench);

}  // namespace esl
