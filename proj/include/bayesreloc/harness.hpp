#pragma once

// Evaluation protocol: per-query localization with errors, uncertainty and
// calibrated scores; sample-count sweeps; cumulative error histograms; timing.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bayesreloc/calibration.hpp"
#include "bayesreloc/detector.hpp"
#include "bayesreloc/regressor.hpp"
#include "bayesreloc/scenes.hpp"

namespace bayesreloc {

// Defaults used by the CLI and the experiment suites.
struct ExperimentConfig {
    SceneSpec scene;
    std::size_t n_train = 2000;
    std::size_t n_calib = 200;
    std::size_t n_test = 400;
    std::vector<std::size_t> hidden_widths{384, 1024};
    double dropout_p = 0.5;
    TrainConfig train;
    std::size_t num_samples = 40;
    // Fit calibration on the test split instead of the held-out calib split.
    bool calibrate_on_test = false;

    ExperimentConfig();
};

NetworkParams build_default_network(const ExperimentConfig& config, std::size_t input_width,
                                    std::uint64_t seed);

// Localizes every example and fits the scene's Gamma models to the traces.
CalibrationModel calibrate_network(const NetworkParams& net, std::span<const Example> examples,
                                   const std::string& scene_id, std::size_t num_samples, std::uint64_t seed,
                                   std::size_t threads = 0);

// Trains on dataset.train and calibrates on the calib (or test) split.
SceneModel train_scene_model(const SceneDataset& dataset, const ExperimentConfig& config,
                             std::vector<double>* epoch_losses = nullptr);

struct QueryRecord {
    std::string query_id;
    Pose truth;
    Pose estimate;
    double trans_error = 0.0;  // m
    double rot_error = 0.0;    // deg
    double trans_trace = 0.0;
    double rot_trace = 0.0;
    ZScore z;
    double nn_feature_distance = 0.0;
    double nn_trans_error = 0.0;   // nearest-neighbour baseline
    double nn_rot_error = 0.0;
    double det_trans_error = 0.0;  // deterministic (maskless) pass
    double det_rot_error = 0.0;
};

struct Correlation {
    std::string name;
    std::optional<double> spearman;
    std::optional<double> pearson;
};

struct EvalSummary {
    std::size_t queries = 0;
    std::size_t num_samples = 0;
    std::uint64_t seed = 0;
    double median_trans_error = 0.0;
    double median_rot_error = 0.0;
    double median_det_trans_error = 0.0;
    double median_det_rot_error = 0.0;
    double median_nn_trans_error = 0.0;
    double median_nn_rot_error = 0.0;
    std::vector<Correlation> correlations;
    double wall_time_per_query_ms = 0.0;
};

struct EvalReport {
    std::vector<QueryRecord> records;
    EvalSummary summary;

    const Correlation& correlation(const std::string& name) const;
};

// Query i is sampled with master seed (seed, i).
EvalReport run_eval(const SceneModel& model, const SceneDataset& dataset, std::size_t num_samples,
                    std::uint64_t seed, std::size_t threads = 0);

// Recomputes summary medians and correlations from the records.
EvalSummary summarize(std::span<const QueryRecord> records);

struct SweepRow {
    std::size_t num_samples = 0;  // 0 = deterministic maskless pass
    double median_trans_error = 0.0;  // mean over repetitions
    double median_rot_error = 0.0;
    double trans_std = 0.0;
    double rot_std = 0.0;
    std::size_t repetitions = 0;
};

struct SweepReport {
    std::vector<SweepRow> rows;  // sorted by num_samples, count 0 first

    const SweepRow& row(std::size_t num_samples) const;
};

// Repetition r uses seed (seed, r); only Monte Carlo seeds are re-randomized.
SweepReport run_sweep(const NetworkParams& net, std::span<const Example> test, std::vector<std::size_t> sample_counts,
                      std::size_t repetitions, std::uint64_t seed, std::size_t threads = 0);

struct HistogramRow {
    double threshold = 0.0;
    double trans_fraction = 0.0;  // fraction with trans_error <= threshold (m)
    double rot_fraction = 0.0;    // fraction with rot_error <= threshold (deg)
};

// Thresholds must be sorted ascending.
std::vector<HistogramRow> run_histogram(const EvalReport& report, std::span<const double> thresholds);

struct TimingReport {
    std::size_t num_samples = 0;
    std::size_t queries = 0;
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p99_ms = 0.0;
};

// Single-threaded wall-clock per localize() call over at least 100 queries
// (the test split is cycled if smaller).
TimingReport run_timing(const NetworkParams& net, std::span<const Example> test, std::size_t num_samples,
                        std::uint64_t seed, std::size_t min_queries = 100);

std::string format_query_table(const EvalReport& report);
std::string format_eval_summary(const EvalReport& report);
// Reads a table written by format_query_table; the summary is recomputed.
EvalReport parse_query_table(const std::string& text);
std::string format_sweep(const SweepReport& report);
std::string format_histogram(std::span<const HistogramRow> rows);
std::string format_timing(std::span<const TimingReport> rows);

}  // namespace bayesreloc
