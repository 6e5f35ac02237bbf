#pragma once

// Scene recognition: evaluate a query under every scene's model and pick the
// scene whose calibrated uncertainty is lowest.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bayesreloc/calibration.hpp"
#include "bayesreloc/example.hpp"
#include "bayesreloc/regressor.hpp"

namespace bayesreloc {

struct SceneModel {
    std::string scene_id;
    NetworkParams network;
    CalibrationModel calibration;

    // Throws InvalidArgument if the calibration belongs to another scene.
    void validate() const;
};

enum class ScoreChannel { Combined, Translation, Rotation };

double channel_score(const ZScore& z, ScoreChannel channel) noexcept;

struct Detection {
    std::size_t scene_index = 0;
    std::string scene_id;
    std::vector<ZScore> scores;  // one per model, in model order
    bool tie = false;            // another model shares the minimum; lowest index won
};

// Argmin over per-model scores.
Detection classify(std::span<const SceneModel> models, std::vector<ZScore> scores,
                   ScoreChannel channel = ScoreChannel::Combined);

// Every model is sampled with the same master seed, so identical models score
// identically and permuting the models permutes the scores.
Detection detect(std::span<const SceneModel> models, std::span<const double> input, std::size_t num_samples,
                 std::uint64_t master_seed, ScoreChannel channel = ScoreChannel::Combined);

struct ConfusionMatrix {
    std::vector<std::string> scene_ids;
    std::vector<std::vector<std::size_t>> counts;  // row = true scene, column = predicted

    std::size_t total() const noexcept;
    std::size_t correct() const noexcept;
    double accuracy() const noexcept;
};

struct SceneQueries {
    std::string scene_id;
    std::vector<Example> queries;
};

struct ConfusionReport {
    ConfusionMatrix combined;
    ConfusionMatrix translation;
    ConfusionMatrix rotation;
};

// Query q (numbered across all included test sets in order) uses master seed
// (seed, q). Scenes listed in `excluded` are dropped from models and queries.
ConfusionReport confusion(std::span<const SceneModel> models, std::span<const SceneQueries> test_sets,
                          std::size_t num_samples, std::uint64_t seed,
                          std::span<const std::string> excluded = {}, std::size_t threads = 0);

// Delimited text: header row of predicted scene ids, one row per true scene,
// then "# accuracy <value>".
std::string format_confusion(const ConfusionMatrix& matrix);

}  // namespace bayesreloc
