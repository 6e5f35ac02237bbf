#pragma once

// Synthetic pose-labelled scenes and the on-disk dataset format.
//
// A scene's "appearance" is a fixed random two-layer tanh map from the pose
// encoding (extent-normalized position, quaternion) plus nuisance variables
// (lighting, weather, ...) to a feature vector, with additive Gaussian noise.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bayesreloc/example.hpp"
#include "bayesreloc/geometry.hpp"

namespace bayesreloc {

struct Range {
    double lo = 0.0;
    double hi = 1.0;

    double width() const noexcept { return hi - lo; }
    bool operator==(const Range&) const noexcept = default;
};

struct SceneSpec {
    std::string scene_id = "scene";
    Range x{-50.0, 50.0};
    Range y{-25.0, 25.0};
    Range z{0.0, 2.0};
    std::size_t feature_dim = 32;
    std::size_t nuisance_dim = 4;
    double nuisance_scale = 0.3;  // weight of the nuisance draws in the encoding
    // Degrees of freedom of the multivariate Student-t nuisance draw; 0 means
    // standard normal.
    std::size_t nuisance_dof = 0;
    double noise_sigma = 0.05;
    std::optional<double> aliasing_period;
    std::uint64_t generator_seed = 1;
    double yaw_half_range_deg = 90.0;
    double tilt_half_range_deg = 5.0;  // pitch and roll
    std::size_t hidden_width = 64;     // generator hidden layer

    // Throws InvalidSpec.
    void validate() const;
    bool operator==(const SceneSpec&) const = default;
};

// Noise-free appearance model of one scene.
class FeatureMap {
public:
    explicit FeatureMap(const SceneSpec& spec);

    std::vector<double> features(const Pose& pose, std::span<const double> nuisance) const;
    std::size_t feature_dim() const noexcept { return spec_.feature_dim; }

private:
    std::vector<double> encode(const Pose& pose, std::span<const double> nuisance) const;

    SceneSpec spec_;
    std::vector<double> w1_, b1_, w2_, b2_;
};

struct SceneDataset {
    SceneSpec spec;
    std::vector<Example> train;
    std::vector<Example> calib;
    std::vector<Example> test;
};

// Deterministic draw number `draw_index` of the scene: pose, nuisance and
// noise all come from streams of (generator_seed, draw_index).
Example draw_example(const SceneSpec& spec, const FeatureMap& map, std::uint64_t draw_index,
                     std::string query_id);
std::vector<double> draw_nuisance(const SceneSpec& spec, std::uint64_t draw_index);

// Draws are numbered train, then calib, then test. Throws InvalidSpec.
SceneDataset generate_scene(const SceneSpec& spec, std::size_t n_train, std::size_t n_calib,
                            std::size_t n_test);

// Minimum pairwise feature distance of the noise-free map over `count` draws.
double min_feature_separation(const SceneSpec& spec, std::size_t count);

// Text format: "bayesreloc-data-v1 feature_dim=<D>" then rows of
// "query_id tx ty tz qw qx qy qz f1 .. fD"; '#' starts a comment.
std::string format_examples(std::span<const Example> examples, std::size_t feature_dim);
std::vector<Example> parse_examples(const std::string& text, std::size_t* feature_dim = nullptr);

std::string format_scene_spec(const SceneSpec& spec);
SceneSpec parse_scene_spec(const std::string& text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

std::vector<Example> load_examples(const std::filesystem::path& path);

// A dataset directory holds scene.json, train.txt, calib.txt and test.txt.
void save_dataset(const std::filesystem::path& dir, const SceneDataset& dataset);
SceneDataset load_dataset(const std::filesystem::path& dir);

struct NeighbourMatch {
    Pose pose;
    double distance = 0.0;
    std::size_t index = 0;
};

// Training example whose embedding is closest (Euclidean) to the query; the
// lowest index wins ties.
NeighbourMatch nearest_neighbour_pose(std::span<const Example> train,
                                      std::span<const double> query_embedding,
                                      std::span<const std::vector<double>> train_embeddings);

}  // namespace bayesreloc
