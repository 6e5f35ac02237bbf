#pragma once

// Quickly trained scene models shared by the detector and harness tests.

#include <string>
#include <vector>

#include "bayesreloc/detector.hpp"
#include "bayesreloc/harness.hpp"

namespace fixture {

inline bayesreloc::ExperimentConfig small_config(const std::string& id, std::uint64_t generator_seed) {
    bayesreloc::ExperimentConfig cfg;
    cfg.scene.scene_id = id;
    cfg.scene.generator_seed = generator_seed;
    cfg.scene.feature_dim = 16;
    cfg.n_train = 400;
    cfg.n_calib = 40;
    cfg.n_test = 40;
    cfg.hidden_widths = {32, 64};
    cfg.train.epochs = 30;
    cfg.train.learning_rate = 1e-3;
    cfg.num_samples = 20;
    return cfg;
}

struct TrainedScene {
    bayesreloc::SceneDataset dataset;
    bayesreloc::SceneModel model;
};

inline TrainedScene trained_scene(const bayesreloc::ExperimentConfig& cfg) {
    auto ds = bayesreloc::generate_scene(cfg.scene, cfg.n_train, cfg.n_calib, cfg.n_test);
    auto model = bayesreloc::train_scene_model(ds, cfg);
    return {std::move(ds), std::move(model)};
}

}  // namespace fixture
