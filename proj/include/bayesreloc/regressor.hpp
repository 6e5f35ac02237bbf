#pragma once

// Feed-forward pose regressor with Bernoulli dropout on selected layer inputs.
//
// A dropout-enabled layer multiplies its input activations elementwise by a
// binary mask b (b_j = 0 with probability p, the drop probability) and by
// 1/(1-p), i.e. the effective weights are M diag(b) / (1-p). Passing no mask
// evaluates the deterministic network.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "bayesreloc/example.hpp"
#include "bayesreloc/geometry.hpp"

namespace bayesreloc {

inline constexpr std::size_t kPoseOutputWidth = 7;

enum class Activation { Rectifier, Identity };

struct LayerSpec {
    std::size_t input_width = 0;
    std::size_t output_width = 0;
    bool has_dropout = false;
    Activation activation = Activation::Rectifier;

    bool operator==(const LayerSpec&) const noexcept = default;
};

struct Layer {
    LayerSpec spec;
    std::vector<double> weights;  // output_width x input_width, row-major
    std::vector<double> bias;     // output_width

    double weight(std::size_t row, std::size_t col) const noexcept {
        return weights[row * spec.input_width + col];
    }
    double& weight(std::size_t row, std::size_t col) noexcept {
        return weights[row * spec.input_width + col];
    }
};

// Secondary pose output attached to the activations of a hidden layer. Its
// input always carries dropout.
struct AuxHeadSpec {
    std::size_t tap_layer = 0;  // index of the hidden layer whose output feeds the head
    double loss_weight = 0.3;
};

struct AuxHead {
    AuxHeadSpec spec;
    Layer layer;
};

// Fixed affine map applied to every raw 7-vector output: out = scale * z + offset.
// Not trained; it puts position targets given in meters on a unit scale.
struct OutputScaling {
    std::array<double, kPoseOutputWidth> scale{1, 1, 1, 1, 1, 1, 1};
    std::array<double, kPoseOutputWidth> offset{};

    bool operator==(const OutputScaling&) const noexcept = default;
};

// Position offset = mean and scale = population standard deviation of the training
// positions per axis; the quaternion part stays identity.
OutputScaling fit_output_scaling(std::span<const Example> examples);

struct NetworkParams {
    std::vector<Layer> layers;
    std::optional<AuxHead> aux;
    OutputScaling output;
    double dropout_p = 0.5;
    std::uint64_t seed = 0;

    std::size_t input_width() const noexcept { return layers.front().spec.input_width; }
    std::size_t embedding_width() const noexcept { return layers.back().spec.input_width; }
    std::size_t parameter_count() const noexcept;
    bool has_dropout() const noexcept;

    // Throws InvalidArchitecture on any broken invariant.
    void validate() const;
};

// One entry per layer (empty for layers without dropout), plus the aux head mask.
struct DropoutMask {
    std::vector<std::vector<std::uint8_t>> layers;
    std::vector<std::uint8_t> aux;
};

// Mask drawn from stream (seed, index).
DropoutMask sample_mask(const NetworkParams& net, std::uint64_t seed, std::uint64_t index);
DropoutMask all_ones_mask(const NetworkParams& net);

// Rectifier hidden layers; dropout on the inputs of the final two weight layers.
std::vector<LayerSpec> default_architecture(std::size_t input_width,
                                            std::span<const std::size_t> hidden_widths);

NetworkParams build_network(std::span<const LayerSpec> specs, double dropout_p, std::uint64_t seed,
                            std::optional<AuxHeadSpec> aux = std::nullopt);

RawPose forward(const NetworkParams& net, std::span<const double> input,
                const DropoutMask* mask = nullptr);
RawPose forward_aux(const NetworkParams& net, std::span<const double> input,
                    const DropoutMask* mask = nullptr);

// Index of the first layer whose input carries dropout (layers.size() if none).
std::size_t first_dropout_layer(const NetworkParams& net) noexcept;
// Maskless activations entering layer `stop`.
std::vector<double> forward_prefix(const NetworkParams& net, std::span<const double> input, std::size_t stop);
// Main-head output continuing from the activations entering layer `start`.
// Bit-identical to forward() when `activations` came from forward_prefix and
// no layer before `start` carries dropout.
RawPose forward_suffix(const NetworkParams& net, std::size_t start, std::span<const double> activations,
                       const DropoutMask* mask = nullptr);

// Activations entering the final layer, without dropout.
std::vector<double> feature_embedding(const NetworkParams& net, std::span<const double> input);

struct LayerGradient {
    std::vector<double> weights;
    std::vector<double> bias;
};

struct Gradient {
    std::vector<LayerGradient> layers;
    std::optional<LayerGradient> aux;
    double loss = 0.0;  // mean loss over the batch, aux term included
};

enum class LossTerms { Both, PositionOnly, OrientationOnly };

// Exact gradient of the batch-mean loss, masks held constant. At zero error the
// zero subgradient is used.
Gradient loss_gradient(const NetworkParams& net, std::span<const Example> batch,
                       std::span<const DropoutMask> masks, const LossConfig& config,
                       LossTerms terms = LossTerms::Both);

// Parameters (and gradients) in a fixed flat order: for each layer weights then
// bias, then the aux head.
std::vector<double> flatten(const NetworkParams& net);
void unflatten(NetworkParams& net, std::span<const double> values);
std::vector<double> flatten(const Gradient& grad);

struct TrainConfig {
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    std::size_t epochs = 100;
    LossConfig loss;
    std::uint64_t seed = 0;
    double momentum = 0.9;

    void validate() const;
};

struct TrainResult {
    NetworkParams net;
    std::vector<double> epoch_losses;
};

// Minibatch SGD with momentum. A fresh mask is drawn for every example at every
// step from stream (config.seed, running example counter). Throws NonFiniteLoss.
TrainResult train(NetworkParams net, std::span<const Example> dataset, const TrainConfig& config);

}  // namespace bayesreloc
