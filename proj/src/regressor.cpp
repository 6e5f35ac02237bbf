#include "bayesreloc/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bayesreloc/error.hpp"
#include "bayesreloc/rng.hpp"

namespace bayesreloc {
namespace {

constexpr std::uint64_t kShuffleStream = 0x53485546464C45ULL;
constexpr std::uint64_t kAuxInitStream = 0x415558ULL;

double dropout_scale(double p) noexcept { return p > 0.0 ? 1.0 / (1.0 - p) : 1.0; }

void init_layer(Layer& layer, std::uint64_t seed, std::uint64_t stream) {
    const auto& s = layer.spec;
    layer.weights.resize(s.output_width * s.input_width);
    layer.bias.assign(s.output_width, 0.0);
    const double limit = std::sqrt(6.0 / static_cast<double>(s.input_width + s.output_width));
    Rng rng(seed, stream);
    for (double& w : layer.weights) w = rng.uniform(-limit, limit);
}

void check_mask_entry(const std::vector<std::uint8_t>& entry, bool enabled, std::size_t width) {
    const std::size_t expected = enabled ? width : 0;
    if (entry.size() != expected) {
        throw Error(ErrorKind::ShapeMismatch, "dropout mask entry has width " +
                                                  std::to_string(entry.size()) + ", expected " +
                                                  std::to_string(expected));
    }
}

void check_mask(const NetworkParams& net, const DropoutMask& mask) {
    if (mask.layers.size() != net.layers.size()) {
        throw Error(ErrorKind::ShapeMismatch, "dropout mask layer count does not match network");
    }
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& spec = net.layers[i].spec;
        check_mask_entry(mask.layers[i], spec.has_dropout, spec.input_width);
    }
    if (net.aux) {
        check_mask_entry(mask.aux, true, net.aux->layer.spec.input_width);
    } else if (!mask.aux.empty()) {
        throw Error(ErrorKind::ShapeMismatch, "aux mask given for a network without aux head");
    }
}

void check_input(const NetworkParams& net, std::span<const double> input) {
    if (input.size() != net.input_width()) {
        throw Error(ErrorKind::ShapeMismatch, "input width " + std::to_string(input.size()) +
                                                  " does not match network input width " +
                                                  std::to_string(net.input_width()));
    }
}

std::vector<double> apply_mask(std::span<const double> in, const std::vector<std::uint8_t>* mask,
                               double scale) {
    std::vector<double> out(in.begin(), in.end());
    if (mask != nullptr && !mask->empty()) {
        for (std::size_t j = 0; j < out.size(); ++j) out[j] = (*mask)[j] ? out[j] * scale : 0.0;
    }
    return out;
}

std::vector<std::uint32_t> nonzero_indices(std::span<const double> v) {
    std::vector<std::uint32_t> idx;
    idx.reserve(v.size());
    for (std::size_t c = 0; c < v.size(); ++c) {
        if (v[c] != 0.0) idx.push_back(static_cast<std::uint32_t>(c));
    }
    return idx;
}

// Dropped and rectified inputs are exact zeros, so only the nonzero ones are
// visited; the summation order over the rest is unchanged.
std::vector<double> affine(const Layer& layer, std::span<const double> in) {
    const auto& s = layer.spec;
    const std::vector<std::uint32_t> nz = nonzero_indices(in);
    std::vector<double> z(layer.bias);
    for (std::size_t r = 0; r < s.output_width; ++r) {
        const double* row = layer.weights.data() + r * s.input_width;
        double acc = 0.0;
        for (const std::uint32_t c : nz) acc += row[c] * in[c];
        z[r] += acc;
    }
    return z;
}

std::vector<double> activate(Activation act, std::vector<double> z) {
    if (act == Activation::Rectifier) {
        for (double& v : z) v = v > 0.0 ? v : 0.0;
    }
    return z;
}

// Cached intermediate values of one forward pass.
struct Trace {
    std::vector<std::vector<double>> inputs;  // masked input of each layer
    std::vector<std::vector<double>> pre;     // pre-activation of each layer
    std::vector<std::vector<double>> post;    // activation of each layer
    std::vector<double> aux_input;
    std::vector<double> aux_output;
};

Trace run(const NetworkParams& net, std::span<const double> input, const DropoutMask* mask) {
    check_input(net, input);
    if (mask != nullptr) check_mask(net, *mask);
    const double scale = dropout_scale(net.dropout_p);
    Trace t;
    t.inputs.reserve(net.layers.size());
    std::vector<double> current(input.begin(), input.end());
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& layer = net.layers[i];
        const std::vector<std::uint8_t>* m = mask != nullptr ? &mask->layers[i] : nullptr;
        t.inputs.push_back(apply_mask(current, m, scale));
        t.pre.push_back(affine(layer, t.inputs.back()));
        t.post.push_back(activate(layer.spec.activation, t.pre.back()));
        current = t.post.back();
        if (net.aux && net.aux->spec.tap_layer == i) {
            t.aux_input = apply_mask(current, mask != nullptr ? &mask->aux : nullptr, scale);
            t.aux_output = affine(net.aux->layer, t.aux_input);
        }
    }
    return t;
}

RawPose to_raw(const NetworkParams& net, const std::vector<double>& z) {
    RawPose out;
    for (std::size_t i = 0; i < kPoseOutputWidth; ++i) {
        out.values[i] = net.output.scale[i] * z[i] + net.output.offset[i];
    }
    return out;
}

std::vector<double> to_pre_scaling(const NetworkParams& net, const std::array<double, 7>& g) {
    std::vector<double> d(kPoseOutputWidth);
    for (std::size_t i = 0; i < kPoseOutputWidth; ++i) d[i] = net.output.scale[i] * g[i];
    return d;
}

// Gradient of the loss with respect to the raw 7-vector output.
std::array<double, 7> output_gradient(const RawPose& pred, const Pose& target, const LossConfig& cfg,
                                      LossTerms terms, double weight) {
    std::array<double, 7> g{};
    const auto raw_q = pred.quaternion();
    double qn2 = 0.0;
    for (double v : raw_q) qn2 += v * v;
    if (std::sqrt(qn2) <= kQuaternionNormFloor) {
        throw Error(ErrorKind::DegenerateQuaternion, "predicted quaternion norm below 1e-12");
    }
    if (terms != LossTerms::OrientationOnly) {
        const Vec3 d = pred.position() - target.position;
        const double n = d.norm();
        if (n > 0.0) {
            g[0] = weight * d.x / n;
            g[1] = weight * d.y / n;
            g[2] = weight * d.z / n;
        }
    }
    if (terms != LossTerms::PositionOnly) {
        const auto& t = target.orientation.components();
        std::array<double, 4> d{};
        double n2 = 0.0;
        for (int i = 0; i < 4; ++i) {
            d[i] = raw_q[i] - t[i];
            n2 += d[i] * d[i];
        }
        const double n = std::sqrt(n2);
        if (n > 0.0) {
            for (int i = 0; i < 4; ++i) g[3 + i] = weight * cfg.beta * d[i] / n;
        }
    }
    return g;
}

double term_loss(const RawPose& pred, const Pose& target, const LossConfig& cfg, LossTerms terms) {
    switch (terms) {
        case LossTerms::Both:
            return pose_loss(pred, target, cfg);
        case LossTerms::PositionOnly:
            return translation_error(pred.position(), target.position);
        case LossTerms::OrientationOnly:
            return pose_loss(pred, target, cfg) - translation_error(pred.position(), target.position);
    }
    return 0.0;
}

// Accumulates dL/dW and dL/db for `layer` given upstream delta (w.r.t. its
// pre-activation). Only input indices in `live` are visited: elsewhere the
// input is zero and the input gradient would be discarded by the mask or the
// rectifier. Returns dL/d(unmasked input), zero outside `live`, or nothing
// when `want_input_grad` is false.
std::vector<double> backprop_layer(const Layer& layer, const std::vector<double>& delta,
                                   const std::vector<double>& masked_input,
                                   const std::vector<std::uint8_t>* mask, double scale,
                                   std::span<const std::uint32_t> live, bool want_input_grad,
                                   LayerGradient& grad) {
    const auto& s = layer.spec;
    std::vector<double> d_live(want_input_grad ? live.size() : 0, 0.0);
    for (std::size_t r = 0; r < s.output_width; ++r) {
        const double dr = delta[r];
        if (dr == 0.0) continue;
        grad.bias[r] += dr;
        const double* row = layer.weights.data() + r * s.input_width;
        double* grow = grad.weights.data() + r * s.input_width;
        if (want_input_grad) {
            for (std::size_t k = 0; k < live.size(); ++k) {
                const std::uint32_t c = live[k];
                grow[c] += dr * masked_input[c];
                d_live[k] += dr * row[c];
            }
        } else {
            for (const std::uint32_t c : live) grow[c] += dr * masked_input[c];
        }
    }
    if (!want_input_grad) return {};
    const bool masked = mask != nullptr && !mask->empty();
    std::vector<double> d_in(s.input_width, 0.0);
    for (std::size_t k = 0; k < live.size(); ++k) {
        const std::uint32_t c = live[k];
        d_in[c] = !masked ? d_live[k] : (*mask)[c] ? d_live[k] * scale : 0.0;
    }
    return d_in;
}

std::vector<std::uint32_t> all_indices(std::size_t n) {
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::uint32_t{0});
    return idx;
}

// Inputs of layer i (i > 0) whose gradient survives the mask and the previous
// layer's rectifier.
std::vector<std::uint32_t> live_inputs(const NetworkParams& net, std::size_t i, const std::vector<double>& prev_pre,
                                       const std::vector<std::uint8_t>& mask) {
    const bool rectified = net.layers[i - 1].spec.activation == Activation::Rectifier;
    std::vector<std::uint32_t> idx;
    idx.reserve(prev_pre.size());
    for (std::size_t c = 0; c < prev_pre.size(); ++c) {
        if ((mask.empty() || mask[c] != 0) && (!rectified || prev_pre[c] > 0.0)) {
            idx.push_back(static_cast<std::uint32_t>(c));
        }
    }
    return idx;
}

LayerGradient zero_like(const Layer& layer) {
    return {std::vector<double>(layer.weights.size(), 0.0), std::vector<double>(layer.bias.size(), 0.0)};
}

}  // namespace

OutputScaling fit_output_scaling(std::span<const Example> examples) {
    OutputScaling s;
    if (examples.empty()) return s;
    const double n = static_cast<double>(examples.size());
    for (int axis = 0; axis < 3; ++axis) {
        auto coord = [axis](const Example& e) {
            return axis == 0 ? e.pose.position.x : axis == 1 ? e.pose.position.y : e.pose.position.z;
        };
        double sum = 0.0;
        for (const auto& e : examples) sum += coord(e);
        const double m = sum / n;
        double ss = 0.0;
        for (const auto& e : examples) ss += (coord(e) - m) * (coord(e) - m);
        const double sd = std::sqrt(ss / n);
        s.offset[axis] = m;
        s.scale[axis] = sd > 1e-9 ? sd : 1.0;
    }
    return s;
}

std::size_t NetworkParams::parameter_count() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.size() + l.bias.size();
    if (aux) n += aux->layer.weights.size() + aux->layer.bias.size();
    return n;
}

bool NetworkParams::has_dropout() const noexcept {
    if (!(dropout_p > 0.0)) return false;
    return aux.has_value() ||
           std::any_of(layers.begin(), layers.end(), [](const Layer& l) { return l.spec.has_dropout; });
}

void NetworkParams::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArchitecture, what); };
    if (layers.empty()) fail("network has no layers");
    if (!(dropout_p >= 0.0 && dropout_p < 1.0)) fail("dropout probability must lie in [0, 1)");
    for (std::size_t i = 0; i < kPoseOutputWidth; ++i) {
        if (!(std::isfinite(output.scale[i]) && output.scale[i] > 0.0 && std::isfinite(output.offset[i]))) {
            fail("output scaling must be finite with positive scale");
        }
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& s = layers[i].spec;
        if (s.input_width < 1 || s.output_width < 1) fail("layer widths must be >= 1");
        if (i + 1 < layers.size() && s.output_width != layers[i + 1].spec.input_width) {
            fail("layer " + std::to_string(i) + " output width does not chain into layer " +
                 std::to_string(i + 1));
        }
        if (layers[i].weights.size() != s.input_width * s.output_width ||
            layers[i].bias.size() != s.output_width) {
            fail("layer " + std::to_string(i) + " parameter storage does not match its spec");
        }
    }
    const auto& last = layers.back().spec;
    if (last.output_width != kPoseOutputWidth) fail("final layer must output 7 values");
    if (last.activation != Activation::Identity) fail("final layer must use identity activation");
    if (aux) {
        if (aux->spec.tap_layer + 1 >= layers.size()) fail("aux head must tap a hidden layer");
        const auto& a = aux->layer.spec;
        if (a.input_width != layers[aux->spec.tap_layer].spec.output_width ||
            a.output_width != kPoseOutputWidth || a.activation != Activation::Identity) {
            fail("aux head shape does not match its tap layer");
        }
        if (!(aux->spec.loss_weight >= 0.0 && std::isfinite(aux->spec.loss_weight))) {
            fail("aux loss weight must be finite and >= 0");
        }
    }
}

DropoutMask sample_mask(const NetworkParams& net, std::uint64_t seed, std::uint64_t index) {
    Rng rng(seed, index);
    const double p = net.dropout_p;
    auto draw = [&](std::size_t width) {
        std::vector<std::uint8_t> b(width);
        for (auto& v : b) v = rng.bernoulli(p) ? 0 : 1;
        return b;
    };
    DropoutMask mask;
    mask.layers.reserve(net.layers.size());
    for (const auto& layer : net.layers) {
        mask.layers.push_back(layer.spec.has_dropout ? draw(layer.spec.input_width)
                                                     : std::vector<std::uint8_t>{});
    }
    if (net.aux) mask.aux = draw(net.aux->layer.spec.input_width);
    return mask;
}

DropoutMask all_ones_mask(const NetworkParams& net) {
    DropoutMask mask;
    for (const auto& layer : net.layers) {
        mask.layers.emplace_back(layer.spec.has_dropout ? layer.spec.input_width : 0, std::uint8_t{1});
    }
    if (net.aux) mask.aux.assign(net.aux->layer.spec.input_width, 1);
    return mask;
}

std::vector<LayerSpec> default_architecture(std::size_t input_width,
                                            std::span<const std::size_t> hidden_widths) {
    std::vector<LayerSpec> specs;
    std::size_t in = input_width;
    for (std::size_t h : hidden_widths) {
        specs.push_back({in, h, false, Activation::Rectifier});
        in = h;
    }
    specs.push_back({in, kPoseOutputWidth, false, Activation::Identity});
    const std::size_t n = specs.size();
    for (std::size_t i = n >= 2 ? n - 2 : 0; i < n; ++i) specs[i].has_dropout = true;
    return specs;
}

NetworkParams build_network(std::span<const LayerSpec> specs, double dropout_p, std::uint64_t seed,
                            std::optional<AuxHeadSpec> aux) {
    NetworkParams net;
    net.dropout_p = dropout_p;
    net.seed = seed;
    for (std::size_t i = 0; i < specs.size(); ++i) {
        if (specs[i].input_width < 1 || specs[i].output_width < 1) {
            throw Error(ErrorKind::InvalidArchitecture, "layer widths must be >= 1");
        }
        Layer layer{specs[i], {}, {}};
        init_layer(layer, seed, i);
        net.layers.push_back(std::move(layer));
    }
    if (aux) {
        if (aux->tap_layer + 1 >= specs.size()) {
            throw Error(ErrorKind::InvalidArchitecture, "aux head must tap a hidden layer");
        }
        AuxHead head{*aux, Layer{{specs[aux->tap_layer].output_width, kPoseOutputWidth, true,
                                  Activation::Identity},
                                 {},
                                 {}}};
        init_layer(head.layer, seed, kAuxInitStream);
        net.aux = std::move(head);
    }
    net.validate();
    // Pose heads start at the identity rotation, so an all-zero input (dead
    // rectifiers or a fully dropped mask) still yields a usable quaternion.
    net.layers.back().bias[3] = 1.0;
    if (net.aux) net.aux->layer.bias[3] = 1.0;
    return net;
}

RawPose forward(const NetworkParams& net, std::span<const double> input, const DropoutMask* mask) {
    return to_raw(net, run(net, input, mask).post.back());
}

RawPose forward_aux(const NetworkParams& net, std::span<const double> input, const DropoutMask* mask) {
    if (!net.aux) throw Error(ErrorKind::InvalidArchitecture, "network has no aux head");
    return to_raw(net, run(net, input, mask).aux_output);
}

std::size_t first_dropout_layer(const NetworkParams& net) noexcept {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].spec.has_dropout) return i;
    }
    return net.layers.size();
}

std::vector<double> forward_prefix(const NetworkParams& net, std::span<const double> input, std::size_t stop) {
    check_input(net, input);
    std::vector<double> current(input.begin(), input.end());
    for (std::size_t i = 0; i < stop && i < net.layers.size(); ++i) {
        current = activate(net.layers[i].spec.activation, affine(net.layers[i], current));
    }
    return current;
}

RawPose forward_suffix(const NetworkParams& net, std::size_t start, std::span<const double> activations,
                       const DropoutMask* mask) {
    if (mask != nullptr) check_mask(net, *mask);
    if (start >= net.layers.size() || activations.size() != net.layers[start].spec.input_width) {
        throw Error(ErrorKind::ShapeMismatch, "activations do not match the input of the start layer");
    }
    const double scale = dropout_scale(net.dropout_p);
    std::vector<double> current(activations.begin(), activations.end());
    for (std::size_t i = start; i < net.layers.size(); ++i) {
        const auto& layer = net.layers[i];
        const std::vector<double> in = apply_mask(current, mask != nullptr ? &mask->layers[i] : nullptr, scale);
        current = activate(layer.spec.activation, affine(layer, in));
    }
    return to_raw(net, current);
}

std::vector<double> feature_embedding(const NetworkParams& net, std::span<const double> input) {
    return run(net, input, nullptr).inputs.back();
}

Gradient loss_gradient(const NetworkParams& net, std::span<const Example> batch,
                       std::span<const DropoutMask> masks, const LossConfig& config, LossTerms terms) {
    config.validate();
    if (batch.empty()) throw Error(ErrorKind::InvalidArgument, "empty batch");
    if (masks.size() != batch.size()) {
        throw Error(ErrorKind::ShapeMismatch, "one dropout mask per batch example is required");
    }
    const double scale = dropout_scale(net.dropout_p);
    const double inv_n = 1.0 / static_cast<double>(batch.size());

    Gradient grad;
    for (const auto& layer : net.layers) grad.layers.push_back(zero_like(layer));
    if (net.aux) grad.aux = zero_like(net.aux->layer);
    const std::vector<std::uint32_t> aux_live = all_indices(net.aux ? net.aux->layer.spec.input_width : 0);

    double total = 0.0;
    for (std::size_t e = 0; e < batch.size(); ++e) {
        const Example& ex = batch[e];
        const DropoutMask& mask = masks[e];
        const Trace t = run(net, ex.features, &mask);

        const RawPose out = to_raw(net, t.post.back());
        total += term_loss(out, ex.pose, config, terms);
        const auto g_out = output_gradient(out, ex.pose, config, terms, inv_n);

        // Extra gradient arriving at the tap layer's activation from the aux head.
        std::vector<double> aux_d_post;
        if (net.aux) {
            const RawPose aux_out = to_raw(net, t.aux_output);
            const double w = net.aux->spec.loss_weight;
            total += w * term_loss(aux_out, ex.pose, config, terms);
            const auto g_aux = output_gradient(aux_out, ex.pose, config, terms, w * inv_n);
            aux_d_post = backprop_layer(net.aux->layer, to_pre_scaling(net, g_aux), t.aux_input, &mask.aux,
                                        scale, aux_live, true, *grad.aux);
        }

        std::vector<double> delta = to_pre_scaling(net, g_out);  // final layer is identity
        for (std::size_t i = net.layers.size(); i-- > 0;) {
            if (i == 0) {
                backprop_layer(net.layers[0], delta, t.inputs[0], &mask.layers[0], scale,
                               nonzero_indices(t.inputs[0]), false, grad.layers[0]);
                break;
            }
            std::vector<double> d_in = backprop_layer(net.layers[i], delta, t.inputs[i], &mask.layers[i], scale,
                                                      live_inputs(net, i, t.pre[i - 1], mask.layers[i]), true,
                                                      grad.layers[i]);
            const std::size_t prev = i - 1;
            if (net.aux && net.aux->spec.tap_layer == prev) {
                for (std::size_t c = 0; c < d_in.size(); ++c) d_in[c] += aux_d_post[c];
            }
            if (net.layers[prev].spec.activation == Activation::Rectifier) {
                for (std::size_t c = 0; c < d_in.size(); ++c) {
                    if (!(t.pre[prev][c] > 0.0)) d_in[c] = 0.0;
                }
            }
            delta = std::move(d_in);
        }
    }
    grad.loss = total * inv_n;
    return grad;
}

std::vector<double> flatten(const NetworkParams& net) {
    std::vector<double> out;
    out.reserve(net.parameter_count());
    for (const auto& l : net.layers) {
        out.insert(out.end(), l.weights.begin(), l.weights.end());
        out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
    if (net.aux) {
        out.insert(out.end(), net.aux->layer.weights.begin(), net.aux->layer.weights.end());
        out.insert(out.end(), net.aux->layer.bias.begin(), net.aux->layer.bias.end());
    }
    return out;
}

void unflatten(NetworkParams& net, std::span<const double> values) {
    if (values.size() != net.parameter_count()) {
        throw Error(ErrorKind::ShapeMismatch, "flat parameter vector has the wrong length");
    }
    auto it = values.begin();
    auto fill = [&](std::vector<double>& dst) {
        std::copy_n(it, dst.size(), dst.begin());
        it += static_cast<std::ptrdiff_t>(dst.size());
    };
    for (auto& l : net.layers) {
        fill(l.weights);
        fill(l.bias);
    }
    if (net.aux) {
        fill(net.aux->layer.weights);
        fill(net.aux->layer.bias);
    }
}

std::vector<double> flatten(const Gradient& grad) {
    std::vector<double> out;
    auto push = [&](const LayerGradient& g) {
        out.insert(out.end(), g.weights.begin(), g.weights.end());
        out.insert(out.end(), g.bias.begin(), g.bias.end());
    };
    for (const auto& g : grad.layers) push(g);
    if (grad.aux) push(*grad.aux);
    return out;
}

void TrainConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorKind::InvalidArgument, what); };
    if (!(std::isfinite(learning_rate) && learning_rate >= 0.0)) fail("learning rate must be finite and >= 0");
    if (batch_size < 1) fail("batch size must be >= 1");
    if (epochs < 1) fail("epochs must be >= 1");
    if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
    loss.validate();
}

TrainResult train(NetworkParams net, std::span<const Example> dataset, const TrainConfig& config) {
    config.validate();
    net.validate();
    if (dataset.empty()) throw Error(ErrorKind::InvalidArgument, "empty training set");
    for (const auto& ex : dataset) {
        if (ex.features.size() != net.input_width()) {
            throw Error(ErrorKind::ShapeMismatch, "training example '" + ex.query_id +
                                                      "' has feature width " +
                                                      std::to_string(ex.features.size()));
        }
    }

    std::vector<double> params = flatten(net);
    std::vector<double> velocity(params.size(), 0.0);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    TrainResult result;
    std::uint64_t example_counter = 0;
    const std::uint64_t shuffle_seed = splitmix64(config.seed ^ kShuffleStream);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        Rng shuffle(shuffle_seed, epoch);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            std::vector<Example> batch;
            std::vector<DropoutMask> masks;
            batch.reserve(stop - start);
            masks.reserve(stop - start);
            for (std::size_t k = start; k < stop; ++k) {
                batch.push_back(dataset[order[k]]);
                masks.push_back(sample_mask(net, config.seed, example_counter++));
            }
            const Gradient g = loss_gradient(net, batch, masks, config.loss);
            if (!std::isfinite(g.loss)) {
                throw Error(ErrorKind::NonFiniteLoss, "loss became non-finite in epoch " +
                                                          std::to_string(epoch + 1) +
                                                          "; the learning rate is likely too large");
            }
            epoch_loss += g.loss * static_cast<double>(stop - start);
            const std::vector<double> flat = flatten(g);
            for (std::size_t j = 0; j < params.size(); ++j) {
                velocity[j] = config.momentum * velocity[j] - config.learning_rate * flat[j];
                params[j] += velocity[j];
            }
            unflatten(net, params);
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(dataset.size()));
    }
    result.net = std::move(net);
    return result;
}

}  // namespace bayesreloc
