#include <algorithm>
#include <cmath>
#include <vector>

#include "bayesreloc/error.hpp"
#include "bayesreloc/regressor.hpp"
#include "bayesreloc/rng.hpp"
#include "doctest.h"

using namespace bayesreloc;

namespace {

std::vector<double> random_vector(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = rng.normal();
    return v;
}

Example random_example(Rng& rng, std::size_t width) {
    Example ex;
    ex.features = random_vector(rng, width);
    ex.pose.position = {rng.normal(), rng.normal(), rng.normal()};
    ex.pose.orientation = UnitQuaternion::normalize(rng.normal(), rng.normal(), rng.normal(), rng.normal());
    return ex;
}

// Independent evaluation of the batch loss from forward() and pose_loss().
double oracle_loss(const NetworkParams& net, const std::vector<Example>& batch,
                   const std::vector<DropoutMask>& masks, const LossConfig& cfg) {
    double total = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        total += pose_loss(forward(net, batch[i].features, &masks[i]), batch[i].pose, cfg);
        if (net.aux) {
            total += net.aux->spec.loss_weight *
                     pose_loss(forward_aux(net, batch[i].features, &masks[i]), batch[i].pose, cfg);
        }
    }
    return total / static_cast<double>(batch.size());
}

NetworkParams random_small_network(Rng& rng, std::uint64_t seed, bool with_aux) {
    const std::size_t in = 2 + rng.below(15);
    std::vector<std::size_t> hidden;
    const std::size_t depth = 1 + rng.below(3);
    for (std::size_t i = 0; i < depth; ++i) hidden.push_back(4 + rng.below(13));
    auto specs = default_architecture(in, hidden);
    std::optional<AuxHeadSpec> aux;
    if (with_aux) aux = AuxHeadSpec{0, 0.3};
    NetworkParams net = build_network(specs, 0.5, seed, aux);
    // Move the biases away from zero so rectifier kinks are not hit by the finite differences.
    for (auto& layer : net.layers) {
        for (double& b : layer.bias) b = 0.3 * rng.normal();
    }
    // Nonzero aux bias keeps the aux quaternion away from zero when its whole input is dropped.
    if (net.aux) {
        for (double& b : net.aux->layer.bias) b = 0.3 * rng.normal();
    }
    net.output.scale = {2.0, 0.5, 1.5, 1, 1, 1, 1};
    net.output.offset = {0.1, -0.2, 0.3, 0, 0, 0, 0};
    return net;
}

}  // namespace

TEST_CASE("parameter counting") {
    const std::vector<LayerSpec> specs{{16, 32, false, Activation::Rectifier}, {32, 7, true, Activation::Identity}};
    const NetworkParams net = build_network(specs, 0.5, 1);
    CHECK(net.layers.size() == 2);
    CHECK(net.parameter_count() == 32 * 16 + 32 + 7 * 32 + 7);
}

TEST_CASE("build_network is deterministic") {
    const std::vector<LayerSpec> specs{{16, 32, false, Activation::Rectifier}, {32, 7, true, Activation::Identity}};
    CHECK(flatten(build_network(specs, 0.5, 1)) == flatten(build_network(specs, 0.5, 1)));
    CHECK(flatten(build_network(specs, 0.5, 1)) != flatten(build_network(specs, 0.5, 2)));
}

TEST_CASE("invalid architectures are rejected") {
    auto kind_of = [](auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::IoError;
    };
    const std::vector<LayerSpec> six{{16, 6, true, Activation::Identity}};
    CHECK(kind_of([&] { build_network(six, 0.5, 1); }) == ErrorKind::InvalidArchitecture);
    const std::vector<LayerSpec> broken{{16, 32, false, Activation::Rectifier}, {31, 7, true, Activation::Identity}};
    CHECK(kind_of([&] { build_network(broken, 0.5, 1); }) == ErrorKind::InvalidArchitecture);
    const std::vector<LayerSpec> relu_out{{16, 7, false, Activation::Rectifier}};
    CHECK(kind_of([&] { build_network(relu_out, 0.5, 1); }) == ErrorKind::InvalidArchitecture);
    const std::vector<LayerSpec> ok{{16, 7, false, Activation::Identity}};
    CHECK(kind_of([&] { build_network(ok, 1.0, 1); }) == ErrorKind::InvalidArchitecture);
}

TEST_CASE("pose head biases start at the identity rotation") {
    const std::vector<std::size_t> hidden{8, 8};
    const NetworkParams net = build_network(default_architecture(4, hidden), 0.5, 1, AuxHeadSpec{0, 0.3});
    CHECK(net.layers.back().bias == std::vector<double>{0, 0, 0, 1, 0, 0, 0});
    CHECK(net.aux->layer.bias == std::vector<double>{0, 0, 0, 1, 0, 0, 0});
    CHECK(net.layers.front().bias == std::vector<double>(8, 0.0));
}

TEST_CASE("glorot initialization bounds") {
    const std::vector<LayerSpec> specs{{16, 32, false, Activation::Rectifier}, {32, 7, true, Activation::Identity}};
    const NetworkParams net = build_network(specs, 0.5, 4);
    for (const auto& layer : net.layers) {
        const double limit = std::sqrt(6.0 / static_cast<double>(layer.spec.input_width + layer.spec.output_width));
        for (double w : layer.weights) CHECK(std::abs(w) <= limit);
    }
}

TEST_CASE("identity layer passes the input through") {
    const std::vector<LayerSpec> specs{{10, 7, false, Activation::Identity}};
    NetworkParams net = build_network(specs, 0.0, 1);
    std::fill(net.layers[0].weights.begin(), net.layers[0].weights.end(), 0.0);
    std::fill(net.layers[0].bias.begin(), net.layers[0].bias.end(), 0.0);
    for (std::size_t i = 0; i < 7; ++i) net.layers[0].weight(i, i) = 1.0;
    const std::vector<double> input{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    const RawPose out = forward(net, input);
    for (std::size_t i = 0; i < 7; ++i) CHECK(out.values[i] == input[i]);
}

TEST_CASE("all-ones mask with p=0 equals the maskless pass") {
    Rng rng(21);
    const std::vector<std::size_t> hidden{12, 9};
    const NetworkParams net = build_network(default_architecture(5, hidden), 0.0, 3);
    const DropoutMask ones = all_ones_mask(net);
    for (int i = 0; i < 20; ++i) {
        const auto x = random_vector(rng, 5);
        CHECK(forward(net, x, &ones).values == forward(net, x).values);
    }
}

TEST_CASE("hand-computed two-layer forward pass") {
    const std::vector<LayerSpec> specs{{3, 2, false, Activation::Rectifier}, {2, 7, true, Activation::Identity}};
    NetworkParams net = build_network(specs, 0.5, 1);
    net.layers[0].weights = {2.0, 0.0, 0.0, -1.0, 0.0, 0.0};
    net.layers[0].bias = {0.5, 0.25};
    // h = relu(2*1 + 0.5, -1 + 0.25) = (2.5, 0)
    net.layers[1].weights = {1, 0, 0, 1, 2, 0, -1, 0, 0, 0, 0, 0, 3, 0};
    net.layers[1].bias = {0, 0, 0, 1, 0, 0, 0};
    const std::vector<double> x{1, 0, 0};
    const RawPose det = forward(net, x);
    const std::array<double, 7> expected{2.5, 0.0, 5.0, -1.5, 0.0, 0.0, 7.5};
    for (std::size_t i = 0; i < 7; ++i) CHECK(det.values[i] == doctest::Approx(expected[i]));

    // Keeping unit 0 of the final layer's input doubles it; dropping it zeroes it.
    DropoutMask keep = all_ones_mask(net);
    keep.layers[1] = {1, 0};
    const RawPose kept = forward(net, x, &keep);
    for (std::size_t i = 0; i < 7; ++i) {
        const double b = net.layers[1].bias[i];
        CHECK(kept.values[i] == doctest::Approx(2.0 * (expected[i] - b) + b));
    }
    DropoutMask drop = all_ones_mask(net);
    drop.layers[1] = {0, 1};
    const RawPose dropped = forward(net, x, &drop);
    for (std::size_t i = 0; i < 7; ++i) CHECK(dropped.values[i] == doctest::Approx(net.layers[1].bias[i]));
}

TEST_CASE("output scaling applies per component") {
    const std::vector<LayerSpec> specs{{7, 7, false, Activation::Identity}};
    NetworkParams net = build_network(specs, 0.0, 1);
    std::fill(net.layers[0].weights.begin(), net.layers[0].weights.end(), 0.0);
    std::fill(net.layers[0].bias.begin(), net.layers[0].bias.end(), 0.0);
    for (std::size_t i = 0; i < 7; ++i) net.layers[0].weight(i, i) = 1.0;
    net.output.scale = {10, 20, 30, 1, 1, 1, 1};
    net.output.offset = {1, 2, 3, 0, 0, 0, 0};
    const RawPose out = forward(net, std::vector<double>{1, 1, 1, 1, 0, 0, 0});
    CHECK(out.values[0] == 11.0);
    CHECK(out.values[1] == 22.0);
    CHECK(out.values[2] == 33.0);
    CHECK(out.values[3] == 1.0);
}

TEST_CASE("fit_output_scaling uses mean and population standard deviation of positions") {
    std::vector<Example> data(4);
    const double xs[] = {0, 2, 4, 6};
    for (int i = 0; i < 4; ++i) data[i].pose.position = {xs[i], 5.0, -xs[i]};
    const OutputScaling s = fit_output_scaling(data);
    CHECK(s.offset[0] == doctest::Approx(3.0));
    CHECK(s.offset[2] == doctest::Approx(-3.0));
    CHECK(s.scale[0] == doctest::Approx(std::sqrt(20.0 / 4.0)));
    CHECK(s.scale[1] > 0.0);  // constant axis keeps a usable scale
    CHECK(s.scale[3] == 1.0);
    CHECK(s.offset[3] == 0.0);
}

TEST_CASE("forward rejects mismatched shapes") {
    const std::vector<std::size_t> hidden{8};
    const NetworkParams net = build_network(default_architecture(4, hidden), 0.5, 1);
    CHECK_THROWS_AS(forward(net, std::vector<double>(5, 0.0)), Error);
    DropoutMask bad = all_ones_mask(net);
    bad.layers.back().pop_back();
    CHECK_THROWS_AS(forward(net, std::vector<double>(4, 0.0), &bad), Error);
}

TEST_CASE("prefix and suffix evaluation matches forward bit for bit") {
    Rng rng(31);
    const std::vector<std::size_t> hidden{16, 12, 10};
    const NetworkParams net = build_network(default_architecture(6, hidden), 0.5, 2);
    const std::size_t start = first_dropout_layer(net);
    CHECK(start == net.layers.size() - 2);
    for (int i = 0; i < 20; ++i) {
        const auto x = random_vector(rng, 6);
        const DropoutMask m = sample_mask(net, 5, i);
        const auto prefix = forward_prefix(net, x, start);
        CHECK(forward_suffix(net, start, prefix, &m).values == forward(net, x, &m).values);
    }
}

TEST_CASE("zero error gives the zero gradient") {
    const std::vector<LayerSpec> specs{{7, 7, false, Activation::Identity}};
    NetworkParams net = build_network(specs, 0.0, 1);
    std::fill(net.layers[0].weights.begin(), net.layers[0].weights.end(), 0.0);
    std::fill(net.layers[0].bias.begin(), net.layers[0].bias.end(), 0.0);
    for (std::size_t i = 0; i < 7; ++i) net.layers[0].weight(i, i) = 1.0;
    Example ex;
    ex.pose.position = {1, 2, 3};
    ex.pose.orientation = UnitQuaternion::normalize(1, 2, 3, 4);
    const auto& q = ex.pose.orientation.components();
    ex.features = {1, 2, 3, q[0], q[1], q[2], q[3]};
    const std::vector<Example> batch{ex};
    const std::vector<DropoutMask> masks{all_ones_mask(net)};
    const Gradient g = loss_gradient(net, batch, masks, LossConfig{10.0});
    CHECK(g.loss == 0.0);
    for (double v : flatten(g)) CHECK(v == 0.0);
}

TEST_CASE("analytic gradient matches central finite differences") {
    Rng rng(1234);
    for (int trial = 0; trial < 5; ++trial) {
        NetworkParams net = random_small_network(rng, 100 + trial, trial % 2 == 1);
        std::vector<Example> batch;
        std::vector<DropoutMask> masks;
        for (int i = 0; i < 4; ++i) {
            batch.push_back(random_example(rng, net.input_width()));
            masks.push_back(sample_mask(net, 77 + trial, i));
        }
        const LossConfig cfg{3.0};
        const std::vector<double> analytic = flatten(loss_gradient(net, batch, masks, cfg));
        const std::vector<double> base = flatten(net);
        REQUIRE(analytic.size() == base.size());
        const double h = 1e-5;
        std::size_t failures = 0;
        for (std::size_t i = 0; i < base.size(); ++i) {
            std::vector<double> p = base;
            p[i] = base[i] + h;
            unflatten(net, p);
            const double up = oracle_loss(net, batch, masks, cfg);
            p[i] = base[i] - h;
            unflatten(net, p);
            const double down = oracle_loss(net, batch, masks, cfg);
            const double numeric = (up - down) / (2.0 * h);
            const double diff = std::abs(numeric - analytic[i]);
            if (diff > 1e-7 && diff > 1e-4 * std::abs(numeric)) ++failures;
        }
        unflatten(net, base);
        CHECK(failures == 0);
    }
}

TEST_CASE("gradient is linear in beta") {
    Rng rng(55);
    const NetworkParams net = random_small_network(rng, 9, false);
    std::vector<Example> batch;
    std::vector<DropoutMask> masks;
    for (int i = 0; i < 6; ++i) {
        batch.push_back(random_example(rng, net.input_width()));
        masks.push_back(sample_mask(net, 3, i));
    }
    const auto g1 = flatten(loss_gradient(net, batch, masks, LossConfig{1.0}));
    const auto g2 = flatten(loss_gradient(net, batch, masks, LossConfig{2.0}));
    const auto go = flatten(loss_gradient(net, batch, masks, LossConfig{1.0}, LossTerms::OrientationOnly));
    const auto gp = flatten(loss_gradient(net, batch, masks, LossConfig{1.0}, LossTerms::PositionOnly));
    for (std::size_t i = 0; i < g1.size(); ++i) {
        CHECK(g2[i] - g1[i] == doctest::Approx(go[i]).epsilon(1e-9).scale(1e-12));
        CHECK(gp[i] + go[i] == doctest::Approx(g1[i]).epsilon(1e-9).scale(1e-12));
    }
}

TEST_CASE("masked forward is homogeneous through identity layers") {
    Rng rng(8);
    const std::vector<LayerSpec> specs{{6, 9, true, Activation::Identity}, {9, 7, true, Activation::Identity}};
    NetworkParams net = build_network(specs, 0.5, 4);
    for (auto& layer : net.layers) std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    for (int i = 0; i < 10; ++i) {
        const auto x = random_vector(rng, 6);
        const DropoutMask m = sample_mask(net, 1, i);
        std::vector<double> scaled = x;
        for (double& v : scaled) v *= 2.5;
        const RawPose a = forward(net, x, &m);
        const RawPose b = forward(net, scaled, &m);
        for (std::size_t k = 0; k < 7; ++k) CHECK(b.values[k] == doctest::Approx(2.5 * a.values[k]));
    }
}

TEST_CASE("inverted dropout is unbiased on a linear layer") {
    Rng rng(17);
    const std::vector<LayerSpec> specs{{12, 7, true, Activation::Identity}};
    const NetworkParams net = build_network(specs, 0.5, 6);
    const auto x = random_vector(rng, 12);
    const RawPose det = forward(net, x);
    const int n = 10000;
    std::array<double, 7> sum{}, sum2{};
    for (int i = 0; i < n; ++i) {
        const DropoutMask m = sample_mask(net, 99, i);
        const RawPose out = forward(net, x, &m);
        for (std::size_t k = 0; k < 7; ++k) {
            sum[k] += out.values[k];
            sum2[k] += out.values[k] * out.values[k];
        }
    }
    for (std::size_t k = 0; k < 7; ++k) {
        const double mean = sum[k] / n;
        const double var = (sum2[k] - n * mean * mean) / (n - 1);
        const double se = std::sqrt(var / n);
        CHECK(std::abs(mean - det.values[k]) <= 3.0 * se);
    }
}

TEST_CASE("sample_mask keeps units with probability 1 - p") {
    const std::vector<LayerSpec> specs{{1000, 7, true, Activation::Identity}};
    const NetworkParams net = build_network(specs, 0.5, 1);
    std::size_t kept = 0;
    for (int i = 0; i < 10; ++i) {
        const DropoutMask m = sample_mask(net, 2, i);
        for (auto b : m.layers[0]) kept += b;
    }
    CHECK(kept == doctest::Approx(5000).epsilon(0.03));
    CHECK(sample_mask(net, 2, 3).layers == sample_mask(net, 2, 3).layers);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
    Rng rng(2);
    std::vector<Example> data;
    for (int i = 0; i < 20; ++i) data.push_back(random_example(rng, 5));
    const std::vector<std::size_t> hidden{16, 16};
    const NetworkParams net = build_network(default_architecture(5, hidden), 0.5, 1);
    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.epochs = 3;
    cfg.batch_size = 4;
    const TrainResult result = train(net, data, cfg);
    CHECK(flatten(result.net) == flatten(net));
    CHECK(result.epoch_losses.size() == 3);
}

TEST_CASE("training a linear map drives the loss down") {
    // Position (2u + 1, -u, 0.5) and the identity rotation are affine in u.
    Rng rng(4);
    std::vector<Example> data;
    for (int i = 0; i < 64; ++i) {
        Example ex;
        const double u = rng.uniform(-1.0, 1.0);
        ex.features = {u};
        ex.pose.position = {2.0 * u + 1.0, -u, 0.5};
        data.push_back(ex);
    }
    const std::vector<LayerSpec> specs{{1, 7, false, Activation::Identity}};
    const NetworkParams net = build_network(specs, 0.0, 1);
    TrainConfig cfg;
    cfg.learning_rate = 0.01;
    cfg.batch_size = 8;
    cfg.epochs = 200;
    cfg.seed = 5;
    const TrainResult result = train(net, data, cfg);
    REQUIRE(result.epoch_losses.size() == 200);
    CHECK(result.epoch_losses.back() < 0.01 * result.epoch_losses.front());
}

TEST_CASE("training is deterministic in its seed") {
    Rng rng(6);
    std::vector<Example> data;
    for (int i = 0; i < 40; ++i) data.push_back(random_example(rng, 6));
    const std::vector<std::size_t> hidden{10, 10};
    const NetworkParams net = build_network(default_architecture(6, hidden), 0.5, 1);
    TrainConfig cfg;
    cfg.learning_rate = 1e-3;
    cfg.batch_size = 7;
    cfg.epochs = 5;
    cfg.seed = 12;
    const TrainResult a = train(net, data, cfg);
    const TrainResult b = train(net, data, cfg);
    CHECK(flatten(a.net) == flatten(b.net));
    CHECK(a.epoch_losses == b.epoch_losses);
    cfg.seed = 13;
    CHECK(flatten(train(net, data, cfg).net) != flatten(a.net));
}

TEST_CASE("divergent learning rate raises NonFiniteLoss") {
    Rng rng(6);
    std::vector<Example> data;
    for (int i = 0; i < 40; ++i) data.push_back(random_example(rng, 6));
    const std::vector<std::size_t> hidden{32, 32};
    const NetworkParams net = build_network(default_architecture(6, hidden), 0.5, 1);
    TrainConfig cfg;
    cfg.learning_rate = 1e3;
    cfg.batch_size = 8;
    cfg.epochs = 50;
    try {
        train(net, data, cfg);
        FAIL("expected divergence");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NonFiniteLoss);
    }
}

TEST_CASE("feature embedding contract") {
    Rng rng(10);
    const std::vector<LayerSpec> specs{{5, 11, false, Activation::Rectifier}, {11, 7, true, Activation::Identity}};
    const NetworkParams net = build_network(specs, 0.5, 1);
    const auto x = random_vector(rng, 5);
    const auto e1 = feature_embedding(net, x);
    const auto e2 = feature_embedding(net, x);
    CHECK(e1.size() == 11);
    CHECK(e1 == e2);
    double d = 0.0;
    for (std::size_t i = 0; i < e1.size(); ++i) d += (e1[i] - e2[i]) * (e1[i] - e2[i]);
    CHECK(d == 0.0);
}

TEST_CASE("flatten and unflatten round trip") {
    Rng rng(12);
    NetworkParams net = random_small_network(rng, 3, true);
    const auto flat = flatten(net);
    CHECK(flat.size() == net.parameter_count());
    NetworkParams copy = net;
    std::vector<double> zeros(flat.size(), 0.0);
    unflatten(copy, zeros);
    unflatten(copy, flat);
    CHECK(flatten(copy) == flat);
    CHECK_THROWS_AS(unflatten(copy, std::vector<double>(flat.size() + 1)), Error);
}
