#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "bayesreloc/error.hpp"
#include "bayesreloc/geometry.hpp"
#include "bayesreloc/rng.hpp"
#include "doctest.h"

using namespace bayesreloc;

namespace {

void check_quat(const UnitQuaternion& q, double w, double x, double y, double z, double tol = 1e-12) {
    CHECK(q.w() == doctest::Approx(w).epsilon(tol));
    CHECK(q.x() == doctest::Approx(x).epsilon(tol));
    CHECK(q.y() == doctest::Approx(y).epsilon(tol));
    CHECK(q.z() == doctest::Approx(z).epsilon(tol));
}

UnitQuaternion random_quat(Rng& rng) {
    return UnitQuaternion::normalize(rng.normal(), rng.normal(), rng.normal(), rng.normal());
}

}  // namespace

TEST_CASE("normalize scales to unit norm") {
    check_quat(UnitQuaternion::normalize(2, 0, 0, 0), 1, 0, 0, 0);
    check_quat(UnitQuaternion::normalize(0, 3, 0, 0), 0, 1, 0, 0);
    check_quat(UnitQuaternion::normalize(1, 1, 1, 1), 0.5, 0.5, 0.5, 0.5);
}

TEST_CASE("normalize rejects near-zero quaternions") {
    CHECK_THROWS_AS(UnitQuaternion::normalize(0, 0, 0, 0), Error);
    try {
        UnitQuaternion::normalize(1e-13, 0, 0, 0);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::DegenerateQuaternion);
    }
}

TEST_CASE("normalize is idempotent bit for bit") {
    Rng rng(3);
    for (int i = 0; i < 1000; ++i) {
        const UnitQuaternion q = random_quat(rng);
        const auto& c = q.components();
        CHECK(UnitQuaternion::normalize(c[0], c[1], c[2], c[3]) == q);
    }
}

TEST_CASE("pose loss examples") {
    const LossConfig beta500{500.0};
    const Pose target{{0.5, -1.0, 2.0}, UnitQuaternion::from_axis_angle(0, 0, 1, 0.3)};
    RawPose exact;
    exact.values = {0.5, -1.0, 2.0, target.orientation.w(), target.orientation.x(), target.orientation.y(),
                    target.orientation.z()};
    CHECK(pose_loss(exact, target, LossConfig{1.0}) == 0.0);
    CHECK(pose_loss(exact, target, beta500) == 0.0);

    const Pose origin{{0, 0, 0}, UnitQuaternion::identity()};
    RawPose shifted;
    shifted.values = {1, 0, 0, 1, 0, 0, 0};
    CHECK(pose_loss(shifted, origin, beta500) == doctest::Approx(1.0));

    RawPose turned;
    turned.values = {0, 0, 0, 0, 1, 0, 0};
    CHECK(pose_loss(turned, origin, LossConfig{2.0}) == doctest::Approx(2.0 * std::sqrt(2.0)));
}

TEST_CASE("loss config validation") {
    CHECK_THROWS_AS(LossConfig{0.0}.validate(), Error);
    CHECK_THROWS_AS(LossConfig{-1.0}.validate(), Error);
    CHECK_THROWS_AS(LossConfig{std::nan("")}.validate(), Error);
    CHECK_NOTHROW(LossConfig{250.0}.validate());
}

TEST_CASE("translation error examples") {
    CHECK(translation_error({0, 0, 0}, {3, 4, 0}) == doctest::Approx(5.0));
    CHECK(translation_error({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(translation_error({1, 1, 1}, {2, 2, 2}) == doctest::Approx(std::sqrt(3.0)));
}

TEST_CASE("rotation error examples") {
    Rng rng(5);
    const UnitQuaternion q = random_quat(rng);
    CHECK(rotation_error_deg(q, q) == 0.0);
    CHECK(rotation_error_deg(q, -q) == 0.0);
    const double c = std::cos(std::numbers::pi / 4);
    const auto b = UnitQuaternion::normalize(c, 0, 0, c);
    CHECK(rotation_error_deg(UnitQuaternion::identity(), b) == doctest::Approx(90.0));
}

TEST_CASE("rotation error agrees with 2 acos(|a.b|)") {
    Rng rng(10);
    for (int i = 0; i < 500; ++i) {
        const UnitQuaternion a = random_quat(rng);
        const UnitQuaternion b = random_quat(rng);
        const double d = std::min(1.0, std::abs(a.dot(b)));
        const double expected = 2.0 * std::acos(d) * 180.0 / std::numbers::pi;
        CHECK(rotation_error_deg(a, b) == doctest::Approx(expected).epsilon(1e-9));
        CHECK(rotation_error_deg(a, b) == rotation_error_deg(b, a));
        CHECK(rotation_error_deg(a, b) <= 180.0);
    }
}

TEST_CASE("rotation error matches the axis-angle construction") {
    Rng rng(9);
    for (int i = 0; i < 200; ++i) {
        const double angle = rng.uniform(0.0, std::numbers::pi);
        const auto axis = UnitQuaternion::normalize(0, rng.normal(), rng.normal(), rng.normal());
        const UnitQuaternion r = UnitQuaternion::from_axis_angle(axis.x(), axis.y(), axis.z(), angle);
        CHECK(rotation_error_deg(UnitQuaternion::identity(), r) ==
              doctest::Approx(angle * 180.0 / std::numbers::pi).epsilon(1e-6));
    }
}

TEST_CASE("quaternion mean examples") {
    Rng rng(11);
    const UnitQuaternion q = random_quat(rng).canonical();
    const std::vector<UnitQuaternion> same{q, q, q};
    check_quat(quaternion_mean(same), q.w(), q.x(), q.y(), q.z());
    const std::vector<UnitQuaternion> flipped{q, -q};
    check_quat(quaternion_mean(flipped), q.w(), q.x(), q.y(), q.z());

    const double c = std::cos(std::numbers::pi / 4);
    const std::vector<UnitQuaternion> pair{UnitQuaternion::identity(), UnitQuaternion::normalize(c, 0, 0, c)};
    const UnitQuaternion m = quaternion_mean(pair);
    check_quat(m, std::cos(std::numbers::pi / 8), 0, 0, std::sin(std::numbers::pi / 8));
}

TEST_CASE("quaternion mean agrees with the chordal minimizer found by grid search") {
    // Sum of squared chordal distances min(|q - s|, |q + s|)^2 over z-rotations q.
    const double c = std::cos(std::numbers::pi / 4);
    const std::vector<UnitQuaternion> pair{UnitQuaternion::identity(), UnitQuaternion::normalize(c, 0, 0, c)};
    double best_angle = 0.0;
    double best_cost = 1e300;
    const int steps = 720000;
    for (int i = 0; i < steps; ++i) {
        const double half = std::numbers::pi * i / steps;
        const double qw = std::cos(half);
        const double qz = std::sin(half);
        double cost = 0.0;
        for (const auto& s : pair) {
            const double d = qw * s.w() + qz * s.z();
            cost += 2.0 - 2.0 * std::abs(d);
        }
        if (cost < best_cost) {
            best_cost = cost;
            best_angle = 2.0 * half;
        }
    }
    const UnitQuaternion m = quaternion_mean(pair);
    const double mean_angle = 2.0 * std::atan2(m.z(), m.w());
    CHECK(mean_angle == doctest::Approx(best_angle).epsilon(1e-5));
    CHECK(mean_angle * 180.0 / std::numbers::pi == doctest::Approx(45.0).epsilon(1e-9));
}

TEST_CASE("quaternion mean is invariant to sign flips") {
    Rng rng(13);
    const UnitQuaternion centre = random_quat(rng);
    std::vector<UnitQuaternion> samples;
    for (int i = 0; i < 20; ++i) {
        const auto& c = centre.components();
        samples.push_back(UnitQuaternion::normalize(c[0] + 0.1 * rng.normal(), c[1] + 0.1 * rng.normal(),
                                                    c[2] + 0.1 * rng.normal(), c[3] + 0.1 * rng.normal()));
    }
    const UnitQuaternion base = quaternion_mean(samples);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<UnitQuaternion> flipped = samples;
        for (auto& s : flipped) {
            if (rng.bernoulli(0.5)) s = -s;
        }
        const UnitQuaternion m = quaternion_mean(flipped);
        check_quat(m, base.w(), base.x(), base.y(), base.z(), 1e-12);
    }
}

TEST_CASE("quaternion mean of an empty set is rejected") {
    CHECK_THROWS_AS(quaternion_mean(std::vector<UnitQuaternion>{}), Error);
}

TEST_CASE("quaternion mean keeps orthogonal samples unflipped") {
    const std::vector<UnitQuaternion> pair{UnitQuaternion::normalize(1, 1, 0, 0),
                                           UnitQuaternion::normalize(-1, 1, 0, 0)};
    check_quat(quaternion_mean(pair), 0, 1, 0, 0);
}

TEST_CASE("canonical sign") {
    CHECK(UnitQuaternion::normalize(-1, 0, 0, 0).canonical() == UnitQuaternion::identity());
    CHECK(UnitQuaternion::normalize(0, -1, 2, 0).canonical().x() > 0);
}
