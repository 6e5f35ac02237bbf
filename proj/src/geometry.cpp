#include "bayesreloc/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "bayesreloc/error.hpp"

namespace bayesreloc {

double Vec3::norm() const noexcept { return std::sqrt(x * x + y * y + z * z); }

bool Vec3::finite() const noexcept {
    return std::isfinite(x) && std::isfinite(y) && std::isfinite(z);
}

UnitQuaternion UnitQuaternion::normalize(double w, double x, double y, double z) {
    if (!(std::isfinite(w) && std::isfinite(x) && std::isfinite(y) && std::isfinite(z))) {
        throw Error(ErrorKind::DegenerateQuaternion, "non-finite quaternion component");
    }
    const double n = std::sqrt(w * w + x * x + y * y + z * z);
    if (!(n > kQuaternionNormFloor)) {
        throw Error(ErrorKind::DegenerateQuaternion, "quaternion norm below 1e-12");
    }
    // Already unit to rounding: keep the bits so normalization is idempotent.
    if (std::abs(n - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon()) {
        return UnitQuaternion(w, x, y, z);
    }
    return UnitQuaternion(w / n, x / n, y / n, z / n);
}

UnitQuaternion UnitQuaternion::normalize(std::span<const double, 4> raw) {
    return normalize(raw[0], raw[1], raw[2], raw[3]);
}

UnitQuaternion UnitQuaternion::from_axis_angle(double ax, double ay, double az, double angle_rad) {
    const double s = std::sin(0.5 * angle_rad);
    return normalize(std::cos(0.5 * angle_rad), ax * s, ay * s, az * s);
}

UnitQuaternion UnitQuaternion::canonical() const noexcept {
    for (double c : c_) {
        if (c > 0.0) return *this;
        if (c < 0.0) return -*this;
    }
    return *this;
}

Pose RawPose::to_pose() const { return {position(), UnitQuaternion::normalize(quaternion())}; }

void LossConfig::validate() const {
    if (!(std::isfinite(beta) && beta > 0.0)) {
        throw Error(ErrorKind::InvalidArgument, "beta must be finite and > 0");
    }
}

double pose_loss(const RawPose& predicted, const Pose& target, const LossConfig& config) {
    config.validate();
    const auto raw_q = predicted.quaternion();
    const double raw_norm = std::sqrt(raw_q[0] * raw_q[0] + raw_q[1] * raw_q[1] +
                                      raw_q[2] * raw_q[2] + raw_q[3] * raw_q[3]);
    // NaN passes through so that divergence surfaces as a non-finite loss.
    if (raw_norm <= kQuaternionNormFloor) {
        throw Error(ErrorKind::DegenerateQuaternion, "predicted quaternion norm below 1e-12");
    }
    const double position_term = translation_error(predicted.position(), target.position);

    // Renormalizing a unit quaternion returns it bit for bit.
    const auto& t = UnitQuaternion::normalize(target.orientation.components()).components();
    double sq = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double d = raw_q[i] - t[i];
        sq += d * d;
    }
    return position_term + config.beta * std::sqrt(sq);
}

double translation_error(const Vec3& a, const Vec3& b) noexcept { return (a - b).norm(); }

double rotation_error_deg(const UnitQuaternion& a, const UnitQuaternion& b) noexcept {
    // Equals 2 acos(|a.b|); the half-chord form keeps precision near zero angle.
    const double sign = a.dot(b) < 0.0 ? -1.0 : 1.0;
    double minus = 0.0;
    double plus = 0.0;
    for (int i = 0; i < 4; ++i) {
        const double bi = sign * b.components()[i];
        minus += (a.components()[i] - bi) * (a.components()[i] - bi);
        plus += (a.components()[i] + bi) * (a.components()[i] + bi);
    }
    const double angle = 4.0 * std::atan2(std::sqrt(minus), std::sqrt(plus));
    return std::clamp(angle, 0.0, std::numbers::pi) * 180.0 / std::numbers::pi;
}

UnitQuaternion quaternion_mean(std::span<const UnitQuaternion> samples) {
    if (samples.empty()) {
        throw Error(ErrorKind::InvalidArgument, "quaternion_mean of an empty set");
    }
    const UnitQuaternion& ref = samples.front();
    std::array<double, 4> sum{};
    for (const auto& q : samples) {
        const double sign = ref.dot(q) < 0.0 ? -1.0 : 1.0;
        const auto& c = q.components();
        for (int i = 0; i < 4; ++i) sum[i] += sign * c[i];
    }
    const double n = static_cast<double>(samples.size());
    for (double& s : sum) s /= n;
    const double norm = std::sqrt(sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2] + sum[3] * sum[3]);
    if (!(norm > kMeanNormFloor)) {
        throw Error(ErrorKind::DegenerateMean, "aligned quaternion mean has vanishing norm");
    }
    return UnitQuaternion::normalize(sum).canonical();
}

}  // namespace bayesreloc
