#pragma once

// Pose representation, quaternion helpers, the pose regression loss and the
// error metrics used for evaluation. Quaternions are stored scalar first
// (w, x, y, z).

#include <array>
#include <span>

namespace bayesreloc {

inline constexpr double kQuaternionNormFloor = 1e-12;
inline constexpr double kMeanNormFloor = 1e-9;

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr Vec3 operator+(const Vec3& o) const noexcept { return {x + o.x, y + o.y, z + o.z}; }
    constexpr Vec3 operator-(const Vec3& o) const noexcept { return {x - o.x, y - o.y, z - o.z}; }
    constexpr Vec3 operator*(double s) const noexcept { return {x * s, y * s, z * s}; }
    constexpr bool operator==(const Vec3&) const noexcept = default;

    double norm() const noexcept;
    bool finite() const noexcept;
};

// Unit quaternion. Only constructible through normalization, so the unit-norm
// invariant always holds. q and -q denote the same rotation.
class UnitQuaternion {
public:
    constexpr UnitQuaternion() noexcept = default;

    // Throws Error(DegenerateQuaternion) if the norm is <= 1e-12.
    static UnitQuaternion normalize(double w, double x, double y, double z);
    static UnitQuaternion normalize(std::span<const double, 4> raw);
    static UnitQuaternion identity() noexcept { return {}; }
    // Rotation of `angle_rad` about the unit axis (ax, ay, az).
    static UnitQuaternion from_axis_angle(double ax, double ay, double az, double angle_rad);

    constexpr double w() const noexcept { return c_[0]; }
    constexpr double x() const noexcept { return c_[1]; }
    constexpr double y() const noexcept { return c_[2]; }
    constexpr double z() const noexcept { return c_[3]; }
    constexpr const std::array<double, 4>& components() const noexcept { return c_; }

    constexpr double dot(const UnitQuaternion& o) const noexcept {
        return c_[0] * o.c_[0] + c_[1] * o.c_[1] + c_[2] * o.c_[2] + c_[3] * o.c_[3];
    }
    // Exact negation; the same rotation.
    constexpr UnitQuaternion operator-() const noexcept {
        return UnitQuaternion(-c_[0], -c_[1], -c_[2], -c_[3]);
    }
    // Sign representative whose first nonzero component is positive.
    UnitQuaternion canonical() const noexcept;

    constexpr bool operator==(const UnitQuaternion&) const noexcept = default;

private:
    constexpr UnitQuaternion(double w, double x, double y, double z) noexcept : c_{w, x, y, z} {}

    std::array<double, 4> c_{1.0, 0.0, 0.0, 0.0};
};

struct Pose {
    Vec3 position;
    UnitQuaternion orientation;

    bool operator==(const Pose&) const noexcept = default;
};

// Network output before normalization: position followed by a raw 4-vector.
struct RawPose {
    std::array<double, 7> values{};

    Vec3 position() const noexcept { return {values[0], values[1], values[2]}; }
    std::span<const double, 4> quaternion() const noexcept {
        return std::span<const double, 4>(values.data() + 3, 4);
    }
    // Normalizes the quaternion part. Throws DegenerateQuaternion.
    Pose to_pose() const;
};

struct LossConfig {
    double beta = 1.0;

    // Throws InvalidArgument unless beta is finite and > 0.
    void validate() const;
};

inline UnitQuaternion normalize(std::span<const double, 4> raw) { return UnitQuaternion::normalize(raw); }

// ||x_hat - x|| + beta * ||q_hat - q/||q|| ||, with q_hat the raw predicted
// 4-vector.
double pose_loss(const RawPose& predicted, const Pose& target, const LossConfig& config);

double translation_error(const Vec3& a, const Vec3& b) noexcept;

// Geodesic angle 2 acos(|a.b|) in degrees, within [0, 180].
double rotation_error_deg(const UnitQuaternion& a, const UnitQuaternion& b) noexcept;

// Hemisphere-align every sample to the first, average componentwise and
// renormalize. The result is returned in canonical sign. Throws
// DegenerateMean if the aligned mean has norm <= 1e-9, InvalidArgument if
// empty.
UnitQuaternion quaternion_mean(std::span<const UnitQuaternion> samples);

}  // namespace bayesreloc
