#pragma once

#include <cmath>
#include <numbers>

namespace sracp {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::hypot(x, y); }
};

struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

/// Normalizes an angle to (-pi, pi].
inline double normalize_angle(double a) {
    const double two_pi = 2.0 * std::numbers::pi;
    a = std::fmod(a, two_pi);
    if (a <= -std::numbers::pi) a += two_pi;
    if (a > std::numbers::pi) a -= two_pi;
    return a;
}

/// Planar rigid transform: rotation is normalized to (-pi, pi] on construction.
struct Pose2D {
    Vec2 translation{};
    double rotation = 0.0;

    Pose2D() = default;
    Pose2D(Vec2 t, double rot) : translation(t), rotation(normalize_angle(rot)) {}
};

/// Maps a world-frame point into the frame of `pose` (pose = frame origin in world).
inline Vec2 world_to_ego(const Vec2& point, const Pose2D& pose) {
    const Vec2 d = point - pose.translation;
    const double c = std::cos(-pose.rotation);
    const double s = std::sin(-pose.rotation);
    return {c * d.x - s * d.y, s * d.x + c * d.y};
}

/// Inverse of world_to_ego.
inline Vec2 ego_to_world(const Vec2& point, const Pose2D& pose) {
    const double c = std::cos(pose.rotation);
    const double s = std::sin(pose.rotation);
    return {c * point.x - s * point.y + pose.translation.x,
            s * point.x + c * point.y + pose.translation.y};
}

}  // namespace sracp
