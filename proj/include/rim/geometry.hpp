#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

namespace rim {

constexpr double kPi = std::numbers::pi;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Wraps an angle into (-pi, pi].
inline double normalize_angle(double a)
{
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    else if (a > kPi) a -= 2.0 * kPi;
    return a;
}

/// Smallest difference between two undirected axes, in [0, pi/2].
inline double axis_difference(double a, double b)
{
    double d = std::fmod(std::abs(a - b), kPi);
    return std::min(d, kPi - d);
}

struct Vec2
{
    double x{0.0};
    double y{0.0};

    Vec2() = default;
    constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
    Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    bool operator==(const Vec2&) const = default;

    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double cross(const Vec2& o) const { return x * o.y - y * o.x; }
    double norm() const { return std::hypot(x, y); }
    Vec2 normalized() const { double n = norm(); return n > 0.0 ? *this / n : Vec2{}; }
    Vec2 perp() const { return {-y, x}; }

    static Vec2 from_angle(double a) { return {std::cos(a), std::sin(a)}; }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

struct Segment
{
    Vec2 a;
    Vec2 b;
};

/// Parameter t >= 0 along the ray origin + t*dir (dir need not be unit) at which
/// it crosses the segment, if it does.
std::optional<double> ray_segment_intersection(const Vec2& origin, const Vec2& dir,
                                               const Segment& seg);

/// True iff the open segments p0-p1 and the given segment share a point.
/// Touching exactly at p1 is ignored (t < 1 - eps).
bool segment_hits(const Vec2& p0, const Vec2& p1, const Segment& seg);

double point_segment_distance(const Vec2& p, const Segment& seg);

/// Oriented rectangle: centre, heading of the long side, full extents.
struct OrientedRect
{
    Vec2 center;
    double yaw{0.0};
    double length{0.0};  ///< along yaw
    double width{0.0};   ///< across yaw

    std::array<Vec2, 4> corners() const;
    std::array<Segment, 4> edges() const;
    bool contains(const Vec2& p) const;
};

/// Signed shoelace area (positive for counter-clockwise order).
double polygon_signed_area(std::span<const Vec2> poly);
double polygon_area(std::span<const Vec2> poly);
/// Area-weighted centroid; falls back to the vertex mean for degenerate polygons.
Vec2 polygon_centroid(std::span<const Vec2> poly);
/// Point-in-convex-polygon test (boundary counts as inside). Expects CCW order.
bool convex_contains(std::span<const Vec2> poly, const Vec2& p, double eps = 1e-9);

}  // namespace rim
