#include "rim/geometry.hpp"

#include <algorithm>

namespace rim {

std::optional<double> ray_segment_intersection(const Vec2& origin, const Vec2& dir,
                                               const Segment& seg)
{
    const Vec2 e = seg.b - seg.a;
    const double denom = dir.cross(e);
    if (std::abs(denom) < 1e-15) return std::nullopt;
    const Vec2 w = seg.a - origin;
    const double t = w.cross(e) / denom;
    const double u = w.cross(dir) / denom;
    if (t < 0.0 || u < -1e-12 || u > 1.0 + 1e-12) return std::nullopt;
    return t;
}

bool segment_hits(const Vec2& p0, const Vec2& p1, const Segment& seg)
{
    const Vec2 d = p1 - p0;
    auto t = ray_segment_intersection(p0, d, seg);
    return t && *t < 1.0 - 1e-9;
}

double point_segment_distance(const Vec2& p, const Segment& seg)
{
    const Vec2 e = seg.b - seg.a;
    const double len2 = e.dot(e);
    if (len2 <= 0.0) return distance(p, seg.a);
    const double t = std::clamp((p - seg.a).dot(e) / len2, 0.0, 1.0);
    return distance(p, seg.a + e * t);
}

std::array<Vec2, 4> OrientedRect::corners() const
{
    const Vec2 u = Vec2::from_angle(yaw) * (0.5 * length);
    const Vec2 v = Vec2::from_angle(yaw).perp() * (0.5 * width);
    return {center - u - v, center + u - v, center + u + v, center - u + v};
}

std::array<Segment, 4> OrientedRect::edges() const
{
    const auto c = corners();
    return {Segment{c[0], c[1]}, Segment{c[1], c[2]}, Segment{c[2], c[3]}, Segment{c[3], c[0]}};
}

bool OrientedRect::contains(const Vec2& p) const
{
    const Vec2 d = p - center;
    const Vec2 u = Vec2::from_angle(yaw);
    return std::abs(d.dot(u)) <= 0.5 * length && std::abs(d.dot(u.perp())) <= 0.5 * width;
}

double polygon_signed_area(std::span<const Vec2> poly)
{
    double s = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i)
        s += poly[i].cross(poly[(i + 1) % poly.size()]);
    return 0.5 * s;
}

double polygon_area(std::span<const Vec2> poly) { return std::abs(polygon_signed_area(poly)); }

Vec2 polygon_centroid(std::span<const Vec2> poly)
{
    if (poly.empty()) return {};
    const double a = polygon_signed_area(poly);
    if (std::abs(a) < 1e-12) {
        Vec2 m;
        for (const auto& p : poly) m += p;
        return m / static_cast<double>(poly.size());
    }
    // Shift to the first vertex to limit cancellation.
    const Vec2 o = poly[0];
    double cx = 0.0, cy = 0.0;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2 p = poly[i] - o;
        const Vec2 q = poly[(i + 1) % poly.size()] - o;
        const double c = p.cross(q);
        cx += (p.x + q.x) * c;
        cy += (p.y + q.y) * c;
    }
    return o + Vec2{cx, cy} / (6.0 * a);
}

bool convex_contains(std::span<const Vec2> poly, const Vec2& p, double eps)
{
    if (poly.size() < 3) return false;
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2& a = poly[i];
        const Vec2& b = poly[(i + 1) % poly.size()];
        if ((b - a).cross(p - a) < -eps) return false;
    }
    return true;
}

}  // namespace rim
