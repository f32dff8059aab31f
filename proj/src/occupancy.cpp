#include "rim/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace rim::occupancy {

Cell GridGeometry::world_to_cell(const Vec2& p) const
{
    return {static_cast<int>(std::floor((p.x - origin.x) / resolution)),
            static_cast<int>(std::floor((p.y - origin.y) / resolution))};
}

Vec2 GridGeometry::cell_center(int i, int j) const
{
    return {origin.x + (i + 0.5) * resolution, origin.y + (j + 0.5) * resolution};
}

std::size_t TrinaryMap::count(Occ v) const
{
    return static_cast<std::size_t>(std::count(cells.begin(), cells.end(), v));
}

OccupancyGrid::OccupancyGrid(const GridGeometry& geom, const LogOddsParams& params)
    : geom_(geom), params_(params), logodds_(geom.size(), 0.0)
{
    if (!(geom.resolution > 0.0) || geom.width <= 0 || geom.height <= 0)
        throw std::invalid_argument("occupancy grid needs a positive resolution and size");
    if (!(params.t_free < 0.0 && params.t_occ > 0.0))
        throw std::invalid_argument("occupancy thresholds must satisfy t_free < 0 < t_occ");
}

OccupancyGrid OccupancyGrid::covering(double width, double height, double resolution,
                                      double margin, const LogOddsParams& params)
{
    GridGeometry g;
    g.resolution = resolution;
    g.origin = {-margin, -margin};
    g.width = static_cast<int>(std::ceil((width + 2.0 * margin) / resolution - 1e-9));
    g.height = static_cast<int>(std::ceil((height + 2.0 * margin) / resolution - 1e-9));
    return OccupancyGrid(g, params);
}

void OccupancyGrid::set_logodds(int i, int j, double v)
{
    logodds_[geom_.index(i, j)] = std::clamp(v, params_.l_min, params_.l_max);
}

void OccupancyGrid::add(int i, int j, double delta)
{
    double& l = logodds_[geom_.index(i, j)];
    l = std::clamp(l + delta, params_.l_min, params_.l_max);
}

std::vector<Cell> trace_cells(Cell a, Cell b)
{
    std::vector<Cell> out;
    int x = a.i, y = a.j;
    const int dx = std::abs(b.i - a.i), dy = -std::abs(b.j - a.j);
    const int sx = a.i < b.i ? 1 : -1, sy = a.j < b.j ? 1 : -1;
    int err = dx + dy;
    while (!(x == b.i && y == b.j)) {
        out.push_back({x, y});
        const int e2 = 2 * err;
        if (e2 >= dy) { err += dy; x += sx; }
        if (e2 <= dx) { err += dx; y += sy; }
    }
    return out;
}

void integrate_scan(OccupancyGrid& grid, const world::RobotState& pose, const world::Scan& scan)
{
    const GridGeometry& g = grid.geometry();
    const Vec2 origin = pose.position();
    const Cell start = g.world_to_cell(origin);
    if (!g.in_bounds(start.i, start.j)) return;
    const auto& P = grid.params();
    for (std::size_t k = 0; k < scan.ranges.size(); ++k) {
        const double r = scan.ranges[k];
        const bool hit = r < scan.max_range;
        const Vec2 end = origin + Vec2::from_angle(pose.theta + scan.angle(k)) * r;
        const Cell ec = g.world_to_cell(end);
        for (const Cell& c : trace_cells(start, ec)) {
            if (!g.in_bounds(c.i, c.j)) break;
            grid.add(c.i, c.j, P.l_free);
        }
        if (hit && g.in_bounds(ec.i, ec.j)) grid.add(ec.i, ec.j, P.l_occ);
    }
}

TrinaryMap classify(const OccupancyGrid& grid)
{
    const GridGeometry& g = grid.geometry();
    const auto& P = grid.params();
    TrinaryMap tri(g);
    for (int j = 0; j < g.height; ++j)
        for (int i = 0; i < g.width; ++i) {
            const double l = grid.logodds(i, j);
            tri.at(i, j) = l >= P.t_occ ? Occ::Occupied : (l <= P.t_free ? Occ::Free : Occ::Unknown);
        }
    return tri;
}

bool is_frontier_cell(const TrinaryMap& tri, int i, int j)
{
    if (tri.at(i, j) != Occ::Free) return false;
    for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) {
            if (di == 0 && dj == 0) continue;
            const int ni = i + di, nj = j + dj;
            if (tri.geom.in_bounds(ni, nj) && tri.at(ni, nj) == Occ::Unknown) return true;
        }
    return false;
}

std::vector<Frontier> find_frontiers(const TrinaryMap& tri, std::size_t min_size)
{
    const GridGeometry& g = tri.geom;
    std::vector<std::uint8_t> is_f(g.size(), 0), seen(g.size(), 0);
    for (int j = 0; j < g.height; ++j)
        for (int i = 0; i < g.width; ++i) is_f[g.index(i, j)] = is_frontier_cell(tri, i, j);

    std::vector<Frontier> out;
    std::deque<Cell> queue;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        if (!is_f[idx] || seen[idx]) continue;
        Frontier f;
        seen[idx] = 1;
        queue.push_back(g.cell_of(idx));
        while (!queue.empty()) {
            const Cell c = queue.front();
            queue.pop_front();
            f.cells.push_back(c);
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di) {
                    const int ni = c.i + di, nj = c.j + dj;
                    if (!g.in_bounds(ni, nj)) continue;
                    const std::size_t n = g.index(ni, nj);
                    if (is_f[n] && !seen[n]) {
                        seen[n] = 1;
                        queue.push_back({ni, nj});
                    }
                }
        }
        if (f.cells.size() < min_size) continue;
        Vec2 sum;
        for (const Cell& c : f.cells) sum += g.cell_center(c.i, c.j);
        f.centroid = sum / static_cast<double>(f.cells.size());
        out.push_back(std::move(f));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Frontier& a, const Frontier& b) { return a.size() > b.size(); });
    return out;
}

std::size_t known_count(const TrinaryMap& tri) { return tri.cells.size() - tri.count(Occ::Unknown); }

}  // namespace rim::occupancy
