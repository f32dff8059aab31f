#include "fixtures.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Geometry>

#ifndef RIM_SCENARIO_DIR
#error "RIM_SCENARIO_DIR must point at scenarios/"
#endif

namespace rim::testkit {

using occupancy::Cell;
using occupancy::GridGeometry;
using occupancy::Occ;
using occupancy::TrinaryMap;

std::string scenario_path(const std::string& file) { return std::string(RIM_SCENARIO_DIR) + "/" + file; }

Scenario load(const std::string& file, const std::vector<Override>& overrides)
{
    return load_scenario(scenario_path(file), overrides);
}

world::WorldSpec room(double w, double h)
{
    world::WorldSpec ws;
    ws.field_width = w;
    ws.field_height = h;
    ws.walls = world::WorldSpec::boundary_walls(w, h);
    return ws;
}

Maze random_maze(std::uint64_t seed, int n, double density)
{
    Rng rng = make_rng(seed, 77);
    std::bernoulli_distribution wall(density);
    GridGeometry g{0.05, {0.0, 0.0}, n, n};
    Maze m{TrinaryMap(g, Occ::Free), {0, 0}, {n - 1, n - 1}};
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            if (wall(rng)) m.map.at(i, j) = Occ::Occupied;
    m.map.at(m.start.i, m.start.j) = Occ::Free;
    m.map.at(m.goal.i, m.goal.j) = Occ::Free;
    return m;
}

SyntheticMap fig4_map(std::uint64_t seed)
{
    const double res = 0.05, margin = 0.5;
    GridGeometry g{res, {-margin, -margin}, static_cast<int>((6.0 + 2 * margin) / res),
                   static_cast<int>((10.0 + 2 * margin) / res)};
    SyntheticMap s{TrinaryMap(g, Occ::Unknown), {3.0, 5.0}};
    for (int j = 0; j < g.height; ++j)
        for (int i = 0; i < g.width; ++i) {
            const Vec2 c = g.cell_center(i, j);
            const bool inside = c.x > 0.0 && c.x < 6.0 && c.y > 0.0 && c.y < 10.0;
            const bool wall = c.x > -res && c.x < 6.0 + res && c.y > -res && c.y < 10.0 + res && !inside;
            if (inside) s.map.at(i, j) = Occ::Free;
            if (wall || (inside && (c.x < res || c.x > 6.0 - res || c.y < res || c.y > 10.0 - res)))
                s.map.at(i, j) = Occ::Occupied;
        }
    // Five footprints: only the outline is seen by a lidar, the inside stays unknown.
    for (int k = 0; k < 5; ++k) {
        const OrientedRect r{{2.2 + 0.4 * k, 5.0}, 0.5 * kPi, 1.2, 0.3};
        for (int j = 0; j < g.height; ++j)
            for (int i = 0; i < g.width; ++i) {
                const Vec2 c = g.cell_center(i, j);
                const OrientedRect outer{r.center, r.yaw, r.length + res, r.width + res};
                const OrientedRect inner{r.center, r.yaw, r.length - 2 * res, r.width - 2 * res};
                if (outer.contains(c)) s.map.at(i, j) = inner.contains(c) ? Occ::Unknown : Occ::Occupied;
            }
    }
    Rng rng = make_rng(seed, 78);
    std::uniform_real_distribution<double> ux(0.5, 5.5), uy(0.5, 9.5);
    for (int k = 0; k < 25; ++k) {
        const Vec2 p{ux(rng), uy(rng)};
        if (distance(p, s.pile_centroid) < 1.6) continue;
        const Cell c = g.world_to_cell(p);
        s.map.at(c.i, c.j) = Occ::Occupied;
    }
    return s;
}

gridproc::BinaryImage random_image(std::uint64_t seed, int w, int h, double density)
{
    Rng rng = make_rng(seed, 79);
    std::bernoulli_distribution on(density);
    std::uniform_int_distribution<int> ui(0, w - 1), uj(0, h - 1), ur(0, 2);
    gridproc::BinaryImage img(w, h);
    for (int j = 0; j < h; ++j)
        for (int i = 0; i < w; ++i) img.set(i, j, on(rng));
    for (int k = 0; k < 6; ++k) {
        const int ci = ui(rng), cj = uj(rng), r = ur(rng);
        for (int j = cj - r; j <= cj + r; ++j)
            for (int i = ci - r; i <= ci + r; ++i)
                if (img.in_bounds(i, j)) img.set(i, j, true);
    }
    return img;
}

std::vector<SideSample> straight_side_run(const encircle::EncircleParams& p, double start_offset,
                                          double start_heading_deg, double lidar_sigma, std::uint64_t seed)
{
    // Face y = 4.0 between x = 3 and x = 7; the body lies above it.
    world::WorldSpec ws = room(10.0, 8.0);
    world::CylinderTruth body;
    body.center = {5.0, 4.5};
    body.yaw = 0.0;
    body.length = 4.0;
    body.diameter = 1.0;
    body.tag_id = "BODY";
    ws.cylinders.push_back(body);
    ws.lidar.range_noise_sigma = lidar_sigma;

    world::RobotState start;
    start.x = 3.0;
    start.y = 4.0 - p.gamma - start_offset;
    start.theta = deg2rad(start_heading_deg);
    world::Simulator sim(ws, start, seed);

    encircle::EncircleState st;
    st.phase = encircle::Phase::Follow;
    st.side = encircle::Side::Left;
    std::vector<SideSample> out;
    for (int k = 0; k < 2000; ++k) {
        const auto scan = sim.scan();
        const auto cmd = encircle::follow_step(scan, p, st);
        if (st.phase == encircle::Phase::CornerTurn) break;
        sim.step(cmd, p.dt);
        const auto& s = sim.state();
        if (s.x > 7.0) break;
        out.push_back({s.x - 3.0, 4.0 - s.y});
    }
    return out;
}

namespace {

world::Simulator pile_sim(std::uint64_t seed)
{
    const Scenario sc = load("experiment1.yaml");
    world::RobotState start;
    start.x = 3.0;
    start.y = 3.3;
    start.theta = 0.5 * kPi;
    return world::Simulator(sc.world, start, seed);
}

const encircle::Target kPile{{3.0, 5.0}, 1.3};

}  // namespace

encircle::EncircleResult lap_run(const encircle::EncircleParams& p, double laps, std::uint64_t seed)
{
    auto sim = pile_sim(seed);
    auto q = p;
    q.inspect_period = 1e9;
    q.quit_after_turns = 1000000;
    q.max_laps = laps;
    return encircle::encircle_here(sim, kPile, q, {});
}

encircle::EncircleResult counter_run(const encircle::EncircleParams& p, const std::vector<int>& new_per_stop)
{
    auto sim = pile_sim(1);
    std::size_t stop = 0;
    encircle::InspectFn fn = [&](world::Simulator&) {
        return stop < new_per_stop.size() ? new_per_stop[stop++] : (++stop, 0);
    };
    return encircle::encircle_here(sim, kPile, p, fn);
}

world::PointCloud plane_cloud(std::uint64_t seed, const Eigen::Vector3d& normal, double offset, int points,
                              double inlier_fraction, double sigma)
{
    Rng rng = make_rng(seed, 80);
    std::uniform_real_distribution<double> u(-0.25, 0.25), cube(-0.5, 0.5), unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, sigma);
    const Eigen::Vector3d n = normal.normalized();
    const Eigen::Vector3d e1 = n.unitOrthogonal();
    const Eigen::Vector3d e2 = n.cross(e1);
    const Eigen::Vector3d p0 = -offset * n;
    world::PointCloud cloud;
    for (int k = 0; k < points; ++k) {
        if (unit(rng) < inlier_fraction)
            cloud.push_back(p0 + u(rng) * e1 + u(rng) * e2 + (sigma > 0.0 ? noise(rng) : 0.0) * n);
        else
            cloud.push_back(p0 + Eigen::Vector3d(cube(rng), cube(rng), cube(rng)));
    }
    return cloud;
}

double normal_error_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b)
{
    const double c = std::clamp(std::abs(a.normalized().dot(b.normalized())), 0.0, 1.0);
    return rad2deg(std::acos(c));
}

std::size_t in_field_cells(const GridGeometry& g, double w, double h)
{
    std::size_t n = 0;
    for (int j = 0; j < g.height; ++j)
        for (int i = 0; i < g.width; ++i) {
            const Vec2 c = g.cell_center(i, j);
            if (c.x > 0.0 && c.x < w && c.y > 0.0 && c.y < h) ++n;
        }
    return n;
}

CoverageResult explore_room(const world::WorldSpec& ws, const world::RobotState& start, std::uint64_t seed,
                            const nav::ExploreParams& ep)
{
    world::Simulator sim(ws, start, seed);
    nav::MappingParams mp;
    auto grid = occupancy::OccupancyGrid::covering(ws.field_width, ws.field_height, mp.resolution, mp.margin,
                                                   mp.logodds);
    CoverageResult r{0.0, nav::explore(sim, grid, ep, mp)};
    const auto& g = r.result.map.geom;
    std::size_t known = 0;
    for (int j = 0; j < g.height; ++j)
        for (int i = 0; i < g.width; ++i) {
            const Vec2 c = g.cell_center(i, j);
            if (c.x > 0.0 && c.x < ws.field_width && c.y > 0.0 && c.y < ws.field_height &&
                r.result.map.at(i, j) != Occ::Unknown)
                ++known;
        }
    r.known_fraction = static_cast<double>(known) / static_cast<double>(in_field_cells(g, ws.field_width, ws.field_height));
    return r;
}

}  // namespace rim::testkit
