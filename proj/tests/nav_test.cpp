#include <cmath>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rim/nav.hpp"

namespace rim::nav {
namespace {

using occupancy::Cell;
using occupancy::Occ;
using occupancy::TrinaryMap;

std::vector<std::uint8_t> mask(const CostMap& cm)
{
    return cm.blocked;
}

TEST(AStar, MatchesDijkstraOracleOnMazes)
{
    int solved = 0;
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        const auto m = testkit::random_maze(seed);
        const auto cm = inflate(m.map, 0.0, false);
        const auto& g = cm.geom;
        const auto ref = oracle::grid_dijkstra(mask(cm), g.width, g.height, m.start.i, m.start.j);
        const double want = ref[g.index(m.goal.i, m.goal.j)];
        const auto got = plan_path(cm, g.cell_center(m.start.i, m.start.j), g.cell_center(m.goal.i, m.goal.j));
        if (!std::isfinite(want)) {
            EXPECT_FALSE(got) << "seed " << seed;
            EXPECT_EQ(got.status, PlanStatus::Unreachable);
            continue;
        }
        ++solved;
        ASSERT_TRUE(got) << "seed " << seed;
        EXPECT_NEAR(got.path->cost, want * g.resolution, 1e-9) << "seed " << seed;
        EXPECT_NEAR(chain_cost(got.path->cells, g.resolution), got.path->cost, 1e-9);
        for (std::size_t k = 1; k < got.path->cells.size(); ++k) {
            const Cell a = got.path->cells[k - 1], b = got.path->cells[k];
            EXPECT_FALSE(cm.is_blocked(b.i, b.j));
            if (a.i != b.i && a.j != b.j) {
                EXPECT_FALSE(cm.is_blocked(b.i, a.j));
                EXPECT_FALSE(cm.is_blocked(a.i, b.j));
            }
        }
    }
    EXPECT_GT(solved, 10);
}

TEST(AStar, DijkstraFieldMatchesOracle)
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto m = testkit::random_maze(seed, 20, 0.25);
        const auto cm = inflate(m.map, 0.0, false);
        const auto df = dijkstra(cm, m.start);
        const auto ref = oracle::grid_dijkstra(mask(cm), 20, 20, m.start.i, m.start.j);
        for (std::size_t k = 0; k < ref.size(); ++k) {
            if (std::isfinite(ref[k]))
                EXPECT_NEAR(df.dist[k], ref[k] * cm.geom.resolution, 1e-9);
            else
                EXPECT_FALSE(std::isfinite(df.dist[k]));
        }
    }
}

TEST(AStar, StraightCorridor)
{
    TrinaryMap t({0.1, {0, 0}, 30, 5}, Occ::Free);
    const auto r = plan_path(t, {0.05, 0.25}, {2.95, 0.25}, 0.0);
    ASSERT_TRUE(r);
    EXPECT_NEAR(r.path->cost, 2.9, 1e-9);
}

TEST(AStar, BlockedEndpoints)
{
    TrinaryMap t({0.1, {0, 0}, 10, 10}, Occ::Free);
    t.at(9, 9) = Occ::Occupied;
    t.at(0, 0) = Occ::Occupied;
    EXPECT_EQ(plan_path(t, {0.55, 0.55}, {0.95, 0.95}, 0.0).status, PlanStatus::GoalBlocked);
    EXPECT_EQ(plan_path(t, {0.05, 0.05}, {0.55, 0.55}, 0.0).status, PlanStatus::StartBlocked);
}

TEST(AStar, UnknownOnlyInExplorationMode)
{
    TrinaryMap t({0.1, {0, 0}, 10, 3}, Occ::Free);
    for (int j = 0; j < 3; ++j) t.at(5, j) = Occ::Unknown;
    EXPECT_FALSE(plan_path(t, {0.05, 0.15}, {0.95, 0.15}, 0.0, false));
    EXPECT_TRUE(plan_path(t, {0.05, 0.15}, {0.95, 0.15}, 0.0, true));
}

TEST(Inflate, BlocksWithinRadius)
{
    TrinaryMap t({0.1, {0, 0}, 21, 21}, Occ::Free);
    t.at(10, 10) = Occ::Occupied;
    const auto cm = inflate(t, 0.3, false);
    for (int j = 0; j < 21; ++j)
        for (int i = 0; i < 21; ++i) {
            const double d = 0.1 * std::hypot(i - 10, j - 10);
            EXPECT_EQ(cm.is_blocked(i, j), d <= 0.3 + 1e-9) << i << "," << j;
        }
}

TEST(Follow, StraightCorridorReachesGoal)
{
    const auto ws = testkit::room(4.0, 1.2);
    world::Simulator sim(ws, {0.4, 0.6, 0.0}, 1);
    Path p;
    for (double x = 0.4; x <= 3.4 + 1e-9; x += 0.05) p.waypoints.push_back({x, 0.6});
    FollowParams fp;
    EXPECT_EQ(follow_path(sim, p, fp), FollowStatus::Reached);
    EXPECT_LT(distance(sim.state().position(), {3.4, 0.6}), 0.15);
}

TEST(Follow, DoorwayWithoutCollision)
{
    auto ws = testkit::room(6.0, 6.0);
    ws.walls.push_back({{0.0, 3.0}, {2.6, 3.0}});
    ws.walls.push_back({{3.4, 3.0}, {6.0, 3.0}});
    const world::RobotState start{1.0, 1.0, 0.0};
    world::Simulator sim(ws, start, 1);
    auto grid = occupancy::OccupancyGrid::covering(6.0, 6.0, 0.05, 0.5);
    for (int k = 0; k < 3; ++k) occupancy::integrate_scan(grid, start, world::raycast_lidar(ws, start));
    // Planning needs the far room known; scan it from the goal as well.
    const world::RobotState far{3.0, 5.0, 0.0};
    for (int k = 0; k < 3; ++k) occupancy::integrate_scan(grid, far, world::raycast_lidar(ws, far));
    const auto tri = occupancy::classify(grid);
    const auto plan = plan_path(tri, start.position(), {3.0, 5.0}, 0.35);
    ASSERT_TRUE(plan);
    double min_clear = 1e9;
    const auto st = follow_path(sim, *plan.path, FollowParams{}, [&](world::Simulator& s) {
        min_clear = std::min(min_clear, world::clearance(s.world(), s.state().position(), s.world().robot_radius));
        return false;
    });
    EXPECT_EQ(st, FollowStatus::Reached);
    EXPECT_GT(min_clear, 0.0);
    EXPECT_GT(sim.state().y, 4.5);
}

TEST(Frontiers, ClearanceKeepsEnclosedPockets)
{
    // Free room, walls at the edges, unknown outside; an obstacle whose far side is unseen.
    TrinaryMap t({0.05, {0, 0}, 60, 60}, Occ::Unknown);
    for (int j = 2; j < 58; ++j)
        for (int i = 2; i < 58; ++i) t.at(i, j) = Occ::Free;
    for (int j = 20; j < 30; ++j)
        for (int i = 20; i < 30; ++i) t.at(i, j) = (i == 20 || j == 20 || j == 29) ? Occ::Occupied : Occ::Unknown;
    // Frontier cells next to the map-edge unknown, along the walls, are near nothing occupied: kept.
    const auto all = occupancy::find_frontiers(t, 1);
    const auto cleared = clear_frontiers(t, 1, 0.1);
    std::size_t enclosed = 0;
    for (const auto& f : cleared)
        for (const auto& c : f.cells) enclosed += c.i >= 29 && c.i <= 31 && c.j >= 20 && c.j < 30;
    EXPECT_GT(enclosed, 0u);
    EXPECT_LE(cleared.size(), all.size() + 1);
}

TEST(Explore, EmptyRoomCoverage)
{
    const auto ws = testkit::room(6.0, 10.0);
    const auto r = testkit::explore_room(ws, {3.0, 0.8, 0.5 * kPi}, 1);
    EXPECT_TRUE(r.result.complete);
    EXPECT_GE(r.known_fraction, 0.95);
    for (std::size_t k = 1; k < r.result.known_history.size(); ++k)
        EXPECT_GE(r.result.known_history[k] + 50, r.result.known_history[k - 1]);
}

TEST(Explore, PileFootprintOccupied)
{
    const auto sc = testkit::load("experiment1.yaml");
    const auto r = testkit::explore_room(sc.world, sc.start, 1, sc.explore);
    EXPECT_TRUE(r.result.complete);
    const auto& map = r.result.map;
    for (const auto& c : sc.world.cylinders) {
        const auto edges = c.footprint().edges();
        std::size_t near = 0;
        for (std::size_t k = 0; k < map.cells.size(); ++k) {
            if (map.cells[k] != Occ::Occupied) continue;
            const auto cell = map.geom.cell_of(k);
            const Vec2 p = map.geom.cell_center(cell.i, cell.j);
            for (const auto& e : edges)
                if (point_segment_distance(p, e) <= 0.1) {
                    ++near;
                    break;
                }
        }
        // At least a metre of outline seen per cylinder.
        EXPECT_GE(near, 20u) << c.tag_id;
    }
}

}  // namespace
}  // namespace rim::nav
