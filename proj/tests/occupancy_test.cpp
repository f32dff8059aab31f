#include <algorithm>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "rim/occupancy.hpp"

namespace rim::occupancy {
namespace {

GridGeometry small_geom(int w = 20, int h = 20) { return {0.05, {0.0, 0.0}, w, h}; }

TEST(LogOdds, ZeroGridIsUnknown)
{
    OccupancyGrid g(small_geom());
    const auto t = classify(g);
    EXPECT_EQ(t.count(Occ::Unknown), g.geometry().size());
}

TEST(LogOdds, Thresholds)
{
    OccupancyGrid g(small_geom(3, 1));
    g.set_logodds(0, 0, 1.0);
    g.set_logodds(1, 0, -1.0);
    g.set_logodds(2, 0, 0.99);
    const auto t = classify(g);
    EXPECT_EQ(t.at(0, 0), Occ::Occupied);
    EXPECT_EQ(t.at(1, 0), Occ::Free);
    EXPECT_EQ(t.at(2, 0), Occ::Unknown);
}

TEST(LogOdds, AddClamps)
{
    OccupancyGrid g(small_geom(1, 1));
    for (int k = 0; k < 100; ++k) g.add(0, 0, 0.85);
    EXPECT_DOUBLE_EQ(g.logodds(0, 0), 10.0);
    for (int k = 0; k < 100; ++k) g.add(0, 0, -0.4);
    EXPECT_DOUBLE_EQ(g.logodds(0, 0), -10.0);
}

TEST(Bresenham, ChainIsConnectedAndExcludesEnd)
{
    Rng rng = make_rng(1, 0);
    std::uniform_int_distribution<int> u(-30, 30);
    for (int k = 0; k < 500; ++k) {
        const Cell a{u(rng), u(rng)}, b{u(rng), u(rng)};
        const auto cells = trace_cells(a, b);
        if (a == b) {
            EXPECT_TRUE(cells.empty());
            continue;
        }
        ASSERT_FALSE(cells.empty());
        EXPECT_EQ(cells.front(), a);
        EXPECT_EQ(static_cast<int>(cells.size()), std::max(std::abs(b.i - a.i), std::abs(b.j - a.j)));
        for (std::size_t n = 1; n < cells.size(); ++n) {
            EXPECT_LE(std::abs(cells[n].i - cells[n - 1].i), 1);
            EXPECT_LE(std::abs(cells[n].j - cells[n - 1].j), 1);
        }
        const Cell last = cells.back();
        EXPECT_LE(std::max(std::abs(b.i - last.i), std::abs(b.j - last.j)), 1);
        EXPECT_TRUE(std::find(cells.begin(), cells.end(), b) == cells.end());
    }
}

TEST(Mapping, RoomScanMatchesRasterizedRoom)
{
    auto ws = testkit::room(4.0, 3.0);
    // Half-cell offset keeps every wall off a cell boundary.
    OccupancyGrid grid(GridGeometry{0.05, {-0.525, -0.525}, 101, 81});
    const world::RobotState pose{2.0, 1.5, 0.0};
    const auto scan = world::raycast_lidar(ws, pose);
    for (int k = 0; k < 3; ++k) integrate_scan(grid, pose, scan);
    const auto got = classify(grid);
    const auto want = oracle::rasterize_room(grid.geometry(), 4.0, 3.0);
    std::size_t diff = 0;
    for (std::size_t k = 0; k < got.cells.size(); ++k) diff += got.cells[k] != want.cells[k];
    EXPECT_LE(static_cast<double>(diff), 0.02 * static_cast<double>(got.cells.size())) << diff << " cells differ";
}

TEST(Mapping, MaxRangeBeamMarksNoObstacle)
{
    world::WorldSpec ws;
    ws.field_width = 20.0;
    ws.field_height = 20.0;
    ws.lidar.beam_count = 8;
    ws.lidar.max_range = 2.0;
    auto grid = OccupancyGrid::covering(20.0, 20.0, 0.05, 0.0);
    const world::RobotState pose{10.0, 10.0, 0.0};
    integrate_scan(grid, pose, world::raycast_lidar(ws, pose));
    EXPECT_EQ(classify(grid).count(Occ::Occupied), 0u);
}

TEST(Frontiers, FullyKnownMapHasNone)
{
    TrinaryMap t(small_geom(), Occ::Free);
    t.at(3, 3) = Occ::Occupied;
    EXPECT_TRUE(find_frontiers(t, 1).empty());
}

TEST(Frontiers, HalfPlaneBoundary)
{
    TrinaryMap t(small_geom(10, 10), Occ::Unknown);
    for (int j = 0; j < 10; ++j)
        for (int i = 0; i < 5; ++i) t.at(i, j) = Occ::Free;
    const auto f = find_frontiers(t, 1);
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f[0].size(), 10u);
    for (const auto& c : f[0].cells) EXPECT_EQ(c.i, 4);
}

std::set<std::pair<int, int>> as_set(const std::vector<Cell>& cells)
{
    std::set<std::pair<int, int>> s;
    for (const auto& c : cells) s.insert({c.i, c.j});
    return s;
}

TEST(Frontiers, MatchBruteForce)
{
    for (std::uint64_t seed = 1; seed <= 50; ++seed) {
        Rng rng = make_rng(seed, 3);
        std::discrete_distribution<int> pick({5, 1, 3});
        TrinaryMap t(small_geom(25, 18));
        for (auto& c : t.cells) c = static_cast<Occ>(pick(rng));
        const std::size_t min_size = 1 + seed % 4;
        const auto got = find_frontiers(t, min_size);
        const auto want = oracle::brute_frontiers(t, min_size);
        ASSERT_EQ(got.size(), want.size()) << "seed " << seed;
        std::set<std::set<std::pair<int, int>>> a, b;
        for (const auto& f : got) {
            a.insert(as_set(f.cells));
            for (const auto& c : f.cells) EXPECT_TRUE(is_frontier_cell(t, c.i, c.j));
        }
        for (const auto& f : want) b.insert(as_set(f));
        EXPECT_EQ(a, b) << "seed " << seed;
        for (std::size_t k = 1; k < got.size(); ++k) EXPECT_GE(got[k - 1].size(), got[k].size());
    }
}

TEST(MapIo, RoundTrip)
{
    const auto dir = std::filesystem::temp_directory_path() / "rim_occ_io";
    std::filesystem::create_directories(dir);
    GridGeometry g{0.05, {-0.5, -0.25}, 17, 9};
    TrinaryMap t(g);
    Rng rng = make_rng(4, 0);
    std::uniform_int_distribution<int> u(0, 2);
    for (auto& c : t.cells) c = static_cast<Occ>(u(rng));
    save_map(t, dir / "m.pgm", dir / "m.meta");
    const auto back = load_map(dir / "m.pgm", dir / "m.meta");
    EXPECT_EQ(back, t);
}

TEST(MapIo, PgmLayout)
{
    const auto dir = std::filesystem::temp_directory_path() / "rim_occ_io";
    std::filesystem::create_directories(dir);
    GridGeometry g{0.05, {0.0, 0.0}, 2, 2};
    TrinaryMap t(g, Occ::Free);
    t.at(0, 1) = Occ::Occupied;  // top-left in the image
    t.at(1, 0) = Occ::Unknown;   // bottom-right
    save_map(t, dir / "l.pgm", dir / "l.meta");
    int w = 0, h = 0;
    const auto px = read_pgm(dir / "l.pgm", w, h);
    ASSERT_EQ(px.size(), 4u);
    EXPECT_EQ(px[0], kPgmOccupied);
    EXPECT_EQ(px[1], kPgmFree);
    EXPECT_EQ(px[2], kPgmFree);
    EXPECT_EQ(px[3], kPgmUnknown);
}

TEST(MapIo, MissingFileThrows)
{
    EXPECT_THROW(load_map("/nonexistent/x.pgm", "/nonexistent/x.meta"), MapIoError);
}

}  // namespace
}  // namespace rim::occupancy
