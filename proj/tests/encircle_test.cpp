#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "rim/encircle.hpp"

namespace rim::encircle {
namespace {

world::Scan scan_of(const world::WorldSpec& ws, const world::RobotState& pose, std::uint64_t seed = 0)
{
    if (seed == 0) return world::raycast_lidar(ws, pose);
    Rng rng = make_rng(seed, 1);
    return world::raycast_lidar(ws, pose, &rng);
}

world::WorldSpec box_world(Vec2 center, double w, double h)
{
    auto ws = testkit::room(10.0, 10.0);
    world::CylinderTruth c;
    c.center = center;
    c.length = w;
    c.diameter = h;
    c.tag_id = "box";
    ws.cylinders.push_back(c);
    return ws;
}

TEST(Params, Validation)
{
    EncircleParams p;
    EXPECT_NO_THROW(p.validate());
    p.gamma = 1.6;
    EXPECT_THROW(p.validate(), std::invalid_argument);
    p = {};
    p.gamma = 0.0;
    EXPECT_THROW(p.validate(), std::invalid_argument);
}

TEST(Approach, TriggerAtBeta)
{
    const EncircleParams p;
    const auto ws = box_world({5.0, 5.0}, 1.2, 0.3);
    // Face at y = 4.85; robot facing +y.
    EXPECT_TRUE(approach_triggered(scan_of(ws, {5.0, 4.85 - 1.4, 0.5 * kPi}), p));
    EXPECT_FALSE(approach_triggered(scan_of(ws, {5.0, 4.85 - 1.6, 0.5 * kPi}), p));
    // Behind the robot does not count.
    EXPECT_FALSE(approach_triggered(scan_of(ws, {5.0, 4.85 - 1.0, -0.5 * kPi}), p));
}

TEST(AssignSide, PileOnLeftGivesLeft)
{
    // Obstacle ahead-left of the robot.
    const auto ws = box_world({4.2, 6.0}, 1.2, 1.2);
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto noisy = ws;
        noisy.lidar.range_noise_sigma = 0.01;
        const auto s = assign_side(scan_of(noisy, {5.0, 4.6, 0.5 * kPi}, seed));
        ASSERT_TRUE(s);
        EXPECT_EQ(*s, Side::Left) << "seed " << seed;
    }
    const auto r = assign_side(scan_of(box_world({5.8, 6.0}, 1.2, 1.2), {5.0, 4.6, 0.5 * kPi}));
    ASSERT_TRUE(r);
    EXPECT_EQ(*r, Side::Right);
}

TEST(SideWall, FitRecoversAngleAndDistance)
{
    auto ws = testkit::room(10.0, 10.0);
    ws.walls.push_back({{0.0, 6.0}, {10.0, 6.0}});
    for (double deg : {-10.0, 0.0, 7.0}) {
        const world::RobotState pose{5.0, 5.2, deg2rad(deg)};
        const auto w = fit_side_wall(scan_of(ws, pose), Side::Left, EncircleParams{});
        ASSERT_TRUE(w);
        EXPECT_NEAR(w->distance, 0.8, 1e-6);
        EXPECT_NEAR(rad2deg(w->angle), -deg, 1e-6);
    }
}

TEST(Follow, StraightSideHoldsGamma)
{
    EncircleParams p;
    p.kd = 3.5;
    for (double off : {-0.2, 0.0, 0.2}) {
        const auto run = testkit::straight_side_run(p, off, 0.0);
        ASSERT_GT(run.size(), 20u);
        const double total = run.back().along;
        for (const auto& s : run)
            if (s.along >= 0.2 * total) EXPECT_LE(std::abs(s.distance - p.gamma), 0.1) << off << " at " << s.along;
    }
}

TEST(Follow, StraightSideDefaultGainsWithNoise)
{
    // The default gains settle too; noisy ranges keep it inside the band.
    EncircleParams p;
    const auto run = testkit::straight_side_run(p, 0.1, 5.0, 0.01, 3);
    ASSERT_GT(run.size(), 20u);
    const double total = run.back().along;
    for (const auto& s : run)
        if (s.along >= 0.2 * total) EXPECT_LE(std::abs(s.distance - p.gamma), 0.1) << s.along;
}

TEST(Follow, FourCornersPerLap)
{
    EncircleParams p;
    p.kd = 3.5;
    const auto r = testkit::lap_run(p, 1.0);
    EXPECT_EQ(r.outcome, Outcome::LapLimit);
    EXPECT_EQ(r.corner_turns, 4);
}

TEST(Follow, TwoLapsTurnFourPi)
{
    EncircleParams p;
    p.kd = 3.5;
    const auto r = testkit::lap_run(p, 2.0);
    EXPECT_EQ(r.outcome, Outcome::LapLimit);
    EXPECT_NEAR(std::abs(r.follow_heading_change), 4.0 * kPi, deg2rad(10.0));
    EXPECT_EQ(r.corner_turns, 8);
}

TEST(Termination, CounterLogic)
{
    EncircleParams p;
    EncircleState st;
    for (int k = 0; k < 7; ++k) record_inspection(st, 0);
    EXPECT_FALSE(check_termination(st, p));
    record_inspection(st, 2);
    EXPECT_EQ(st.turns_without_new, 0);
    for (int k = 0; k < 8; ++k) record_inspection(st, 0);
    EXPECT_TRUE(check_termination(st, p));
}

TEST(Termination, EightEmptyStopsEndTheRun)
{
    EncircleParams p;
    p.kd = 3.5;
    const auto r = testkit::counter_run(p, {});
    EXPECT_EQ(r.outcome, Outcome::Completed);
    EXPECT_EQ(r.inspections, 8);
    const auto r2 = testkit::counter_run(p, {1, 0, 1});
    EXPECT_EQ(r2.outcome, Outcome::Completed);
    EXPECT_EQ(r2.inspections, 11);
    EXPECT_EQ(r2.registrations, 2);
}

TEST(PhaseGraph, RunsUseAllowedEdgesOnly)
{
    EncircleParams p;
    p.kd = 3.5;
    for (const auto& r : {testkit::lap_run(p, 1.0), testkit::counter_run(p, {1})}) {
        ASSERT_FALSE(r.transitions.empty());
        std::set<Phase> seen;
        for (const auto& [a, b] : r.transitions) {
            EXPECT_TRUE(transition_allowed(a, b)) << to_string(a) << " -> " << to_string(b);
            seen.insert(b);
        }
        EXPECT_TRUE(seen.count(Phase::Follow));
        EXPECT_TRUE(seen.count(Phase::CornerTurn));
    }
    EXPECT_FALSE(transition_allowed(Phase::Done, Phase::Follow));
    EXPECT_FALSE(transition_allowed(Phase::Approach, Phase::Follow));
    EXPECT_TRUE(transition_allowed(Phase::Follow, Phase::Inspect));
    EXPECT_TRUE(transition_allowed(Phase::Inspect, Phase::Follow));
}

TEST(Inspection, EveryPlateSeenOnFullRun)
{
    const auto sc = testkit::load("experiment1.yaml");
    world::Simulator sim(sc.world, {3.0, 3.3, 0.5 * kPi}, 1);
    std::set<std::string> seen;
    const auto r = encircle_here(sim, {{3.0, 5.0}, 1.3}, sc.encircle, [&](world::Simulator& s) {
        int fresh = 0;
        for (const auto& d : s.detect()) fresh += seen.insert(d.tag_id).second;
        return fresh;
    });
    EXPECT_EQ(r.outcome, Outcome::Completed);
    EXPECT_EQ(seen.size(), sc.world.cylinders.size());
}

TEST(Follow, ClearanceStaysAboveGammaMinusMargin)
{
    // Zero noise, convex pile: the robot never comes closer than gamma - 0.2.
    const auto sc = testkit::load("experiment1.yaml");
    for (double kd : {0.5, sc.encircle.kd}) {
        auto p = sc.encircle;
        p.kd = kd;
        world::Simulator sim(sc.world, {3.0, 3.3, 0.5 * kPi}, 1);
        double worst = 1e9;
        const auto r = encircle_here(sim, {{3.0, 5.0}, 1.3}, p, [](world::Simulator&) { return 0; }, nullptr,
                                     [&](world::Simulator& s) {
                                         double c = 1e9;
                                         for (const auto& cyl : s.world().cylinders)
                                             for (const auto& e : cyl.footprint().edges())
                                                 c = std::min(c, point_segment_distance(s.state().position(), e));
                                         worst = std::min(worst, c);
                                         return false;
                                     });
        EXPECT_EQ(r.outcome, Outcome::Completed) << "kd " << kd;
        EXPECT_GE(worst, p.gamma - 0.2) << "kd " << kd;
    }
}

TEST(MaskScan, DropsFarHits)
{
    auto ws = box_world({5.0, 5.0}, 1.2, 0.3);
    const world::RobotState pose{5.0, 4.0, 0.5 * kPi};
    auto scan = scan_of(ws, pose);
    mask_scan(scan, pose, {{5.0, 5.0}, 0.7}, 0.5);
    for (std::size_t k = 0; k < scan.ranges.size(); ++k) {
        if (scan.ranges[k] >= scan.max_range) continue;
        const double a = pose.theta + scan.angle(k);
        const Vec2 hit = pose.position() + Vec2::from_angle(a) * scan.ranges[k];
        EXPECT_LE(distance(hit, {5.0, 5.0}), 1.2 + 1e-9);
    }
}

}  // namespace
}  // namespace rim::encircle
