#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rim/encircle.hpp"
#include "rim/gridproc.hpp"
#include "rim/nav.hpp"
#include "rim/occupancy.hpp"
#include "rim/perception.hpp"
#include "rim/scenario.hpp"
#include "rim/world.hpp"

namespace rim::testkit {

/// Path of a file under the repository's scenarios/ directory.
std::string scenario_path(const std::string& file);
Scenario load(const std::string& file, const std::vector<Override>& overrides = {});

/// Closed w x h room, default sensors, no cylinders.
world::WorldSpec room(double w, double h);

struct Maze
{
    occupancy::TrinaryMap map;
    occupancy::Cell start, goal;
};
/// n x n free/occupied grid (resolution 0.05) with start and goal forced free.
Maze random_maze(std::uint64_t seed, int n = 20, double density = 0.3);

struct SyntheticMap
{
    occupancy::TrinaryMap map;
    Vec2 pile_centroid;
};
/// Walled 6 x 10 m field, unknown outside the walls, a row of five 1.2 x 0.3 m
/// footprints with 0.1 m gaps and scattered single-cell specks.
SyntheticMap fig4_map(std::uint64_t seed);

/// Random blobs plus components pinned against the image border.
gridproc::BinaryImage random_image(std::uint64_t seed, int w, int h, double density);

// --- controller runs ------------------------------------------------------------

struct SideSample
{
    double along;     ///< distance from the start of the face [m]
    double distance;  ///< ground-truth distance from the robot centre to the face [m]
};

/// Robot placed at the start of a 4 m straight face, pile on its left, driven
/// by follow_step alone until the face ends or the corner probe fires.
std::vector<SideSample> straight_side_run(const encircle::EncircleParams& p, double start_offset,
                                          double start_heading_deg, double lidar_sigma = 0.0,
                                          std::uint64_t seed = 1);

/// Five-cylinder pile from the Experiment 1 layout; the robot starts south of
/// it inside the approach distance and encircles without inspection stops.
encircle::EncircleResult lap_run(const encircle::EncircleParams& p, double laps, std::uint64_t seed = 1);

/// Same pile with a stub inspection that reports the given number of new
/// registrations at each stop (past the end: zero).
encircle::EncircleResult counter_run(const encircle::EncircleParams& p, const std::vector<int>& new_per_stop);

// --- perception -----------------------------------------------------------------

/// Vertical plane through the origin region with the given normal yaw; a
/// fraction of points replaced by uniform outliers in a 1 m cube.
world::PointCloud plane_cloud(std::uint64_t seed, const Eigen::Vector3d& normal, double offset, int points,
                              double inlier_fraction, double sigma);

/// Angle between two axes (sign ignored) in degrees.
double normal_error_deg(const Eigen::Vector3d& a, const Eigen::Vector3d& b);

// --- exploration ----------------------------------------------------------------

struct CoverageResult
{
    double known_fraction;  ///< of in-field cells
    nav::ExploreResult result;
};
CoverageResult explore_room(const world::WorldSpec& world, const world::RobotState& start, std::uint64_t seed,
                            const nav::ExploreParams& ep = {});

/// Cells whose centre lies strictly inside [0,w] x [0,h].
std::size_t in_field_cells(const occupancy::GridGeometry& g, double w, double h);

}  // namespace rim::testkit
