#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "rim/events.hpp"
#include "rim/occupancy.hpp"
#include "rim/world.hpp"

namespace rim::nav {

struct Path
{
    std::vector<Vec2> waypoints;  ///< cell centres, start first
    std::vector<occupancy::Cell> cells;
    double cost{0.0};             ///< [m]
};

/// Traversability raster: occupied cells grown by the inflation radius.
struct CostMap
{
    occupancy::GridGeometry geom;
    std::vector<std::uint8_t> blocked;

    bool is_blocked(int i, int j) const { return !geom.in_bounds(i, j) || blocked[geom.index(i, j)] != 0; }
};

/// Cells within inflate_radius (centre to centre) of an occupied cell are
/// blocked; unknown cells are blocked unless allow_unknown.
CostMap inflate(const occupancy::TrinaryMap& tri, double inflate_radius, bool allow_unknown);

enum class PlanStatus { Ok, StartBlocked, GoalBlocked, Unreachable };

struct PlanResult
{
    PlanStatus status{PlanStatus::Unreachable};
    std::optional<Path> path;
    explicit operator bool() const { return path.has_value(); }
};

/// A* over the 8-connected grid (no corner cutting) with an octile heuristic.
PlanResult plan_path(const CostMap& cm, const Vec2& start, const Vec2& goal);
PlanResult plan_path(const occupancy::TrinaryMap& tri, const Vec2& start, const Vec2& goal,
                     double inflate_radius, bool allow_unknown = false);

/// Cost of an 8-connected cell chain: (straight + sqrt(2) * diagonal) * resolution.
double chain_cost(const std::vector<occupancy::Cell>& cells, double resolution);

/// Single-source shortest path costs over the cost map (infinity where unreachable).
struct DistanceField
{
    std::vector<double> dist;
    std::vector<std::int64_t> parent;
    double at(const occupancy::GridGeometry& g, int i, int j) const { return dist[g.index(i, j)]; }
};
DistanceField dijkstra(const CostMap& cm, occupancy::Cell start);
std::optional<Path> extract_path(const CostMap& cm, const DistanceField& df, occupancy::Cell goal);

/// Nearest unblocked cell reachable over non-occupied cells, for a robot that
/// sits inside the inflation band.
std::optional<occupancy::Cell> escape_cell(const CostMap& cm, const occupancy::TrinaryMap& tri,
                                           occupancy::Cell from);

/// A* from a pose that may sit inside the inflation band: escapes to the
/// nearest unblocked cell first and keeps the pose as the first waypoint.
PlanResult plan_from_pose(const occupancy::TrinaryMap& tri, const CostMap& cm, const Vec2& start,
                          const Vec2& goal);

struct FollowParams
{
    double dt{0.1};
    double lookahead{0.35};
    double v_max{0.5};
    double omega_max{1.2};
    double rotate_threshold{deg2rad(50.0)};
    double goal_tolerance{0.15};
    double stuck_time{5.0};
    double progress_eps{0.05};
    double timeout{180.0};
};

enum class FollowStatus { Reached, Stuck, Aborted, Timeout };

/// Called after every control tick; returning true stops the follower.
using TickHook = std::function<bool(world::Simulator&)>;

/// Pure-pursuit tracking of a path in the simulator.
FollowStatus follow_path(world::Simulator& sim, const Path& path, const FollowParams& params,
                         const TickHook& on_tick = {});

/// Rotates in place to an absolute heading.
void rotate_to(world::Simulator& sim, double heading, const FollowParams& params,
               const TickHook& on_tick = {});

struct MappingParams
{
    occupancy::LogOddsParams logodds;
    double resolution{0.05};
    double margin{0.5};
    double pose_noise_xy{0.0};      ///< per-scan pose perturbation used by mapping [m]
    double pose_noise_theta{0.0};   ///< [rad]
};

/// Integrates one scan at the (optionally perturbed) robot pose.
void integrate_current_scan(world::Simulator& sim, occupancy::OccupancyGrid& grid,
                            const MappingParams& mp);

struct ExploreParams
{
    std::size_t min_frontier{5};
    double frontier_clearance{0.1};  ///< frontier cells this close to an occupied cell are ignored [m]
    double inflate_radius{0.4};
    double scan_period{0.2};
    double replan_period{4.0};
    double reach_radius{1.5};       ///< max distance from a frontier centroid to an approach cell
    double blacklist_radius{0.5};
    int max_goal_repeats{5};        ///< consecutive legs toward one frontier before it is dropped
    int max_iterations{200};
    double max_time{900.0};
    int initial_scans{3};
    FollowParams follow;
};

struct ExploreResult
{
    occupancy::TrinaryMap map;
    bool complete{false};
    int iterations{0};
    std::vector<std::size_t> known_history;
    double distance{0.0};
};

/// Frontiers of the map after dropping candidate cells within `clearance` of an
/// occupied cell (noisy wall edges).
std::vector<occupancy::Frontier> clear_frontiers(const occupancy::TrinaryMap& tri, std::size_t min_size,
                                                 double clearance);

ExploreResult explore(world::Simulator& sim, occupancy::OccupancyGrid& grid,
                      const ExploreParams& params, const MappingParams& mapping,
                      EventLog* log = nullptr);

}  // namespace rim::nav
