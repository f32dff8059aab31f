#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rim/events.hpp"
#include "rim/gridproc.hpp"
#include "rim/nav.hpp"

namespace rim::encircle {

struct EncircleParams
{
    double beta{1.5};               ///< approach trigger distance [m]
    double gamma{0.8};              ///< side-follow distance [m]
    double kp{2.0};
    double kd{0.5};
    double v_follow{0.3};
    double inspect_period{1.0};     ///< simulated Follow time between stops [s]
    int quit_after_turns{8};
    double corner_jump{0.7};

    double dt{0.1};
    double omega_max{1.0};
    double side_sector_half{deg2rad(30.0)};
    double forward_sector_half{deg2rad(30.0)};
    double probe_half{deg2rad(8.0)};    ///< corner probe window around the side perpendicular
    double probe_quantile{0.25};        ///< probe reading: this quantile of the window ranges
    double corner_advance{0.8};     ///< travel past the lost side before turning [m]
    double safety_stop{0.45};       ///< forward range that halts translation [m]
    double derivative_filter{0.0};  ///< low-pass weight kept from the previous derivative, [0,1)
    double lost_distance{3.0};      ///< travel without any side reading before giving up [m]
    double approach_inflate{0.4};
    double mask_margin{0.5};        ///< scan hits farther than region radius + margin are ignored
    double max_time{900.0};         ///< per region [s]
    double max_laps{0.0};           ///< stop after this many laps, 0 = unlimited

    /// Throws std::invalid_argument unless beta > gamma > 0 and the rest are sane.
    void validate() const;
};

enum class Phase { Approach, AssignSide, Follow, CornerTurn, Inspect, Done };
enum class Side { Unassigned, Left, Right };

std::string to_string(Phase p);
std::string to_string(Side s);

struct EncircleState
{
    Phase phase{Phase::Approach};
    Side side{Side::Unassigned};
    int turns_without_new{0};
    double laps_completed{0.0};

    double e_prev{0.0};
    double de_prev{0.0};
    bool have_e_prev{false};
    bool probe_armed{false};
};

/// Minimum range over the forward sector is below beta.
bool approach_triggered(const world::Scan& scan, const EncircleParams& p);

/// Smaller mean range of the forward-left vs forward-right quarter wins, ties go
/// right. Empty when both quarters see nothing.
std::optional<Side> assign_side(const world::Scan& scan);

/// Smallest lateral offset (range times |sin bearing|) of the returns within
/// +-side_sector_half of the perpendicular on the given side; max range if none.
double side_distance(const world::Scan& scan, Side side, const EncircleParams& p);

struct SideWall
{
    double distance{0.0};
    /// Direction of the fitted face in the robot frame, wrapped to (-pi/2, pi/2].
    double angle{0.0};
    int points{0};
};

/// Line fit to the side-sector returns lying within `band` of the nearest one.
/// Empty with fewer than 5 such returns.
std::optional<SideWall> fit_side_wall(const world::Scan& scan, Side side, const EncircleParams& p,
                                      double band = 0.15);

/// PD step on the side distance. The derivative comes from the fitted face
/// angle when a fit exists, else from differencing. Moves the state to CornerTurn when the
/// perpendicular probe loses the pile.
world::Command follow_step(const world::Scan& scan, const EncircleParams& p, EncircleState& st);

/// Counter update after an inspection stop.
void record_inspection(EncircleState& st, int new_registrations);

bool check_termination(const EncircleState& st, const EncircleParams& p);

/// Allowed edges of the phase graph.
bool transition_allowed(Phase from, Phase to);

struct Target
{
    Vec2 centroid;
    double radius{0.0};  ///< extent of the pile around the centroid, 0 disables scan masking
};

Target target_from_region(const gridproc::RegionOfInterest& roi, const occupancy::GridGeometry& geom);

/// Hits whose endpoint lies farther than radius + margin from the target are
/// replaced with max range.
void mask_scan(world::Scan& scan, const world::RobotState& pose, const Target& target, double margin);

/// Runs one inspection at the current pose; returns the number of new registrations.
using InspectFn = std::function<int(world::Simulator&)>;

enum class Outcome { Completed, Unreachable, Lost, Aborted, Timeout, LapLimit };
std::string to_string(Outcome o);

struct EncircleResult
{
    Outcome outcome{Outcome::Unreachable};
    EncircleState state;
    int corner_turns{0};
    int inspections{0};
    int registrations{0};
    double heading_change{0.0};  ///< unwrapped, over the whole run [rad]
    double follow_heading_change{0.0};  ///< unwrapped, since Follow was first entered [rad]
    double start_time{0.0};
    double end_time{0.0};
    std::vector<std::pair<Phase, Phase>> transitions;
};

/// Full encirclement of one pile: approach over the grid map, side assignment,
/// side following with corner turns and periodic inspection stops.
EncircleResult run_encirclement(world::Simulator& sim, const occupancy::TrinaryMap& map,
                                const Target& target, const EncircleParams& p,
                                const nav::FollowParams& fp, const InspectFn& inspect,
                                EventLog* log = nullptr, const nav::TickHook& on_tick = {});

/// Encirclement from the current pose with the pile already within reach,
/// skipping the planned approach.
EncircleResult encircle_here(world::Simulator& sim, const Target& target, const EncircleParams& p,
                             const InspectFn& inspect, EventLog* log = nullptr,
                             const nav::TickHook& on_tick = {});

}  // namespace rim::encircle
