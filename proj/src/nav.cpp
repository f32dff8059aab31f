#include "rim/nav.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <queue>
#include <tuple>

namespace rim::nav {

using occupancy::Cell;
using occupancy::GridGeometry;
using occupancy::Occ;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = 1.4142135623730951;
constexpr int kDi[8] = {1, -1, 0, 0, 1, 1, -1, -1};
constexpr int kDj[8] = {0, 0, 1, -1, 1, -1, 1, -1};

/// Diagonal moves may not squeeze between two blocked orthogonal cells.
bool move_allowed(const CostMap& cm, int i, int j, int k)
{
    const int ni = i + kDi[k], nj = j + kDj[k];
    if (cm.is_blocked(ni, nj)) return false;
    if (k >= 4 && (cm.is_blocked(i + kDi[k], j) || cm.is_blocked(i, j + kDj[k]))) return false;
    return true;
}

double octile(const Cell& a, const Cell& b, double res)
{
    const int dx = std::abs(a.i - b.i), dy = std::abs(a.j - b.j);
    return res * (std::max(dx, dy) + (kSqrt2 - 1.0) * std::min(dx, dy));
}

Path make_path(const GridGeometry& g, std::vector<Cell> cells)
{
    Path p;
    p.cost = chain_cost(cells, g.resolution);
    for (const auto& c : cells) p.waypoints.push_back(g.cell_center(c.i, c.j));
    p.cells = std::move(cells);
    return p;
}

}  // namespace

CostMap inflate(const occupancy::TrinaryMap& tri, double inflate_radius, bool allow_unknown)
{
    const GridGeometry& g = tri.geom;
    CostMap cm{g, std::vector<std::uint8_t>(g.size(), 0)};
    const int r = static_cast<int>(std::floor(inflate_radius / g.resolution + 1e-9));
    const double r2 = (inflate_radius / g.resolution) * (inflate_radius / g.resolution) + 1e-9;
    std::vector<std::array<int, 2>> kernel;
    for (int dj = -r; dj <= r; ++dj)
        for (int di = -r; di <= r; ++di)
            if (di * di + dj * dj <= r2) kernel.push_back({di, dj});
    for (int j = 0; j < g.height; ++j)
        for (int i = 0; i < g.width; ++i) {
            const Occ o = tri.at(i, j);
            if (o == Occ::Unknown && !allow_unknown) cm.blocked[g.index(i, j)] = 1;
            if (o != Occ::Occupied) continue;
            for (const auto& k : kernel) {
                const int ni = i + k[0], nj = j + k[1];
                if (g.in_bounds(ni, nj)) cm.blocked[g.index(ni, nj)] = 1;
            }
        }
    return cm;
}

double chain_cost(const std::vector<Cell>& cells, double resolution)
{
    long straight = 0, diagonal = 0;
    for (std::size_t k = 1; k < cells.size(); ++k) {
        const bool diag = cells[k].i != cells[k - 1].i && cells[k].j != cells[k - 1].j;
        (diag ? diagonal : straight) += 1;
    }
    return (static_cast<double>(straight) + kSqrt2 * static_cast<double>(diagonal)) * resolution;
}

PlanResult plan_path(const CostMap& cm, const Vec2& start, const Vec2& goal)
{
    const GridGeometry& g = cm.geom;
    const Cell s = g.world_to_cell(start);
    const Cell t = g.world_to_cell(goal);
    PlanResult res;
    if (cm.is_blocked(s.i, s.j)) { res.status = PlanStatus::StartBlocked; return res; }
    if (cm.is_blocked(t.i, t.j)) { res.status = PlanStatus::GoalBlocked; return res; }

    std::vector<double> gcost(g.size(), kInf);
    std::vector<std::int64_t> parent(g.size(), -1);
    std::vector<std::uint8_t> closed(g.size(), 0);
    using Item = std::tuple<double, std::uint64_t, std::size_t>;  // f, insertion order, index
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    std::uint64_t order = 0;
    const std::size_t si = g.index(s.i, s.j), ti = g.index(t.i, t.j);
    gcost[si] = 0.0;
    open.emplace(octile(s, t, g.resolution), order++, si);
    while (!open.empty()) {
        const auto [f, ord, idx] = open.top();
        open.pop();
        if (closed[idx]) continue;
        closed[idx] = 1;
        if (idx == ti) break;
        const Cell c = g.cell_of(idx);
        for (int k = 0; k < 8; ++k) {
            if (!move_allowed(cm, c.i, c.j, k)) continue;
            const std::size_t n = g.index(c.i + kDi[k], c.j + kDj[k]);
            if (closed[n]) continue;
            const double ng = gcost[idx] + (k >= 4 ? kSqrt2 : 1.0) * g.resolution;
            if (ng < gcost[n]) {
                gcost[n] = ng;
                parent[n] = static_cast<std::int64_t>(idx);
                open.emplace(ng + octile(g.cell_of(n), t, g.resolution), order++, n);
            }
        }
    }
    if (!closed[ti]) { res.status = PlanStatus::Unreachable; return res; }
    std::vector<Cell> cells;
    for (std::int64_t k = static_cast<std::int64_t>(ti); k >= 0; k = parent[static_cast<std::size_t>(k)])
        cells.push_back(g.cell_of(static_cast<std::size_t>(k)));
    std::reverse(cells.begin(), cells.end());
    res.status = PlanStatus::Ok;
    res.path = make_path(g, std::move(cells));
    return res;
}

PlanResult plan_path(const occupancy::TrinaryMap& tri, const Vec2& start, const Vec2& goal,
                     double inflate_radius, bool allow_unknown)
{
    return plan_path(inflate(tri, inflate_radius, allow_unknown), start, goal);
}

PlanResult plan_from_pose(const occupancy::TrinaryMap& tri, const CostMap& cm, const Vec2& start,
                          const Vec2& goal)
{
    const Cell s = cm.geom.world_to_cell(start);
    if (!cm.is_blocked(s.i, s.j)) return plan_path(cm, start, goal);
    PlanResult res;
    res.status = PlanStatus::StartBlocked;
    if (!cm.geom.in_bounds(s.i, s.j)) return res;
    const auto esc = escape_cell(cm, tri, s);
    if (!esc) return res;
    res = plan_path(cm, cm.geom.cell_center(esc->i, esc->j), goal);
    if (res.path) res.path->waypoints.insert(res.path->waypoints.begin(), start);
    return res;
}

DistanceField dijkstra(const CostMap& cm, Cell start)
{
    const GridGeometry& g = cm.geom;
    DistanceField df{std::vector<double>(g.size(), kInf), std::vector<std::int64_t>(g.size(), -1)};
    if (cm.is_blocked(start.i, start.j)) return df;
    using Item = std::pair<double, std::size_t>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> open;
    const std::size_t si = g.index(start.i, start.j);
    df.dist[si] = 0.0;
    open.emplace(0.0, si);
    while (!open.empty()) {
        const auto [d, idx] = open.top();
        open.pop();
        if (d > df.dist[idx]) continue;
        const Cell c = g.cell_of(idx);
        for (int k = 0; k < 8; ++k) {
            if (!move_allowed(cm, c.i, c.j, k)) continue;
            const std::size_t n = g.index(c.i + kDi[k], c.j + kDj[k]);
            const double nd = d + (k >= 4 ? kSqrt2 : 1.0) * g.resolution;
            if (nd < df.dist[n]) {
                df.dist[n] = nd;
                df.parent[n] = static_cast<std::int64_t>(idx);
                open.emplace(nd, n);
            }
        }
    }
    return df;
}

std::optional<Path> extract_path(const CostMap& cm, const DistanceField& df, Cell goal)
{
    const GridGeometry& g = cm.geom;
    if (!g.in_bounds(goal.i, goal.j) || !std::isfinite(df.at(g, goal.i, goal.j))) return std::nullopt;
    std::vector<Cell> cells;
    for (std::int64_t k = static_cast<std::int64_t>(g.index(goal.i, goal.j)); k >= 0;
         k = df.parent[static_cast<std::size_t>(k)])
        cells.push_back(g.cell_of(static_cast<std::size_t>(k)));
    std::reverse(cells.begin(), cells.end());
    return make_path(g, std::move(cells));
}

std::optional<Cell> escape_cell(const CostMap& cm, const occupancy::TrinaryMap& tri, Cell from)
{
    const GridGeometry& g = cm.geom;
    if (!g.in_bounds(from.i, from.j)) return std::nullopt;
    if (!cm.is_blocked(from.i, from.j)) return from;
    std::vector<std::uint8_t> seen(g.size(), 0);
    std::deque<Cell> q{from};
    seen[g.index(from.i, from.j)] = 1;
    while (!q.empty()) {
        const Cell c = q.front();
        q.pop_front();
        if (!cm.is_blocked(c.i, c.j)) return c;
        for (int k = 0; k < 8; ++k) {
            const int ni = c.i + kDi[k], nj = c.j + kDj[k];
            if (!g.in_bounds(ni, nj) || seen[g.index(ni, nj)] || tri.at(ni, nj) == Occ::Occupied) continue;
            seen[g.index(ni, nj)] = 1;
            q.push_back({ni, nj});
        }
    }
    return std::nullopt;
}

FollowStatus follow_path(world::Simulator& sim, const Path& path, const FollowParams& p,
                         const TickHook& on_tick)
{
    if (path.waypoints.empty()) return FollowStatus::Reached;
    const Vec2 goal = path.waypoints.back();
    std::size_t progress = 0;
    double best = kInf;
    double last_improvement = sim.time();
    const double t0 = sim.time();
    while (true) {
        const auto& s = sim.state();
        const Vec2 pos = s.position();
        const double to_goal = distance(pos, goal);
        if (to_goal <= p.goal_tolerance) return FollowStatus::Reached;
        if (to_goal < best - p.progress_eps) {
            best = to_goal;
            last_improvement = sim.time();
        }
        if (sim.time() - last_improvement > p.stuck_time) return FollowStatus::Stuck;
        if (sim.time() - t0 > p.timeout) return FollowStatus::Timeout;

        // Advance the progress marker to the closest waypoint within a short window.
        const std::size_t window = std::min(path.waypoints.size(), progress + 40);
        double dmin = distance(pos, path.waypoints[progress]);
        for (std::size_t k = progress + 1; k < window; ++k) {
            const double d = distance(pos, path.waypoints[k]);
            if (d < dmin) { dmin = d; progress = k; }
        }
        std::size_t target = progress;
        while (target + 1 < path.waypoints.size() && distance(pos, path.waypoints[target]) < p.lookahead)
            ++target;
        const Vec2 aim = path.waypoints[target];
        const double alpha = normalize_angle(std::atan2(aim.y - pos.y, aim.x - pos.x) - s.theta);

        world::Command cmd;
        if (std::abs(alpha) > p.rotate_threshold) {
            cmd.omega = std::clamp(2.0 * alpha, -p.omega_max, p.omega_max);
        } else {
            const double ld = std::max(distance(pos, aim), 1e-3);
            cmd.v = std::min(p.v_max * std::max(0.3, std::cos(alpha)), std::max(0.1, to_goal));
            cmd.omega = std::clamp(2.0 * cmd.v * std::sin(alpha) / ld, -p.omega_max, p.omega_max);
        }
        sim.step(cmd, p.dt);
        if (on_tick && on_tick(sim)) return FollowStatus::Aborted;
    }
}

void rotate_to(world::Simulator& sim, double heading, const FollowParams& p, const TickHook& on_tick)
{
    for (int k = 0; k < 1000; ++k) {
        const double err = normalize_angle(heading - sim.state().theta);
        if (std::abs(err) < 1e-3) break;
        double omega = std::clamp(err / p.dt, -p.omega_max, p.omega_max);
        sim.step({0.0, omega}, p.dt);
        if (on_tick && on_tick(sim)) break;
    }
}

void integrate_current_scan(world::Simulator& sim, occupancy::OccupancyGrid& grid, const MappingParams& mp)
{
    const auto scan = sim.scan();
    world::RobotState pose = sim.state();
    if (mp.pose_noise_xy > 0.0 || mp.pose_noise_theta > 0.0) {
        std::normal_distribution<double> nxy(0.0, mp.pose_noise_xy), nth(0.0, mp.pose_noise_theta);
        auto& rng = sim.pose_noise_rng();
        if (mp.pose_noise_xy > 0.0) { pose.x += nxy(rng); pose.y += nxy(rng); }
        if (mp.pose_noise_theta > 0.0) pose.theta = normalize_angle(pose.theta + nth(rng));
    }
    occupancy::integrate_scan(grid, pose, scan);
}

namespace {

struct FrontierTarget
{
    Cell goal;
    double cost{kInf};
    std::size_t size{0};
    Vec2 centroid;
};

}  // namespace

std::vector<occupancy::Frontier> clear_frontiers(const occupancy::TrinaryMap& tri, std::size_t min_size,
                                                 double clearance)
{
    if (clearance <= 0.0) return occupancy::find_frontiers(tri, min_size);
    const auto& g = tri.geom;
    const int r = static_cast<int>(std::floor(clearance / g.resolution + 1e-9));

    // Unknown space connected to the map edge (beyond the walls).
    std::vector<std::uint8_t> outside(g.size(), 0);
    std::deque<Cell> q;
    auto seed = [&](int i, int j) {
        const std::size_t k = g.index(i, j);
        if (tri.at(i, j) == Occ::Unknown && !outside[k]) { outside[k] = 1; q.push_back({i, j}); }
    };
    for (int i = 0; i < g.width; ++i) { seed(i, 0); seed(i, g.height - 1); }
    for (int j = 0; j < g.height; ++j) { seed(0, j); seed(g.width - 1, j); }
    while (!q.empty()) {
        const Cell c = q.front();
        q.pop_front();
        for (const auto& [di, dj] : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}})
            if (g.in_bounds(c.i + di, c.j + dj)) seed(c.i + di, c.j + dj);
    }

    occupancy::TrinaryMap masked = tri;
    for (int j = 0; j < g.height; ++j)
        for (int i = 0; i < g.width; ++i) {
            if (tri.at(i, j) != Occ::Free) continue;
            bool enclosed_unknown = false, near = false;
            for (int dj = -1; dj <= 1; ++dj)
                for (int di = -1; di <= 1; ++di)
                    if (g.in_bounds(i + di, j + dj) && tri.at(i + di, j + dj) == Occ::Unknown &&
                        !outside[g.index(i + di, j + dj)])
                        enclosed_unknown = true;
            if (enclosed_unknown) continue;
            for (int dj = -r; dj <= r && !near; ++dj)
                for (int di = -r; di <= r && !near; ++di)
                    near = g.in_bounds(i + di, j + dj) && tri.at(i + di, j + dj) == Occ::Occupied;
            if (near) masked.at(i, j) = Occ::Occupied;
        }
    return occupancy::find_frontiers(masked, min_size);
}

ExploreResult explore(world::Simulator& sim, occupancy::OccupancyGrid& grid, const ExploreParams& p,
                      const MappingParams& mapping, EventLog* log)
{
    ExploreResult res;
    const GridGeometry& g = grid.geometry();
    const double t_start = sim.time();
    const double d_start = sim.distance_travelled();
    std::vector<Vec2> blacklist;
    std::optional<Vec2> last_goal;
    int repeats = 0;

    for (int k = 0; k < p.initial_scans; ++k) {
        integrate_current_scan(sim, grid, mapping);
        if (k + 1 < p.initial_scans) sim.wait(p.scan_period);
    }

    for (res.iterations = 0; res.iterations < p.max_iterations; ++res.iterations) {
        integrate_current_scan(sim, grid, mapping);
        res.map = occupancy::classify(grid);
        res.known_history.push_back(occupancy::known_count(res.map));
        if (sim.time() - t_start > p.max_time) break;

        auto frontiers = clear_frontiers(res.map, p.min_frontier, p.frontier_clearance);
        std::erase_if(frontiers, [&](const occupancy::Frontier& f) {
            return std::any_of(blacklist.begin(), blacklist.end(),
                               [&](const Vec2& b) { return distance(b, f.centroid) < p.blacklist_radius; });
        });
        if (frontiers.empty()) {
            res.complete = true;
            break;
        }

        const CostMap cm = inflate(res.map, p.inflate_radius, false);
        const auto start = escape_cell(cm, res.map, g.world_to_cell(sim.state().position()));
        if (!start) break;
        const DistanceField df = dijkstra(cm, *start);

        std::optional<FrontierTarget> best;
        for (const auto& f : frontiers) {
            FrontierTarget t;
            t.size = f.size();
            t.centroid = f.centroid;
            double near = kInf;
            for (const auto& c : f.cells) {
                if (!std::isfinite(df.at(g, c.i, c.j))) continue;
                const double d = distance(g.cell_center(c.i, c.j), f.centroid);
                if (d < near) { near = d; t.goal = c; }
            }
            if (!std::isfinite(near)) {
                // Approach the closest reachable cell near the frontier instead.
                const int r = static_cast<int>(std::ceil(p.reach_radius / g.resolution));
                const Cell cc = g.world_to_cell(f.centroid);
                for (int dj = -r; dj <= r; ++dj)
                    for (int di = -r; di <= r; ++di) {
                        const int ni = cc.i + di, nj = cc.j + dj;
                        if (!g.in_bounds(ni, nj) || !std::isfinite(df.at(g, ni, nj))) continue;
                        const double d = distance(g.cell_center(ni, nj), f.centroid);
                        if (d <= p.reach_radius && d < near) { near = d; t.goal = {ni, nj}; }
                    }
            }
            if (!std::isfinite(near)) continue;
            t.cost = df.at(g, t.goal.i, t.goal.j);
            if (!best || t.cost < best->cost - 1e-9 || (std::abs(t.cost - best->cost) <= 1e-9 && t.size > best->size))
                best = t;
        }
        if (!best) {
            // Whatever frontier remains cannot be reached.
            res.complete = true;
            break;
        }

        auto path = extract_path(cm, df, best->goal);
        if (log)
            log->emit(sim.time(), "explore_goal",
                      {{"x", best->centroid.x}, {"y", best->centroid.y}, {"size", best->size},
                       {"cost", best->cost}});
        if (!path || path->waypoints.size() <= 1) {
            blacklist.push_back(best->centroid);
            continue;
        }
        double next_scan = sim.time() + p.scan_period;
        const double leg_start = sim.distance_travelled();
        const double leg_end = sim.time() + p.replan_period;
        const auto status = follow_path(sim, *path, p.follow, [&](world::Simulator& s) {
            if (s.time() + 1e-9 >= next_scan) {
                integrate_current_scan(s, grid, mapping);
                next_scan += p.scan_period;
            }
            return s.time() >= leg_end;
        });
        if (last_goal && distance(*last_goal, best->centroid) < p.blacklist_radius)
            ++repeats;
        else
            repeats = 0;
        last_goal = best->centroid;
        const bool stalled = sim.distance_travelled() - leg_start < p.follow.progress_eps;
        if (status == FollowStatus::Reached || status == FollowStatus::Stuck || stalled ||
            repeats >= p.max_goal_repeats)
            blacklist.push_back(best->centroid);
    }
    res.distance = sim.distance_travelled() - d_start;
    if (log)
        log->emit(sim.time(), "explore_done",
                  {{"complete", res.complete}, {"iterations", res.iterations}, {"distance", res.distance}});
    return res;
}

}  // namespace rim::nav
