#include "rim/encircle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace rim::encircle {

using occupancy::Cell;

void EncircleParams::validate() const
{
    if (!(gamma > 0.0) || !(beta > gamma)) throw std::invalid_argument("encircle: need beta > gamma > 0");
    if (!(v_follow > 0.0) || !(dt > 0.0) || !(omega_max > 0.0))
        throw std::invalid_argument("encircle: v_follow, dt and omega_max must be positive");
    if (!(inspect_period > 0.0)) throw std::invalid_argument("encircle: inspect_period must be positive");
    if (quit_after_turns < 1) throw std::invalid_argument("encircle: quit_after_turns must be >= 1");
    if (!(corner_jump > 0.0)) throw std::invalid_argument("encircle: corner_jump must be positive");
    if (probe_quantile < 0.0 || probe_quantile > 1.0) throw std::invalid_argument("encircle: probe_quantile must be in [0, 1]");
    if (derivative_filter < 0.0 || derivative_filter >= 1.0)
        throw std::invalid_argument("encircle: derivative_filter must be in [0, 1)");
}

std::string to_string(Phase p)
{
    switch (p) {
    case Phase::Approach: return "approach";
    case Phase::AssignSide: return "assign_side";
    case Phase::Follow: return "follow";
    case Phase::CornerTurn: return "corner_turn";
    case Phase::Inspect: return "inspect";
    case Phase::Done: return "done";
    }
    return "?";
}

std::string to_string(Side s)
{
    switch (s) {
    case Side::Left: return "left";
    case Side::Right: return "right";
    default: return "unassigned";
    }
}

std::string to_string(Outcome o)
{
    switch (o) {
    case Outcome::Completed: return "completed";
    case Outcome::Unreachable: return "unreachable";
    case Outcome::Lost: return "lost";
    case Outcome::Aborted: return "aborted";
    case Outcome::Timeout: return "timeout";
    case Outcome::LapLimit: return "lap_limit";
    }
    return "?";
}

namespace {

// +1 for a pile on the left: turning toward it is counter-clockwise.
double toward(Side s) { return s == Side::Left ? 1.0 : -1.0; }

}  // namespace

bool approach_triggered(const world::Scan& scan, const EncircleParams& p)
{
    return scan.min_in_sector(-p.forward_sector_half, p.forward_sector_half) < p.beta;
}

std::optional<Side> assign_side(const world::Scan& scan)
{
    constexpr double eps = 1e-9;
    bool left_max = true, right_max = true;
    const double left = scan.mean_in_sector(eps, 0.5 * kPi, &left_max);
    const double right = scan.mean_in_sector(-0.5 * kPi, -eps, &right_max);
    if (left_max && right_max) return std::nullopt;
    return left < right ? Side::Left : Side::Right;
}

double side_distance(const world::Scan& scan, Side side, const EncircleParams& p)
{
    // Lateral offset, not range: a face corner ahead or behind reads as the
    // distance to its line instead of pulling the robot toward the corner.
    const double c = toward(side) * 0.5 * kPi;
    double m = scan.max_range;
    for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
        const double a = scan.angle(i);
        if (std::abs(normalize_angle(a - c)) > p.side_sector_half || scan.ranges[i] >= scan.max_range) continue;
        m = std::min(m, scan.ranges[i] * std::abs(std::sin(a)));
    }
    return m;
}

std::optional<SideWall> fit_side_wall(const world::Scan& scan, Side side, const EncircleParams& p, double band)
{
    const double c = toward(side) * 0.5 * kPi;
    const double dmin = scan.min_in_sector(c - p.side_sector_half, c + p.side_sector_half);
    if (dmin >= scan.max_range) return std::nullopt;
    std::vector<Eigen::Vector2d> pts;
    for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
        const double a = scan.angle(i);
        if (std::abs(normalize_angle(a - c)) > p.side_sector_half) continue;
        const double r = scan.ranges[i];
        if (r >= scan.max_range || r > dmin + band) continue;
        pts.emplace_back(r * std::cos(a), r * std::sin(a));
    }
    if (pts.size() < 5) return std::nullopt;
    Eigen::Vector2d mean = Eigen::Vector2d::Zero();
    for (const auto& q : pts) mean += q;
    mean /= static_cast<double>(pts.size());
    Eigen::Matrix2d cov = Eigen::Matrix2d::Zero();
    for (const auto& q : pts) cov += (q - mean) * (q - mean).transpose();
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(cov);
    const Eigen::Vector2d dir = es.eigenvectors().col(1);
    const Eigen::Vector2d nrm = es.eigenvectors().col(0);
    SideWall w;
    w.distance = std::abs(nrm.dot(mean));
    w.angle = std::atan2(dir.y(), dir.x());
    if (w.angle > 0.5 * kPi) w.angle -= kPi;
    if (w.angle <= -0.5 * kPi) w.angle += kPi;
    w.points = static_cast<int>(pts.size());
    return w;
}

world::Command follow_step(const world::Scan& scan, const EncircleParams& p, EncircleState& st)
{
    if (st.side == Side::Unassigned) throw std::logic_error("follow_step without an assigned side");
    // A low quantile rather than the min: just past a corner the forward edge of
    // the window grazes the next face at short range.
    const double c = toward(st.side) * 0.5 * kPi;
    const double probe = scan.quantile_in_sector(c - p.probe_half, c + p.probe_half, p.probe_quantile);
    if (probe < p.gamma + 0.5 * p.corner_jump) st.probe_armed = true;
    if (st.probe_armed && probe > p.gamma + p.corner_jump) {
        st.probe_armed = false;
        st.have_e_prev = false;
        st.phase = Phase::CornerTurn;
        return {p.v_follow, 0.0};
    }

    world::Command cmd{p.v_follow, 0.0};
    const double front = scan.min_in_sector(-p.forward_sector_half, p.forward_sector_half);
    double d = side_distance(scan, st.side, p);
    if (!st.probe_armed || d >= scan.max_range) {
        // No face beside us yet (just after a corner the old face lies ahead and
        // would pull the robot in): hold the heading.
        st.have_e_prev = false;
        if (front < p.safety_stop) cmd = {0.0, -toward(st.side) * 0.5 * p.omega_max};
        return cmd;
    }
    const auto wall = fit_side_wall(scan, st.side, p);
    if (wall) d = wall->distance;
    const double e = p.gamma - d;
    double de = 0.0;
    if (wall) {
        // Distance rate along a straight face at the commanded speed.
        de = -toward(st.side) * p.v_follow * std::sin(wall->angle);
    } else if (st.have_e_prev) {
        de = (e - st.e_prev) / p.dt;
        de = p.derivative_filter * st.de_prev + (1.0 - p.derivative_filter) * de;
    }
    st.e_prev = e;
    st.de_prev = de;
    st.have_e_prev = true;
    // Positive error means too close: steer away from the pile.
    cmd.omega = std::clamp(-toward(st.side) * (p.kp * e + p.kd * de), -p.omega_max, p.omega_max);

    if (front < p.safety_stop) {
        cmd.v = 0.0;
        cmd.omega = -toward(st.side) * 0.5 * p.omega_max;
    }
    return cmd;
}

void record_inspection(EncircleState& st, int new_registrations)
{
    if (new_registrations > 0)
        st.turns_without_new = 0;
    else
        ++st.turns_without_new;
}

bool check_termination(const EncircleState& st, const EncircleParams& p)
{
    return st.turns_without_new >= p.quit_after_turns;
}

bool transition_allowed(Phase from, Phase to)
{
    switch (from) {
    case Phase::Approach: return to == Phase::AssignSide || to == Phase::Done;
    case Phase::AssignSide: return to == Phase::Follow || to == Phase::Approach || to == Phase::Done;
    case Phase::Follow: return to == Phase::CornerTurn || to == Phase::Inspect || to == Phase::Done;
    case Phase::CornerTurn: return to == Phase::Follow || to == Phase::Done;
    case Phase::Inspect: return to == Phase::Follow || to == Phase::Done;
    case Phase::Done: return false;
    }
    return false;
}

Target target_from_region(const gridproc::RegionOfInterest& roi, const occupancy::GridGeometry& geom)
{
    Target t{roi.centroid, 0.0};
    for (const auto& g : roi.hull) {
        const Vec2 w = geom.origin + (g + Vec2{0.5, 0.5}) * geom.resolution;
        t.radius = std::max(t.radius, distance(w, roi.centroid));
    }
    return t;
}

void mask_scan(world::Scan& scan, const world::RobotState& pose, const Target& target, double margin)
{
    if (target.radius <= 0.0) return;
    const double lim = target.radius + margin;
    for (std::size_t i = 0; i < scan.ranges.size(); ++i) {
        const double r = scan.ranges[i];
        if (r >= scan.max_range) continue;
        const Vec2 hit = pose.position() + Vec2::from_angle(pose.theta + scan.angle(i)) * r;
        if (distance(hit, target.centroid) > lim) scan.ranges[i] = scan.max_range;
    }
}

namespace {

class Runner
{
public:
    Runner(world::Simulator& sim, const Target& target, const EncircleParams& p, const InspectFn& inspect,
           EventLog* log, const nav::TickHook& on_tick)
        : sim_(sim), target_(target), p_(p), inspect_(inspect), log_(log), on_tick_(on_tick)
    {
        p_.validate();
        res_.start_time = sim.time();
    }

    EncircleResult& result() { return res_; }
    EncircleState& st() { return res_.state; }

    world::Scan scan()
    {
        auto s = sim_.scan();
        mask_scan(s, sim_.state(), target_, p_.mask_margin);
        return s;
    }

    void set_phase(Phase to)
    {
        const Phase from = st().phase;
        if (from == to) return;
        res_.transitions.emplace_back(from, to);
        st().phase = to;
        if (log_) log_->emit(sim_.time(), "phase", {{"from", to_string(from)}, {"to", to_string(to)}});
    }

    // One control tick; false when the caller should stop.
    bool tick(world::Command cmd)
    {
        const double th = sim_.state().theta;
        sim_.step(cmd, p_.dt);
        res_.heading_change += normalize_angle(sim_.state().theta - th);
        if (on_tick_ && on_tick_(sim_)) {
            aborted_ = true;
            return false;
        }
        return true;
    }

    void rotate_by(double angle)
    {
        const double goal = res_.heading_change + angle;
        for (int k = 0; k < 2000; ++k) {
            const double err = goal - res_.heading_change;
            if (std::abs(err) < 1e-4) break;
            if (!tick({0.0, std::clamp(err / p_.dt, -p_.omega_max, p_.omega_max)})) return;
        }
    }

    // Straight drive; false on contact.
    bool drive_signed(double dist, double speed)
    {
        double done = 0.0;
        while (done < std::abs(dist) - 1e-9) {
            const double step = std::min(speed * p_.dt, std::abs(dist) - done);
            const double before = sim_.distance_travelled();
            const double v = (dist < 0 ? -1.0 : 1.0) * step / p_.dt;
            if (!tick({v, 0.0})) return false;
            const double moved = sim_.distance_travelled() - before;
            if (moved < 0.5 * step) return false;
            done += moved;
        }
        return true;
    }

    bool timed_out() const { return sim_.time() - res_.start_time > p_.max_time; }
    bool aborted() const { return aborted_; }

    // From a pose with the pile ahead: pick a side, close in, then put the pile
    // on that side.
    bool start_from_trigger()
    {
        set_phase(Phase::AssignSide);
        const auto s = scan();
        const auto side = assign_side(s);
        if (!side) {
            set_phase(Phase::Approach);
            return false;
        }
        st().side = *side;
        if (log_) log_->emit(sim_.time(), "side_assigned", {{"side", to_string(*side)}});

        // Face the nearest pile return and close in to gamma before turning alongside.
        const auto kmin = static_cast<std::size_t>(
            std::min_element(s.ranges.begin(), s.ranges.end()) - s.ranges.begin());
        rotate_by(normalize_angle(s.angle(kmin)));
        for (int k = 0; k < 200; ++k) {
            const auto f = scan();
            const double front = f.min_in_sector(-p_.forward_sector_half, p_.forward_sector_half);
            if (front >= f.max_range || std::abs(front - p_.gamma) < 0.02) break;
            const double v = std::clamp((front - p_.gamma) / p_.dt, -p_.v_follow, p_.v_follow);
            const double before = sim_.distance_travelled();
            if (!tick({v, 0.0})) return false;
            if (sim_.distance_travelled() - before < 1e-6) break;
        }
        rotate_by(-toward(*side) * 0.5 * kPi);
        follow_heading_start_ = res_.heading_change;
        set_phase(Phase::Follow);
        return true;
    }

    Outcome corner_turn()
    {
        // Past the corner by a fixed clearance, then a quarter turn toward the pile.
        for (int attempt = 0; attempt < 2; ++attempt) {
            if (drive_signed(p_.corner_advance, p_.v_follow)) {
                rotate_by(toward(st().side) * 0.5 * kPi);
                st().laps_completed += 0.25;
                ++res_.corner_turns;
                if (log_)
                    log_->emit(sim_.time(), "corner", {{"laps", st().laps_completed}, {"theta", sim_.state().theta}});
                set_phase(Phase::Follow);
                return Outcome::Completed;
            }
            if (aborted_) return Outcome::Aborted;
            if (log_) log_->emit(sim_.time(), "corner_contact", {{"attempt", attempt + 1}});
            drive_signed(-0.2, p_.v_follow);
        }
        return Outcome::Aborted;
    }

    void inspect_stop()
    {
        set_phase(Phase::Inspect);
        const double turn = toward(st().side) * 0.5 * kPi;
        rotate_by(turn);
        const int n = inspect_ ? inspect_(sim_) : 0;
        ++res_.inspections;
        res_.registrations += n;
        record_inspection(st(), n);
        if (log_)
            log_->emit(sim_.time(), "inspect",
                       {{"stop", res_.inspections},
                        {"new", n},
                        {"turns_without_new", st().turns_without_new},
                        {"x", sim_.state().x},
                        {"y", sim_.state().y},
                        {"theta", sim_.state().theta}});
        rotate_by(-turn);
        st().have_e_prev = false;
        set_phase(Phase::Follow);
    }

    Outcome follow_loop()
    {
        double follow_clock = 0.0;
        double last_stop = 0.0;
        double blind = 0.0;
        while (true) {
            if (aborted_) return Outcome::Aborted;
            if (timed_out()) return Outcome::Timeout;
            if (p_.max_laps > 0.0 && st().laps_completed >= p_.max_laps - 1e-9) return Outcome::LapLimit;
            if (follow_clock - last_stop >= p_.inspect_period - 1e-9) {
                inspect_stop();
                last_stop = follow_clock;
                if (check_termination(st(), p_)) return Outcome::Completed;
                continue;
            }
            const auto s = scan();
            const auto cmd = follow_step(s, p_, st());
            if (st().phase == Phase::CornerTurn) {
                res_.transitions.emplace_back(Phase::Follow, Phase::CornerTurn);
                if (log_)
                    log_->emit(sim_.time(), "phase", {{"from", "follow"}, {"to", "corner_turn"}});
                const Outcome o = corner_turn();
                if (o != Outcome::Completed) return o;
                blind = 0.0;
                continue;
            }
            if (side_distance(s, st().side, p_) >= s.max_range) {
                blind += cmd.v * p_.dt;
                if (blind > p_.lost_distance) return Outcome::Lost;
            } else {
                blind = 0.0;
            }
            if (!tick(cmd)) return Outcome::Aborted;
            follow_clock += p_.dt;
        }
    }

    EncircleResult finish(Outcome o)
    {
        res_.outcome = o;
        if (follow_heading_start_) res_.follow_heading_change = res_.heading_change - *follow_heading_start_;
        set_phase(Phase::Done);
        res_.end_time = sim_.time();
        if (log_)
            log_->emit(sim_.time(), "encircle_done",
                       {{"outcome", to_string(o)},
                        {"inspections", res_.inspections},
                        {"registrations", res_.registrations},
                        {"corner_turns", res_.corner_turns},
                        {"laps", st().laps_completed}});
        return res_;
    }

private:
    world::Simulator& sim_;
    Target target_;
    EncircleParams p_;
    const InspectFn& inspect_;
    EventLog* log_;
    const nav::TickHook& on_tick_;
    EncircleResult res_;
    bool aborted_{false};
    std::optional<double> follow_heading_start_;
};

// Reachable cell nearest to the target, then the path to it.
std::optional<nav::Path> approach_path(world::Simulator& sim, const occupancy::TrinaryMap& map,
                                       const Vec2& target, double inflate)
{
    const auto cm = nav::inflate(map, inflate, false);
    Cell start = map.geom.world_to_cell(sim.state().position());
    if (cm.is_blocked(start.i, start.j)) {
        if (!map.geom.in_bounds(start.i, start.j)) return std::nullopt;
        auto esc = nav::escape_cell(cm, map, start);
        if (!esc) return std::nullopt;
        start = *esc;
    }
    const auto df = nav::dijkstra(cm, start);
    const auto& g = cm.geom;
    std::int64_t best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    double best_cost = best_d;
    for (std::size_t k = 0; k < g.size(); ++k) {
        if (!std::isfinite(df.dist[k])) continue;
        const Cell c = g.cell_of(k);
        const double d = distance(g.cell_center(c.i, c.j), target);
        if (d < best_d - 1e-9 || (d < best_d + 1e-9 && df.dist[k] < best_cost)) {
            best_d = d;
            best_cost = df.dist[k];
            best = static_cast<std::int64_t>(k);
        }
    }
    if (best < 0) return std::nullopt;
    auto path = nav::extract_path(cm, df, g.cell_of(static_cast<std::size_t>(best)));
    if (path && !path->waypoints.empty() && !(start == map.geom.world_to_cell(sim.state().position())))
        path->waypoints.insert(path->waypoints.begin(), sim.state().position());
    return path;
}

}  // namespace

EncircleResult encircle_here(world::Simulator& sim, const Target& target, const EncircleParams& p,
                             const InspectFn& inspect, EventLog* log, const nav::TickHook& on_tick)
{
    Runner r(sim, target, p, inspect, log, on_tick);
    if (!approach_triggered(r.scan(), p)) return r.finish(Outcome::Unreachable);
    if (!r.start_from_trigger()) return r.finish(r.aborted() ? Outcome::Aborted : Outcome::Lost);
    return r.finish(r.follow_loop());
}

EncircleResult run_encirclement(world::Simulator& sim, const occupancy::TrinaryMap& map, const Target& target,
                                const EncircleParams& p, const nav::FollowParams& fp,
                                const InspectFn& inspect, EventLog* log, const nav::TickHook& on_tick)
{
    Runner r(sim, target, p, inspect, log, on_tick);
    if (log)
        log->emit(sim.time(), "encircle_start",
                  {{"x", target.centroid.x}, {"y", target.centroid.y}, {"radius", target.radius}});

    bool triggered = approach_triggered(r.scan(), p);
    if (!triggered) {
        const auto path = approach_path(sim, map, target.centroid, p.approach_inflate);
        if (!path) {
            if (log) log->emit(sim.time(), "region_unreachable", {{"x", target.centroid.x}, {"y", target.centroid.y}});
            return r.finish(Outcome::Unreachable);
        }
        nav::TickHook hook = [&](world::Simulator& s) {
            if (on_tick && on_tick(s)) return true;
            triggered = approach_triggered(r.scan(), p);
            return triggered;
        };
        nav::follow_path(sim, *path, fp, hook);
        if (!triggered) {
            const Vec2 d = target.centroid - sim.state().position();
            nav::rotate_to(sim, std::atan2(d.y, d.x), fp, hook);
        }
    }
    if (!triggered) {
        if (log) log->emit(sim.time(), "region_unreachable", {{"x", target.centroid.x}, {"y", target.centroid.y}});
        return r.finish(Outcome::Unreachable);
    }
    if (!r.start_from_trigger()) return r.finish(r.aborted() ? Outcome::Aborted : Outcome::Lost);
    return r.finish(r.follow_loop());
}

}  // namespace rim::encircle
