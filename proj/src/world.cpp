#include "rim/world.hpp"

#include <algorithm>
#include <limits>

namespace rim {

Rng make_rng(std::uint64_t seed, std::uint64_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x5eedu};
    return Rng(seq);
}

namespace world {

Vec2 CylinderTruth::base_normal(PlateFace face) const
{
    const Vec2 u = Vec2::from_angle(yaw);
    return face == PlateFace::Front ? u : u * -1.0;
}

Vec2 CylinderTruth::base_center(PlateFace face) const
{
    return center + base_normal(face) * (0.5 * length);
}

Eigen::Vector3d CylinderTruth::plate_center3() const
{
    const Vec2 c = plate_center();
    return {c.x, c.y, 0.5 * diameter};
}

double LidarSpec::angle_increment() const
{
    if (beam_count < 2) return 0.0;
    const bool full_circle = fov >= 2.0 * kPi - 1e-9;
    return fov / static_cast<double>(full_circle ? beam_count : beam_count - 1);
}

void WorldSpec::validate() const
{
    if (!(field_width > 0.0) || !(field_height > 0.0))
        throw ScenarioError("field dimensions must be positive");
    if (lidar.beam_count < 3) throw ScenarioError("lidar.beam_count must be >= 3");
    if (!(lidar.max_range > 0.0)) throw ScenarioError("lidar.max_range must be positive");
    if (lidar.range_noise_sigma < 0.0) throw ScenarioError("lidar noise sigma must be >= 0");
    if (!(camera.focal_length > 0.0)) throw ScenarioError("camera.focal_length must be positive");
    if (!(camera.hfov > 0.0 && camera.hfov < kPi)) throw ScenarioError("camera.hfov must lie in (0, pi)");
    if (camera.depth_noise_sigma < 0.0) throw ScenarioError("camera depth noise must be >= 0");
    if (!(robot_radius > 0.0)) throw ScenarioError("robot radius must be positive");
    if (patch.outlier_fraction < 0.0 || patch.outlier_fraction > 1.0)
        throw ScenarioError("patch.outlier_fraction must lie in [0, 1]");
    for (const auto& c : cylinders) {
        if (!(c.length > 0.0) || !(c.diameter > 0.0))
            throw ScenarioError("cylinder " + c.tag_id + ": dimensions must be positive");
        for (const auto& p : c.footprint().corners())
            if (!inside_field(p))
                throw ScenarioError("cylinder " + c.tag_id + " footprint leaves the field");
    }
}

bool WorldSpec::inside_field(const Vec2& p) const
{
    return p.x >= 0.0 && p.x <= field_width && p.y >= 0.0 && p.y <= field_height;
}

std::vector<Segment> WorldSpec::obstacle_segments() const
{
    std::vector<Segment> segs = walls;
    for (const auto& c : cylinders)
        for (const auto& e : c.footprint().edges()) segs.push_back(e);
    return segs;
}

std::vector<Segment> WorldSpec::boundary_walls(double w, double h)
{
    return {Segment{{0, 0}, {w, 0}}, Segment{{w, 0}, {w, h}}, Segment{{w, h}, {0, h}},
            Segment{{0, h}, {0, 0}}};
}

namespace {

bool in_sector(double rel, double lo, double hi)
{
    double d = normalize_angle(rel - lo);
    if (d < 0.0) d += 2.0 * kPi;
    return d <= (hi - lo) + 1e-12;
}

}  // namespace

double Scan::min_in_sector(double lo, double hi) const
{
    double m = max_range;
    for (std::size_t i = 0; i < ranges.size(); ++i)
        if (in_sector(angle(i), lo, hi)) m = std::min(m, ranges[i]);
    return m;
}

double Scan::mean_in_sector(double lo, double hi, bool* all_max) const
{
    double sum = 0.0;
    int n = 0;
    bool maxed = true;
    for (std::size_t i = 0; i < ranges.size(); ++i) {
        if (!in_sector(angle(i), lo, hi)) continue;
        sum += ranges[i];
        ++n;
        if (ranges[i] < max_range) maxed = false;
    }
    if (all_max) *all_max = maxed;
    return n > 0 ? sum / n : max_range;
}

double Scan::quantile_in_sector(double lo, double hi, double q) const
{
    std::vector<double> v;
    for (std::size_t i = 0; i < ranges.size(); ++i)
        if (in_sector(angle(i), lo, hi)) v.push_back(ranges[i]);
    if (v.empty()) return max_range;
    const auto k = static_cast<std::size_t>(std::clamp(q, 0.0, 1.0) * static_cast<double>(v.size() - 1));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
    return v[k];
}

Scan raycast_lidar(const WorldSpec& world, const RobotState& pose, Rng* rng)
{
    if (!world.inside_field(pose.position()))
        throw ScenarioError("raycast from a pose outside the field");
    const auto segs = world.obstacle_segments();
    const LidarSpec& L = world.lidar;
    Scan scan;
    scan.angle_min = -0.5 * L.fov;
    scan.angle_increment = L.angle_increment();
    scan.max_range = L.max_range;
    scan.ranges.assign(static_cast<std::size_t>(L.beam_count), L.max_range);

    std::normal_distribution<double> noise(0.0, L.range_noise_sigma);
    const bool noisy = rng != nullptr && L.range_noise_sigma > 0.0;
    const Vec2 origin = pose.position();
    for (int i = 0; i < L.beam_count; ++i) {
        const Vec2 dir = Vec2::from_angle(pose.theta + L.beam_angle(i));
        double best = std::numeric_limits<double>::infinity();
        for (const auto& s : segs)
            if (auto t = ray_segment_intersection(origin, dir, s)) best = std::min(best, *t);
        if (best >= L.max_range) continue;
        double r = best;
        if (noisy) r += noise(*rng);
        scan.ranges[static_cast<std::size_t>(i)] = std::clamp(r, 0.0, L.max_range);
    }
    return scan;
}

RobotState integrate_unicycle(const RobotState& s, Command cmd, double dt)
{
    RobotState out = s;
    out.commanded = cmd;
    if (std::abs(cmd.omega) < 1e-9) {
        out.x = s.x + cmd.v * dt * std::cos(s.theta);
        out.y = s.y + cmd.v * dt * std::sin(s.theta);
        out.theta = normalize_angle(s.theta);
    } else {
        const double r = cmd.v / cmd.omega;
        const double th = s.theta + cmd.omega * dt;
        out.x = s.x + r * (std::sin(th) - std::sin(s.theta));
        out.y = s.y - r * (std::cos(th) - std::cos(s.theta));
        out.theta = normalize_angle(th);
    }
    return out;
}

double clearance(const WorldSpec& world, const Vec2& p, double radius)
{
    double d = std::numeric_limits<double>::infinity();
    for (const auto& w : world.walls) d = std::min(d, point_segment_distance(p, w));
    for (const auto& c : world.cylinders) {
        const auto fp = c.footprint();
        if (fp.contains(p)) return -radius;
        for (const auto& e : fp.edges()) d = std::min(d, point_segment_distance(p, e));
    }
    return d - radius;
}

RobotState step_robot(const WorldSpec& world, const RobotState& s, Command cmd, double dt)
{
    const RobotState full = integrate_unicycle(s, cmd, dt);
    const double path_len = std::abs(cmd.v) * dt;
    if (path_len < 1e-12) return full;

    const double r = world.robot_radius;
    const double c0 = clearance(world, s.position(), r);
    const double floor = std::min(0.0, c0);
    auto free_at = [&](double frac) {
        const auto p = integrate_unicycle(s, cmd, dt * frac).position();
        return clearance(world, p, r) >= floor - 1e-12;
    };

    const int n = std::max(1, static_cast<int>(std::ceil(path_len / 0.01)));
    double lo = 0.0;
    double hi = -1.0;
    for (int k = 1; k <= n; ++k) {
        const double f = static_cast<double>(k) / n;
        if (!free_at(f)) { hi = f; break; }
        lo = f;
    }
    if (hi < 0.0) return full;
    for (int it = 0; it < 30; ++it) {
        const double mid = 0.5 * (lo + hi);
        (free_at(mid) ? lo : hi) = mid;
    }
    RobotState out = full;
    const auto p = integrate_unicycle(s, cmd, dt * lo);
    out.x = p.x;
    out.y = p.y;
    return out;
}

Eigen::Vector3d CameraPose::to_camera(const Eigen::Vector3d& p) const
{
    const Eigen::Vector3d d = p - position;
    const Eigen::Vector3d fwd(std::cos(yaw), std::sin(yaw), 0.0);
    const Eigen::Vector3d right(std::sin(yaw), -std::cos(yaw), 0.0);
    return {d.dot(right), -d.z(), d.dot(fwd)};
}

Eigen::Vector3d CameraPose::to_map(const Eigen::Vector3d& c) const
{
    const Eigen::Vector3d fwd(std::cos(yaw), std::sin(yaw), 0.0);
    const Eigen::Vector3d right(std::sin(yaw), -std::cos(yaw), 0.0);
    return position + right * c.x() + Eigen::Vector3d(0, 0, -1) * c.y() + fwd * c.z();
}

CameraPose camera_pose(const CameraSpec& cam, const RobotState& robot)
{
    const double c = std::cos(robot.theta), s = std::sin(robot.theta);
    return {Eigen::Vector3d(robot.x + c * cam.mount_x - s * cam.mount_y,
                            robot.y + s * cam.mount_x + c * cam.mount_y, cam.mount_z),
            robot.theta};
}

namespace {

struct BaseView
{
    std::size_t cylinder{0};
    PlateFace face{PlateFace::Front};
    Eigen::Vector3d center_map;
    Eigen::Vector3d center_cam;
    double bearing{0.0};       ///< horizontal angle from the optical axis, + to the right
    double half_width{0.0};    ///< apparent angular half width
};

/// Range, incidence and occlusion tests; the field-of-view test is left to callers.
std::optional<BaseView> view_base(const WorldSpec& world, const CameraPose& cp,
                                  std::size_t ci, PlateFace face)
{
    const CameraSpec& cam = world.camera;
    const CylinderTruth& cyl = world.cylinders[ci];
    const Vec2 b = cyl.base_center(face);
    const Eigen::Vector3d b3(b.x, b.y, 0.5 * cyl.diameter);
    if ((b3 - cp.position).norm() > cam.max_detect_range) return std::nullopt;

    const Vec2 cam2(cp.position.x(), cp.position.y());
    const Vec2 to_cam = cam2 - b;
    if (to_cam.norm() < 1e-9) return std::nullopt;
    const double cos_inc = to_cam.normalized().dot(cyl.base_normal(face));
    const double incidence = std::acos(std::clamp(cos_inc, -1.0, 1.0));
    if (incidence > cam.max_incidence) return std::nullopt;

    const Eigen::Vector3d c = cp.to_camera(b3);
    if (c.z() <= 1e-6) return std::nullopt;

    for (const auto& w : world.walls)
        if (segment_hits(cam2, b, w)) return std::nullopt;
    for (std::size_t j = 0; j < world.cylinders.size(); ++j) {
        if (j == ci) continue;
        for (const auto& e : world.cylinders[j].footprint().edges())
            if (segment_hits(cam2, b, e)) return std::nullopt;
    }

    BaseView v;
    v.cylinder = ci;
    v.face = face;
    v.center_map = b3;
    v.center_cam = c;
    v.bearing = std::atan2(c.x(), c.z());
    v.half_width = std::atan2(0.5 * cyl.diameter * std::max(cos_inc, 0.0), std::hypot(c.x(), c.z()));
    return v;
}

}  // namespace

std::vector<PlateDetection> detect_plates(const WorldSpec& world, const RobotState& pose,
                                          Rng* depth_rng)
{
    const CameraSpec& cam = world.camera;
    const CameraPose cp = camera_pose(cam, pose);
    const double half_fov = 0.5 * cam.hfov;
    std::normal_distribution<double> noise(0.0, cam.depth_noise_sigma);
    const bool noisy = depth_rng != nullptr && cam.depth_noise_sigma > 0.0;

    std::vector<PlateDetection> out;
    for (std::size_t i = 0; i < world.cylinders.size(); ++i) {
        auto v = view_base(world, cp, i, world.cylinders[i].plate_face);
        if (!v || std::abs(v->bearing) > half_fov) continue;

        const Eigen::Vector3d& c = v->center_cam;
        double x = cam.focal_length * c.x() / c.z();
        const double y = cam.focal_length * c.y() / c.z();
        if (cam.partial_view_bias) {
            // A detector fed a clipped plate reports the centre of the visible part.
            const double lo = std::max(v->bearing - v->half_width, -half_fov);
            const double hi = std::min(v->bearing + v->half_width, half_fov);
            x = cam.focal_length * std::tan(0.5 * (lo + hi));
        }
        PlateDetection d;
        d.pixel_x = 0.5 * cam.image_width + x;
        d.pixel_y = 0.5 * cam.image_height + y;
        if (d.pixel_x < 0.0 || d.pixel_x >= cam.image_width || d.pixel_y < 0.0 ||
            d.pixel_y >= cam.image_height)
            continue;
        double depth = c.z();
        if (noisy) depth += noise(*depth_rng);
        d.depth = std::max(depth, 1e-3);
        d.tag_id = world.cylinders[i].tag_id;
        out.push_back(std::move(d));
    }
    return out;
}

namespace {

std::optional<BaseView> nearest_visible_base(const WorldSpec& world, const CameraPose& cp,
                                             const Eigen::Vector3d& center, double half_edge)
{
    std::optional<BaseView> best;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < world.cylinders.size(); ++i) {
        for (PlateFace f : {PlateFace::Front, PlateFace::Rear}) {
            auto v = view_base(world, cp, i, f);
            if (!v || std::abs(v->bearing) > 0.5 * world.camera.hfov + v->half_width) continue;
            const double d = (v->center_map - center).norm();
            const double reach = half_edge + 0.5 * world.cylinders[i].diameter;
            if (d <= reach && d < best_d) {
                best_d = d;
                best = v;
            }
        }
    }
    return best;
}

}  // namespace

PointCloud sample_plate_pointcloud(const WorldSpec& world, const RobotState& pose,
                                   const Eigen::Vector3d& center, double half_edge, Rng& rng)
{
    const CameraPose cp = camera_pose(world.camera, pose);
    auto v = nearest_visible_base(world, cp, center, half_edge);
    if (!v) return {};

    const CylinderTruth& cyl = world.cylinders[v->cylinder];
    const Vec2 n2 = cyl.base_normal(v->face);
    const Eigen::Vector3d n(n2.x, n2.y, 0.0);
    const Eigen::Vector3d e1(-n2.y, n2.x, 0.0);
    const Eigen::Vector3d e2(0.0, 0.0, 1.0);
    const double radius = 0.5 * cyl.diameter;
    const PatchSpec& P = world.patch;

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> cube(-half_edge, half_edge);
    std::normal_distribution<double> along(0.0, P.normal_sigma);

    PointCloud cloud;
    cloud.reserve(static_cast<std::size_t>(P.points));
    for (int k = 0; k < P.points; ++k) {
        Eigen::Vector3d p;
        if (unit(rng) < P.outlier_fraction) {
            p = center + Eigen::Vector3d(cube(rng), cube(rng), cube(rng));
        } else {
            const double r = radius * std::sqrt(unit(rng));
            const double phi = 2.0 * kPi * unit(rng);
            p = v->center_map + e1 * (r * std::cos(phi)) + e2 * (r * std::sin(phi));
            if (P.normal_sigma > 0.0) p += n * along(rng);
        }
        if ((p - center).cwiseAbs().maxCoeff() > half_edge) continue;
        cloud.push_back(cp.to_camera(p));
    }
    return cloud;
}

std::optional<std::pair<Eigen::Vector3d, double>> plate_plane_camera(
    const WorldSpec& world, const RobotState& pose, const Eigen::Vector3d& center, double half_edge)
{
    const CameraPose cp = camera_pose(world.camera, pose);
    auto v = nearest_visible_base(world, cp, center, half_edge);
    if (!v) return std::nullopt;
    const Vec2 n2 = world.cylinders[v->cylinder].base_normal(v->face);
    const Eigen::Vector3d n_cam =
        cp.to_camera(v->center_map + Eigen::Vector3d(n2.x, n2.y, 0.0)) - v->center_cam;
    return std::make_pair(n_cam, -n_cam.dot(v->center_cam));
}

Simulator::Simulator(const WorldSpec& world, const RobotState& start, std::uint64_t seed)
    : world_(world), state_(start), lidar_rng_(make_rng(seed, 1)), depth_rng_(make_rng(seed, 2)),
      cloud_rng_(make_rng(seed, 3)), ransac_rng_(make_rng(seed, 4)), pose_rng_(make_rng(seed, 5))
{
    world_.validate();
    if (!world_.inside_field(start.position()))
        throw ScenarioError("robot start pose lies outside the field");
}

Scan Simulator::scan() { return raycast_lidar(world_, state_, &lidar_rng_); }

std::vector<PlateDetection> Simulator::detect() { return detect_plates(world_, state_, &depth_rng_); }

PointCloud Simulator::sample_cloud(const Eigen::Vector3d& center_map, double half_edge)
{
    return sample_plate_pointcloud(world_, state_, center_map, half_edge, cloud_rng_);
}

void Simulator::step(Command cmd, double dt)
{
    const Vec2 before = state_.position();
    state_ = step_robot(world_, state_, cmd, dt);
    odometer_ += distance(before, state_.position());
    time_ += dt;
}

}  // namespace world
}  // namespace rim
