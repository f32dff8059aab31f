#include "rim/perception.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <Eigen/Eigenvalues>

namespace rim::perception {

Eigen::Vector2d project(const Eigen::Vector3d& p, double f)
{
    return {f * p.x() / p.z(), f * p.y() / p.z()};
}

Eigen::Vector3d back_project(double x, double y, double depth, double f)
{
    if (!(depth > 0.0)) throw InvalidDetection("detection depth must be positive");
    return {x * depth / f, y * depth / f, depth};
}

Eigen::Vector3d localize_plate(const world::PlateDetection& det, const world::CameraSpec& cam)
{
    return back_project(det.pixel_x - 0.5 * cam.image_width, det.pixel_y - 0.5 * cam.image_height,
                        det.depth, cam.focal_length);
}

Eigen::Isometry3d camera_extrinsics(const world::CameraSpec& cam)
{
    Eigen::Matrix3d r;
    // Columns: camera X (right), Y (down), Z (forward) in the base frame.
    r << 0, 0, 1,
        -1, 0, 0,
         0, -1, 0;
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    t.linear() = r;
    t.translation() = Eigen::Vector3d(cam.mount_x, cam.mount_y, cam.mount_z);
    return t;
}

Eigen::Isometry3d base_pose(const world::RobotState& robot)
{
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    t.linear() = Eigen::AngleAxisd(robot.theta, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    t.translation() = Eigen::Vector3d(robot.x, robot.y, 0.0);
    return t;
}

Eigen::Vector3d to_map_frame(const Eigen::Vector3d& p_cam, const world::RobotState& robot,
                             const Eigen::Isometry3d& extrinsics)
{
    return base_pose(robot) * extrinsics * p_cam;
}

std::optional<PlaneFit> fit_vertical_plane_ransac(const world::PointCloud& cloud,
                                                  const RansacParams& params, Rng& rng,
                                                  const Eigen::Vector3d& up_in)
{
    const std::size_t n = cloud.size();
    if (n < 3) return std::nullopt;
    const Eigen::Vector3d up = up_in.normalized();
    const double max_vertical = std::sin(params.vertical_tol);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);

    std::size_t best_count = 0;
    Eigen::Vector3d best_n = Eigen::Vector3d::Zero();
    double best_d = 0.0;
    for (int it = 0; it < params.max_iters; ++it) {
        const std::size_t a = pick(rng);
        std::size_t b = pick(rng);
        std::size_t c = pick(rng);
        if (a == b || b == c || a == c) continue;
        Eigen::Vector3d nrm = (cloud[b] - cloud[a]).cross(cloud[c] - cloud[a]);
        const double len = nrm.norm();
        if (len < 1e-12) continue;
        nrm /= len;
        if (std::abs(nrm.dot(up)) > max_vertical) continue;
        const double d = -nrm.dot(cloud[a]);
        std::size_t count = 0;
        for (const auto& p : cloud)
            if (std::abs(nrm.dot(p) + d) <= params.dist_thresh) ++count;
        if (count > best_count) {
            best_count = count;
            best_n = nrm;
            best_d = d;
        }
    }
    if (best_count == 0 || static_cast<double>(best_count) / n < params.min_inliers) return std::nullopt;

    // Least-squares refinement over the consensus set.
    Eigen::Vector3d mean = Eigen::Vector3d::Zero();
    std::vector<const Eigen::Vector3d*> in;
    for (const auto& p : cloud)
        if (std::abs(best_n.dot(p) + best_d) <= params.dist_thresh) {
            in.push_back(&p);
            mean += p;
        }
    mean /= static_cast<double>(in.size());
    Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
    for (const auto* p : in) cov += (*p - mean) * (*p - mean).transpose();
    Eigen::Vector3d nrm = best_n;
    if (in.size() >= 3) {
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
        const Eigen::Vector3d refined = es.eigenvectors().col(0);
        if (std::abs(refined.dot(up)) <= max_vertical) nrm = refined;
    }

    // Force exactly vertical, then face the sensor origin.
    nrm -= nrm.dot(up) * up;
    if (nrm.norm() < 1e-12) return std::nullopt;
    nrm.normalize();
    if (nrm.dot(-mean) < 0.0) nrm = -nrm;

    PlaneFit fit;
    fit.normal = nrm;
    fit.offset = -nrm.dot(mean);
    fit.inliers = best_count;
    fit.inlier_ratio = static_cast<double>(best_count) / n;
    return fit;
}

Vec2 axis_from_normal(const Eigen::Vector3d& normal_map)
{
    return Vec2{-normal_map.x(), -normal_map.y()}.normalized();
}

void write_cloud_csv(const std::filesystem::path& path, const world::PointCloud& cloud)
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    char buf[96];
    for (const auto& p : cloud) {
        std::snprintf(buf, sizeof buf, "%.6f,%.6f,%.6f\n", p.x(), p.y(), p.z());
        out << buf;
    }
}

std::vector<CylinderObservation> observe(world::Simulator& sim, const ObserveOptions& opts)
{
    const auto& cam = sim.world().camera;
    const Eigen::Isometry3d extr = camera_extrinsics(cam);
    const world::RobotState robot = sim.state();
    const Eigen::Isometry3d map_from_cam = base_pose(robot) * extr;
    const Eigen::Vector3d up_cam = map_from_cam.linear().transpose() * Eigen::Vector3d::UnitZ();

    std::vector<CylinderObservation> out;
    for (const auto& det : sim.detect()) {
        CylinderObservation obs;
        obs.tag_id = det.tag_id;
        obs.observer_pose = robot;
        try {
            obs.position = to_map_frame(localize_plate(det, cam), robot, extr);
        } catch (const InvalidDetection&) {
            continue;
        }
        const auto cloud = sim.sample_cloud(obs.position, opts.half_edge);
        if (opts.cloud_dump_dir) {
            std::filesystem::create_directories(*opts.cloud_dump_dir);
            char name[96];
            std::snprintf(name, sizeof name, "cloud_t%09.3f_%s.csv", sim.time(), det.tag_id.c_str());
            write_cloud_csv(*opts.cloud_dump_dir / name, cloud);
        }
        if (auto fit = fit_vertical_plane_ransac(cloud, opts.ransac, sim.ransac_rng(), up_cam)) {
            obs.axis = axis_from_normal(map_from_cam.linear() * fit->normal);
            obs.axis_valid = true;
            obs.inlier_ratio = fit->inlier_ratio;
        }
        out.push_back(std::move(obs));
    }
    return out;
}

}  // namespace rim::perception
