#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "rim/world.hpp"

namespace rim::perception {

class InvalidDetection : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

/// Pinhole projection x = f X / Z, y = f Y / Z (principal-point relative).
Eigen::Vector2d project(const Eigen::Vector3d& p_cam, double focal_length);

/// Inverse projection with measured depth: Z = depth, X = x Z / f, Y = y Z / f.
Eigen::Vector3d back_project(double x, double y, double depth, double focal_length);

/// Camera-frame plate centre from a detection in image coordinates.
Eigen::Vector3d localize_plate(const world::PlateDetection& det, const world::CameraSpec& cam);

/// Base <- camera transform: optical axes (Z forward, X right, Y down) and the mount offset.
Eigen::Isometry3d camera_extrinsics(const world::CameraSpec& cam);
/// Map <- base transform of a planar robot pose.
Eigen::Isometry3d base_pose(const world::RobotState& robot);

Eigen::Vector3d to_map_frame(const Eigen::Vector3d& p_cam, const world::RobotState& robot,
                             const Eigen::Isometry3d& extrinsics);

struct RansacParams
{
    double dist_thresh{0.02};
    int max_iters{200};
    double vertical_tol{deg2rad(15.0)};
    double min_inliers{0.3};
};

struct PlaneFit
{
    Eigen::Vector3d normal;  ///< unit, horizontal, facing the sensor origin
    double offset{0.0};      ///< normal . p + offset = 0
    double inlier_ratio{0.0};
    std::size_t inliers{0};
};

/// RANSAC for a vertical plane (normal within vertical_tol of horizontal), refined
/// by least squares over the inliers. Empty when no acceptable plane exists.
/// `up` is the world vertical expressed in the cloud's frame.
std::optional<PlaneFit> fit_vertical_plane_ransac(const world::PointCloud& cloud,
                                                  const RansacParams& params, Rng& rng,
                                                  const Eigen::Vector3d& up = Eigen::Vector3d(0, -1, 0));

/// Cylinder axis in the map plane from an observer-facing base normal: it points
/// away from the observer, into the cylinder body.
Vec2 axis_from_normal(const Eigen::Vector3d& normal_map);

struct CylinderObservation
{
    Eigen::Vector3d position;  ///< plate centre, map frame
    Vec2 axis;                 ///< unit, map frame; meaningful only if axis_valid
    bool axis_valid{false};
    std::string tag_id;
    world::RobotState observer_pose;
    double inlier_ratio{0.0};
};

struct ObserveOptions
{
    RansacParams ransac;
    double half_edge{0.25};
    std::optional<std::filesystem::path> cloud_dump_dir;
};

/// Detect, localize and estimate the pose of every visible plate. A failed
/// plane fit yields a position-only observation.
std::vector<CylinderObservation> observe(world::Simulator& sim, const ObserveOptions& opts);

void write_cloud_csv(const std::filesystem::path& path, const world::PointCloud& cloud);

}  // namespace rim::perception
