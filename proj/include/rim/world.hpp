#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "rim/geometry.hpp"

namespace rim {

/// Raised for invalid scenario content or a pose outside the field.
class ScenarioError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

using Rng = std::mt19937_64;

/// Independent, reproducible random stream derived from a run seed.
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

namespace world {

enum class PlateFace { Front, Rear };

struct CylinderTruth
{
    Vec2 center;
    double yaw{0.0};        ///< axis direction, map frame [rad]
    double length{1.2};     ///< [m]
    double diameter{0.3};   ///< [m]
    PlateFace plate_face{PlateFace::Front};
    std::string tag_id;

    OrientedRect footprint() const { return {center, yaw, length, diameter}; }
    /// Centre of the front (+yaw) or rear base, on the ground plane.
    Vec2 base_center(PlateFace face) const;
    /// Outward unit normal of a base.
    Vec2 base_normal(PlateFace face) const;
    Vec2 plate_center() const { return base_center(plate_face); }
    /// 3D plate centre; the cylinder lies on the floor so the axis sits at diameter/2.
    Eigen::Vector3d plate_center3() const;
};

struct LidarSpec
{
    int beam_count{1440};
    double fov{2.0 * kPi};
    double max_range{10.0};
    double range_noise_sigma{0.0};
    std::uint64_t seed{1};

    double angle_increment() const;
    double beam_angle(int i) const { return -0.5 * fov + i * angle_increment(); }
};

/// Pinhole camera mounted on the robot, looking along the robot heading.
/// Camera frame: Z forward, X right, Y down.
struct CameraSpec
{
    double focal_length{1060.0};  ///< [px]
    int image_width{1920};
    int image_height{1080};
    double hfov{deg2rad(84.0)};
    double max_detect_range{3.5};
    double max_incidence{deg2rad(70.0)};
    double depth_noise_sigma{0.0};
    bool partial_view_bias{false};
    /// Mount offset in the robot base frame (x forward, y left, z up).
    double mount_x{0.1};
    double mount_y{0.0};
    double mount_z{0.4};
};

/// Synthetic depth patch around a plate.
struct PatchSpec
{
    int points{400};
    double normal_sigma{0.005};
    double outlier_fraction{0.2};
    double half_edge{0.25};
};

struct WorldSpec
{
    double field_width{6.0};
    double field_height{10.0};
    std::vector<Segment> walls;
    std::vector<CylinderTruth> cylinders;
    LidarSpec lidar;
    CameraSpec camera;
    PatchSpec patch;
    double robot_radius{0.3};

    /// Throws ScenarioError when an invariant is broken.
    void validate() const;
    bool inside_field(const Vec2& p) const;
    /// Walls plus every cylinder footprint edge.
    std::vector<Segment> obstacle_segments() const;
    /// The four field-boundary walls.
    static std::vector<Segment> boundary_walls(double width, double height);
};

struct Command
{
    double v{0.0};
    double omega{0.0};
};

struct RobotState
{
    double x{0.0};
    double y{0.0};
    double theta{0.0};
    Command commanded;

    Vec2 position() const { return {x, y}; }
};

struct Scan
{
    double angle_min{0.0};
    double angle_increment{0.0};
    double max_range{0.0};
    std::vector<double> ranges;

    double angle(std::size_t i) const { return angle_min + static_cast<double>(i) * angle_increment; }
    /// Minimum range over beams whose relative angle lies in [lo, hi] (radians, wrapped).
    double min_in_sector(double lo, double hi) const;
    double mean_in_sector(double lo, double hi, bool* all_max = nullptr) const;
    /// q-quantile (0 = min) of the ranges in [lo, hi]; max range for an empty sector.
    double quantile_in_sector(double lo, double hi, double q) const;
};

/// Noise-free when rng is null or the range sigma is zero.
Scan raycast_lidar(const WorldSpec& world, const RobotState& pose, Rng* rng = nullptr);

/// Exact unicycle integration, no obstacles.
RobotState integrate_unicycle(const RobotState& s, Command cmd, double dt);

/// Unicycle step in the world; translation halts at contact with any wall or
/// footprint (robot treated as a disc of world.robot_radius).
RobotState step_robot(const WorldSpec& world, const RobotState& s, Command cmd, double dt);

/// Clearance between the robot disc and the nearest obstacle (negative on overlap).
double clearance(const WorldSpec& world, const Vec2& p, double radius);

struct PlateDetection
{
    double pixel_x{0.0};  ///< image coordinates, origin at the top-left
    double pixel_y{0.0};
    double depth{0.0};
    std::string tag_id;
};

/// Camera pose derived from a robot pose and the camera mount.
struct CameraPose
{
    Eigen::Vector3d position;
    double yaw{0.0};

    Eigen::Vector3d to_camera(const Eigen::Vector3d& p_map) const;
    Eigen::Vector3d to_map(const Eigen::Vector3d& p_cam) const;
};

CameraPose camera_pose(const CameraSpec& cam, const RobotState& robot);

std::vector<PlateDetection> detect_plates(const WorldSpec& world, const RobotState& pose,
                                          Rng* depth_rng = nullptr);

using PointCloud = std::vector<Eigen::Vector3d>;

/// Points on the visible base disc nearest to plate_center_map, in the camera
/// frame, cropped to an axis-aligned cube of the given half edge.
PointCloud sample_plate_pointcloud(const WorldSpec& world, const RobotState& pose,
                                   const Eigen::Vector3d& plate_center_map, double half_edge,
                                   Rng& rng);

/// Ground-truth plane of the base chosen by sample_plate_pointcloud, in the camera
/// frame (unit normal n, offset d with n.p + d = 0). Empty if none is visible.
std::optional<std::pair<Eigen::Vector3d, double>> plate_plane_camera(
    const WorldSpec& world, const RobotState& pose, const Eigen::Vector3d& plate_center_map,
    double half_edge);

/// Sequential simulator: owns the robot state, simulated clock and noise streams.
class Simulator
{
public:
    Simulator(const WorldSpec& world, const RobotState& start, std::uint64_t seed);

    const WorldSpec& world() const { return world_; }
    const RobotState& state() const { return state_; }
    double time() const { return time_; }
    double distance_travelled() const { return odometer_; }

    void set_state(const RobotState& s) { state_ = s; }
    Scan scan();
    std::vector<PlateDetection> detect();
    PointCloud sample_cloud(const Eigen::Vector3d& center_map, double half_edge);
    void step(Command cmd, double dt);
    /// Advances the clock with the robot stationary.
    void wait(double dt) { time_ += dt; }

    Rng& ransac_rng() { return ransac_rng_; }
    Rng& pose_noise_rng() { return pose_rng_; }

private:
    WorldSpec world_;
    RobotState state_;
    double time_{0.0};
    double odometer_{0.0};
    Rng lidar_rng_;
    Rng depth_rng_;
    Rng cloud_rng_;
    Rng ransac_rng_;
    Rng pose_rng_;
};

}  // namespace world
}  // namespace rim
