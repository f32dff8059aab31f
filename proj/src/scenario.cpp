#include "rim/scenario.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace rim {

namespace {

YAML::Node merge(const YAML::Node& base, const YAML::Node& over)
{
    if (!base.IsMap() || !over.IsMap()) return YAML::Clone(over);
    YAML::Node out = YAML::Clone(base);
    for (const auto& kv : over) {
        const auto key = kv.first.as<std::string>();
        out[key] = out[key] ? merge(out[key], kv.second) : YAML::Clone(kv.second);
    }
    return out;
}

YAML::Node load_chain(const std::filesystem::path& path, int depth)
{
    if (depth > 8) throw ScenarioError("scenario extends chain too deep at " + path.string());
    YAML::Node n;
    try {
        n = YAML::LoadFile(path.string());
    } catch (const YAML::BadFile&) {
        throw ScenarioError("cannot open scenario " + path.string());
    } catch (const YAML::Exception& e) {
        throw ScenarioError("scenario " + path.string() + ": " + e.what());
    }
    if (!n.IsMap()) throw ScenarioError("scenario " + path.string() + " is not a mapping");
    if (n["extends"]) {
        const auto parent = path.parent_path() / n["extends"].as<std::string>();
        YAML::Node base = load_chain(parent, depth + 1);
        n.remove("extends");
        return merge(base, n);
    }
    return n;
}

// Recursion keeps each level a fresh handle; reassigning a yaml-cpp node would
// overwrite its target instead of rebinding.
void set_path(YAML::Node node, const std::vector<std::string>& parts, std::size_t k, const YAML::Node& value,
              const std::string& key)
{
    if (k + 1 == parts.size()) {
        node[parts[k]] = value;
        return;
    }
    if (!node[parts[k]] || node[parts[k]].IsNull()) node[parts[k]] = YAML::Node(YAML::NodeType::Map);
    if (!node[parts[k]].IsMap()) throw ScenarioError("override " + key + ": '" + parts[k] + "' is not a section");
    set_path(node[parts[k]], parts, k + 1, value, key);
}

void apply_override(YAML::Node& root, const Override& ov)
{
    std::vector<std::string> parts;
    std::stringstream ss(ov.first);
    for (std::string p; std::getline(ss, p, '.');) {
        if (p.empty()) throw ScenarioError("bad override key '" + ov.first + "'");
        parts.push_back(p);
    }
    YAML::Node value;
    try {
        value = YAML::Load(ov.second);
    } catch (const YAML::Exception& e) {
        throw ScenarioError("bad override value for " + ov.first + ": " + e.what());
    }
    set_path(root, parts, 0, value, ov.first);
}

/// Reads keys from one mapping, records what it resolved and rejects unknown keys.
class Section
{
public:
    Section(const YAML::Node& node, std::string name, nlohmann::json& out)
        : node_(node), name_(std::move(name)), out_(out)
    {
        if (node_ && !node_.IsNull() && !node_.IsMap()) throw ScenarioError(name_ + " must be a mapping");
    }

    template <typename T>
    void get(const char* key, T& v)
    {
        used_.insert(key);
        if (node_ && node_.IsMap() && node_[key]) {
            try {
                v = node_[key].as<T>();
            } catch (const YAML::Exception&) {
                throw ScenarioError(name_ + "." + key + ": wrong type");
            }
        }
        out_[key] = v;
    }

    // Stored in radians, written in degrees.
    void angle(const char* key, double& rad)
    {
        double deg = rad2deg(rad);
        get(key, deg);
        rad = deg2rad(deg);
    }

    void finish() const
    {
        if (!node_ || !node_.IsMap()) return;
        for (const auto& kv : node_) {
            const auto k = kv.first.as<std::string>();
            if (!used_.count(k)) throw ScenarioError("unknown key " + name_ + "." + k);
        }
    }

private:
    YAML::Node node_;
    std::string name_;
    nlohmann::json& out_;
    std::set<std::string> used_;
};

Scenario build(const YAML::Node& root)
{
    Scenario sc;
    nlohmann::json& J = sc.resolved;
    static const std::set<std::string> sections{"name", "seed", "field", "robot", "walls", "cylinder", "cylinders",
                                                "lidar", "camera", "patch", "mapping", "explore", "follow",
                                                "gridproc", "encircle", "ransac", "richmap", "recheck", "expect"};
    for (const auto& kv : root) {
        const auto k = kv.first.as<std::string>();
        if (!sections.count(k)) throw ScenarioError("unknown scenario section '" + k + "'");
    }
    if (root["name"]) sc.name = root["name"].as<std::string>();
    if (root["seed"]) sc.seed = root["seed"].as<std::uint64_t>();
    J["name"] = sc.name;
    J["seed"] = sc.seed;

    auto& W = sc.world;
    {
        Section s(root["field"], "field", J["field"]);
        s.get("width", W.field_width);
        s.get("height", W.field_height);
        s.finish();
    }
    {
        Section s(root["robot"], "robot", J["robot"]);
        sc.start.theta = 0.0;
        s.get("x", sc.start.x);
        s.get("y", sc.start.y);
        s.angle("yaw_deg", sc.start.theta);
        s.get("radius", W.robot_radius);
        s.finish();
    }
    {
        Section s(root["cylinder"], "cylinder", J["cylinder"]);
        s.get("length", sc.cylinder_length);
        s.get("diameter", sc.cylinder_diameter);
        s.finish();
    }

    W.walls = world::WorldSpec::boundary_walls(W.field_width, W.field_height);
    J["walls"] = nlohmann::json::array();
    if (const auto walls = root["walls"]) {
        if (!walls.IsSequence()) throw ScenarioError("walls must be a list of [x0, y0, x1, y1]");
        for (const auto& w : walls) {
            const auto v = w.as<std::vector<double>>();
            if (v.size() != 4) throw ScenarioError("walls entries need 4 numbers");
            W.walls.push_back({{v[0], v[1]}, {v[2], v[3]}});
            J["walls"].push_back(v);
        }
    }

    J["cylinders"] = nlohmann::json::array();
    if (const auto cyl = root["cylinders"]) {
        if (!cyl.IsSequence()) throw ScenarioError("cylinders must be a list");
        int k = 0;
        for (const auto& c : cyl) {
            nlohmann::json cj;
            Section s(c, "cylinders[" + std::to_string(k) + "]", cj);
            world::CylinderTruth t;
            t.length = sc.cylinder_length;
            t.diameter = sc.cylinder_diameter;
            t.tag_id = "C" + std::to_string(k + 1);
            std::string plate = "front";
            s.get("x", t.center.x);
            s.get("y", t.center.y);
            s.angle("yaw_deg", t.yaw);
            s.get("tag", t.tag_id);
            s.get("plate", plate);
            s.finish();
            if (plate == "front") t.plate_face = world::PlateFace::Front;
            else if (plate == "rear") t.plate_face = world::PlateFace::Rear;
            else throw ScenarioError("cylinders[" + std::to_string(k) + "].plate must be front or rear");
            W.cylinders.push_back(t);
            J["cylinders"].push_back(cj);
            ++k;
        }
    }

    {
        Section s(root["lidar"], "lidar", J["lidar"]);
        s.get("beams", W.lidar.beam_count);
        s.angle("fov_deg", W.lidar.fov);
        s.get("max_range", W.lidar.max_range);
        s.get("noise_sigma", W.lidar.range_noise_sigma);
        s.finish();
    }
    {
        auto& C = W.camera;
        Section s(root["camera"], "camera", J["camera"]);
        s.get("focal_length", C.focal_length);
        s.get("width", C.image_width);
        s.get("height", C.image_height);
        s.angle("hfov_deg", C.hfov);
        s.get("max_range", C.max_detect_range);
        s.angle("max_incidence_deg", C.max_incidence);
        s.get("depth_noise_sigma", C.depth_noise_sigma);
        s.get("partial_view_bias", C.partial_view_bias);
        s.get("mount_x", C.mount_x);
        s.get("mount_y", C.mount_y);
        s.get("mount_z", C.mount_z);
        s.finish();
    }
    {
        Section s(root["patch"], "patch", J["patch"]);
        s.get("points", W.patch.points);
        s.get("normal_sigma", W.patch.normal_sigma);
        s.get("outlier_fraction", W.patch.outlier_fraction);
        s.get("half_edge", W.patch.half_edge);
        s.finish();
        sc.observe.half_edge = W.patch.half_edge;
    }
    {
        auto& M = sc.mapping;
        Section s(root["mapping"], "mapping", J["mapping"]);
        s.get("resolution", M.resolution);
        s.get("margin", M.margin);
        s.get("l_occ", M.logodds.l_occ);
        s.get("l_free", M.logodds.l_free);
        s.get("l_min", M.logodds.l_min);
        s.get("l_max", M.logodds.l_max);
        s.get("t_occ", M.logodds.t_occ);
        s.get("t_free", M.logodds.t_free);
        s.get("pose_noise_xy", M.pose_noise_xy);
        s.angle("pose_noise_theta_deg", M.pose_noise_theta);
        s.finish();
    }
    nav::FollowParams follow;
    {
        Section s(root["follow"], "follow", J["follow"]);
        s.get("dt", follow.dt);
        s.get("lookahead", follow.lookahead);
        s.get("v_max", follow.v_max);
        s.get("omega_max", follow.omega_max);
        s.angle("rotate_threshold_deg", follow.rotate_threshold);
        s.get("goal_tolerance", follow.goal_tolerance);
        s.get("stuck_time", follow.stuck_time);
        s.get("progress_eps", follow.progress_eps);
        s.get("timeout", follow.timeout);
        s.finish();
    }
    {
        auto& E = sc.explore;
        Section s(root["explore"], "explore", J["explore"]);
        s.get("min_frontier", E.min_frontier);
        s.get("frontier_clearance", E.frontier_clearance);
        s.get("inflate_radius", E.inflate_radius);
        s.get("scan_period", E.scan_period);
        s.get("replan_period", E.replan_period);
        s.get("reach_radius", E.reach_radius);
        s.get("blacklist_radius", E.blacklist_radius);
        s.get("max_goal_repeats", E.max_goal_repeats);
        s.get("max_iterations", E.max_iterations);
        s.get("max_time", E.max_time);
        s.get("initial_scans", E.initial_scans);
        s.finish();
        E.follow = follow;
    }
    {
        Section s(root["gridproc"], "gridproc", J["gridproc"]);
        s.get("kernel_radius", sc.gridproc.kernel_radius);
        s.get("min_unknown_pocket", sc.gridproc.min_unknown_pocket);
        s.finish();
    }
    {
        auto& E = sc.encircle;
        Section s(root["encircle"], "encircle", J["encircle"]);
        s.get("beta", E.beta);
        s.get("gamma", E.gamma);
        s.get("kp", E.kp);
        s.get("kd", E.kd);
        s.get("v_follow", E.v_follow);
        s.get("inspect_period", E.inspect_period);
        s.get("quit_after_turns", E.quit_after_turns);
        s.get("corner_jump", E.corner_jump);
        s.get("dt", E.dt);
        s.get("omega_max", E.omega_max);
        s.angle("side_sector_half_deg", E.side_sector_half);
        s.angle("forward_sector_half_deg", E.forward_sector_half);
        s.angle("probe_half_deg", E.probe_half);
        s.get("probe_quantile", E.probe_quantile);
        s.get("corner_advance", E.corner_advance);
        s.get("safety_stop", E.safety_stop);
        s.get("derivative_filter", E.derivative_filter);
        s.get("lost_distance", E.lost_distance);
        s.get("approach_inflate", E.approach_inflate);
        s.get("mask_margin", E.mask_margin);
        s.get("max_time", E.max_time);
        s.finish();
    }
    {
        auto& R = sc.observe.ransac;
        Section s(root["ransac"], "ransac", J["ransac"]);
        s.get("dist_thresh", R.dist_thresh);
        s.get("max_iters", R.max_iters);
        s.angle("vertical_tol_deg", R.vertical_tol);
        s.get("min_inliers", R.min_inliers);
        s.finish();
    }
    {
        Section s(root["richmap"], "richmap", J["richmap"]);
        s.get("alpha", sc.alpha);
        s.get("render_scale", sc.render_scale);
        s.finish();
    }
    {
        auto& R = sc.recheck;
        Section s(root["recheck"], "recheck", J["recheck"]);
        s.get("standoff", R.standoff);
        s.get("standoff_fallbacks", R.standoff_fallbacks);
        s.get("encircle_stale", R.encircle_stale);
        s.finish();
        R.inflate_radius = sc.explore.inflate_radius;
        R.encircle = sc.encircle;
        R.follow = follow;
        R.observe = sc.observe;
        R.length = sc.cylinder_length;
        R.diameter = sc.cylinder_diameter;
    }
    {
        Section s(root["expect"], "expect", J["expect"]);
        s.get("min_found", sc.min_found);
        s.finish();
    }

    W.validate();
    if (!W.inside_field(sc.start.position())) throw ScenarioError("robot start lies outside the field");
    if (!(sc.alpha > 0.0)) throw ScenarioError("richmap.alpha must be positive");
    if (sc.render_scale < 1) throw ScenarioError("richmap.render_scale must be >= 1");
    if (!(sc.mapping.resolution > 0.0)) throw ScenarioError("mapping.resolution must be positive");
    try {
        sc.encircle.validate();
    } catch (const std::invalid_argument& e) {
        throw ScenarioError(e.what());
    }
    return sc;
}

Scenario finish_load(YAML::Node root, const std::vector<Override>& overrides)
{
    for (const auto& ov : overrides) apply_override(root, ov);
    try {
        return build(root);
    } catch (const YAML::Exception& e) {
        throw ScenarioError(std::string("scenario: ") + e.what());
    }
}

}  // namespace

Override parse_override(const std::string& text)
{
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) throw ScenarioError("override must look like key=value: '" + text + "'");
    return {text.substr(0, eq), text.substr(eq + 1)};
}

Scenario load_scenario(const std::filesystem::path& path, const std::vector<Override>& overrides)
{
    return finish_load(load_chain(path, 0), overrides);
}

Scenario parse_scenario_text(const std::string& yaml, const std::vector<Override>& overrides)
{
    YAML::Node root;
    try {
        root = YAML::Load(yaml);
    } catch (const YAML::Exception& e) {
        throw ScenarioError(std::string("scenario: ") + e.what());
    }
    if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    if (!root.IsMap()) throw ScenarioError("scenario is not a mapping");
    return finish_load(root, overrides);
}

}  // namespace rim
