#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rim/encircle.hpp"
#include "rim/gridproc.hpp"
#include "rim/occupancy.hpp"
#include "rim/perception.hpp"

namespace rim::richmap {

inline constexpr int kSchemaVersion = 1;

enum class Status { Confirmed, Missing, New };
std::string to_string(Status s);
Status status_from_string(const std::string& s);

struct CylinderRecord
{
    int id{0};
    Eigen::Vector3d position{0, 0, 0};  ///< plate centre, map frame
    double axis_yaw{std::numeric_limits<double>::quiet_NaN()};  ///< into the body; NaN when never estimated
    double length{1.2};
    double diameter{0.3};
    std::string tag_id;
    Status status{Status::Confirmed};
    double first_seen{0.0};
    double last_seen{0.0};

    int observations{1};  ///< running-average weight, not persisted

    bool has_axis() const { return std::isfinite(axis_yaw); }
    Vec2 xy() const { return {position.x(), position.y()}; }
    /// Footprint centre: half a length behind the plate along the axis.
    Vec2 body_center() const;
    OrientedRect footprint() const;

    /// Persisted fields only.
    bool same_persisted(const CylinderRecord& o) const;
};

struct RichMap
{
    occupancy::TrinaryMap grid;
    std::vector<CylinderRecord> records;
    std::vector<gridproc::RegionOfInterest> regions;
    double alpha{0.3};
    nlohmann::json params_snapshot = nlohmann::json::object();

    /// Grid, records (persisted fields) and alpha.
    bool operator==(const RichMap& o) const;

    const CylinderRecord* find(int id) const;
    CylinderRecord* find(int id);
};

struct RegisterResult
{
    bool inserted{false};
    int id{0};
};

struct RegisterContext
{
    double time{0.0};
    Status status_for_new{Status::Confirmed};
    double length{1.2};
    double diameter{0.3};
};

/// Insert when farther than alpha from every non-missing record, otherwise
/// refine the nearest one by running average.
RegisterResult register_observation(RichMap& map, const perception::CylinderObservation& obs,
                                    const RegisterContext& ctx);

/// Records whose status is not missing.
std::size_t count(const RichMap& map);

/// Pairwise distance between non-missing records exceeds alpha.
bool dedup_invariant_holds(const RichMap& map);

/// Single-linkage groups of non-missing record indices, link distance `link`.
std::vector<std::vector<std::size_t>> cluster_piles(const RichMap& map, double link);

class LoadError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

struct BundlePaths
{
    std::filesystem::path pgm, meta, records, ppm;
};
/// `<base>.pgm`, `<base>.meta`, `<base>.records.json`, `<base>.ppm`.
BundlePaths bundle_paths(const std::filesystem::path& base);

nlohmann::json records_to_json(const RichMap& map);
void records_from_json(const nlohmann::json& j, RichMap& map);

/// Writes grid, metadata, records and the render.
void save(const RichMap& map, const std::filesystem::path& base);
/// Throws LoadError on any missing, malformed or version-mismatched part.
RichMap load(const std::filesystem::path& base);

struct RgbImage
{
    int width{0};
    int height{0};
    std::vector<std::uint8_t> rgb;

    std::array<std::uint8_t, 3> at(int x, int y) const;
};

inline constexpr std::array<std::uint8_t, 3> kGreen{0, 200, 0};
inline constexpr std::array<std::uint8_t, 3> kRed{220, 0, 0};

/// Grid in grayscale (free 254, occupied 0, unknown 205) with every record as
/// a filled oriented rectangle: green for confirmed/new, red for missing.
/// Row 0 is the top of the map.
RgbImage render(const RichMap& map, int scale = 4);
void write_ppm(const RgbImage& img, const std::filesystem::path& path);
RgbImage read_ppm(const std::filesystem::path& path);

struct RecheckParams
{
    double standoff{1.2};
    std::vector<double> standoff_fallbacks{1.0, 1.5, 2.0};
    double inflate_radius{0.4};
    bool encircle_stale{false};
    encircle::EncircleParams encircle;
    nav::FollowParams follow;
    perception::ObserveOptions observe;
    double length{1.2};
    double diameter{0.3};
};

struct UpdateReport
{
    std::vector<int> verified;
    std::vector<int> deleted;
    std::vector<int> added;
    std::vector<int> skipped_piles;  ///< pile indices with an unreachable viewpoint or approach
    std::vector<int> stale_piles;    ///< piles with no surviving record
    int piles{0};

    nlohmann::json to_json() const;
};

/// Verify every stored record from its registered viewpoint, mark the unseen
/// ones missing, then encircle each pile to register additions.
UpdateReport recheck(RichMap& map, world::Simulator& sim, const RecheckParams& params,
                     EventLog* log = nullptr);

}  // namespace rim::richmap
