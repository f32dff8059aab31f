#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "rim/geometry.hpp"
#include "rim/world.hpp"

namespace rim::occupancy {

struct Cell
{
    int i{0};  ///< column (x)
    int j{0};  ///< row (y, increasing with map y)
    bool operator==(const Cell&) const = default;
};

/// Geometry shared by every raster of the map: cell (0,0) has its lower-left
/// corner at origin.
struct GridGeometry
{
    double resolution{0.05};
    Vec2 origin;
    int width{0};
    int height{0};

    bool operator==(const GridGeometry&) const = default;

    std::size_t size() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    bool in_bounds(int i, int j) const { return i >= 0 && j >= 0 && i < width && j < height; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * width + i; }
    Cell cell_of(std::size_t idx) const { return {static_cast<int>(idx % width), static_cast<int>(idx / width)}; }
    /// Cell containing p (may be out of bounds).
    Cell world_to_cell(const Vec2& p) const;
    Vec2 cell_center(int i, int j) const;
};

struct LogOddsParams
{
    double l_occ{0.85};
    double l_free{-0.4};
    double l_min{-10.0};
    double l_max{10.0};
    double t_occ{1.0};
    double t_free{-1.0};
};

enum class Occ : std::uint8_t { Free, Occupied, Unknown };

struct TrinaryMap
{
    GridGeometry geom;
    std::vector<Occ> cells;

    TrinaryMap() = default;
    explicit TrinaryMap(const GridGeometry& g, Occ fill = Occ::Unknown) : geom(g), cells(g.size(), fill) {}

    bool operator==(const TrinaryMap&) const = default;

    Occ at(int i, int j) const { return cells[geom.index(i, j)]; }
    Occ& at(int i, int j) { return cells[geom.index(i, j)]; }
    std::size_t count(Occ v) const;
};

class OccupancyGrid
{
public:
    OccupancyGrid(const GridGeometry& geom, const LogOddsParams& params = {});

    /// Grid covering [0, width] x [0, height] plus a margin on every side.
    static OccupancyGrid covering(double width, double height, double resolution, double margin,
                                  const LogOddsParams& params = {});

    const GridGeometry& geometry() const { return geom_; }
    const LogOddsParams& params() const { return params_; }
    double logodds(int i, int j) const { return logodds_[geom_.index(i, j)]; }
    void set_logodds(int i, int j, double v);
    /// Adds delta to a cell, clamped to [l_min, l_max].
    void add(int i, int j, double delta);

private:
    GridGeometry geom_;
    LogOddsParams params_;
    std::vector<double> logodds_;
};

/// Cells visited from a to b (Bresenham), excluding b.
std::vector<Cell> trace_cells(Cell a, Cell b);

/// Log-odds update for every beam: l_free on the cells up to the endpoint,
/// l_occ on the endpoint unless the beam returned max range.
void integrate_scan(OccupancyGrid& grid, const world::RobotState& pose, const world::Scan& scan);

TrinaryMap classify(const OccupancyGrid& grid);

struct Frontier
{
    std::vector<Cell> cells;
    Vec2 centroid;
    std::size_t size() const { return cells.size(); }
};

bool is_frontier_cell(const TrinaryMap& tri, int i, int j);

/// 8-connected frontier components of at least min_size cells, largest first.
std::vector<Frontier> find_frontiers(const TrinaryMap& tri, std::size_t min_size);

/// Number of cells classified free or occupied.
std::size_t known_count(const TrinaryMap& tri);

// --- map_server style persistence -------------------------------------------------

class MapIoError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint8_t kPgmOccupied = 0;
inline constexpr std::uint8_t kPgmFree = 254;
inline constexpr std::uint8_t kPgmUnknown = 205;

/// Binary P5 image, top row = largest y; occupied 0, free 254, unknown 205.
void write_pgm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& top_down_pixels);
std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, int& width, int& height);

void save_map(const TrinaryMap& tri, const std::filesystem::path& pgm_path,
              const std::filesystem::path& meta_path);
TrinaryMap load_map(const std::filesystem::path& pgm_path, const std::filesystem::path& meta_path);

}  // namespace rim::occupancy
