#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "rim/geometry.hpp"
#include "rim/occupancy.hpp"

namespace rim::gridproc {

/// Inverted map image: true = obstacle. Pixel (i, j) is grid cell (i, j).
struct BinaryImage
{
    int width{0};
    int height{0};
    std::vector<std::uint8_t> bits;
    /// Unknown cells of the source map, kept for the open-contour test.
    std::vector<std::uint8_t> unknown;

    BinaryImage() = default;
    BinaryImage(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0),
                                unknown(static_cast<std::size_t>(w) * h, 0) {}

    bool operator==(const BinaryImage&) const = default;

    bool in_bounds(int i, int j) const { return i >= 0 && j >= 0 && i < width && j < height; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * width + i; }
    bool get(int i, int j) const { return bits[index(i, j)] != 0; }
    void set(int i, int j, bool v) { bits[index(i, j)] = v ? 1 : 0; }
    std::size_t count() const;
};

struct Contour
{
    std::vector<Vec2> points;   ///< outer boundary pixels, in tracing order
    std::size_t pixel_count{0}; ///< size of the traced component
    bool open{false};
    bool touches_border{false};
    bool touches_unknown{false};  ///< adjacent to any unknown cell outside the component
};

struct RegionOfInterest
{
    std::vector<Vec2> hull;  ///< grid coordinates, counter-clockwise
    Vec2 centroid;           ///< map frame [m]
    double area{0.0};        ///< [m^2]
    bool touches_unknown{false};
};

struct GridProcParams
{
    int kernel_radius{3};
    /// Unknown pockets smaller than this (cells) next to a component do not make it open.
    std::size_t min_unknown_pocket{10};
};

BinaryImage binarize(const occupancy::TrinaryMap& tri);

BinaryImage dilate(const BinaryImage& img, int radius);
/// Out-of-image pixels count as false.
BinaryImage erode(const BinaryImage& img, int radius);
/// Dilation then erosion with a (2r+1) x (2r+1) square.
BinaryImage close(const BinaryImage& img, int kernel_radius);

/// One outer contour per 8-connected component.
std::vector<Contour> find_contours(const BinaryImage& img, std::size_t min_unknown_pocket = 10);

/// Counter-clockwise monotone-chain hull without collinear vertices.
std::vector<Vec2> convex_hull(std::vector<Vec2> points);

struct CylinderDims
{
    double length{1.2};
    double diameter{0.3};
};

/// Drops open contours and hulls smaller than the cylinder's top-down
/// projection; largest region first.
std::vector<RegionOfInterest> filter_regions(const std::vector<Contour>& contours,
                                             const CylinderDims& cyl,
                                             const occupancy::GridGeometry& geom);

struct GridProcResult
{
    BinaryImage binary;
    BinaryImage closed;
    std::vector<Contour> contours;
    std::vector<std::vector<Vec2>> hulls;
    std::vector<RegionOfInterest> regions;
};

GridProcResult process(const occupancy::TrinaryMap& tri, const CylinderDims& cyl,
                       const GridProcParams& params = {});

/// Writes stage_a_map.pgm ... stage_d_regions.pgm into dir.
void write_stage_images(const occupancy::TrinaryMap& tri, const GridProcResult& result,
                        const std::filesystem::path& dir);

}  // namespace rim::gridproc
