#include "rim/gridproc.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <stdexcept>

namespace rim::gridproc {

using occupancy::Occ;

std::size_t BinaryImage::count() const
{
    return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

BinaryImage binarize(const occupancy::TrinaryMap& tri)
{
    BinaryImage img(tri.geom.width, tri.geom.height);
    for (std::size_t k = 0; k < tri.cells.size(); ++k) {
        img.bits[k] = tri.cells[k] == Occ::Occupied;
        img.unknown[k] = tri.cells[k] == Occ::Unknown;
    }
    return img;
}

namespace {

/// One separable pass of a square structuring element. For erosion,
/// out-of-image samples are false.
BinaryImage morph_pass(const BinaryImage& img, int r, bool horizontal, bool erosion)
{
    BinaryImage out = img;
    for (int j = 0; j < img.height; ++j)
        for (int i = 0; i < img.width; ++i) {
            bool acc = erosion;
            for (int k = -r; k <= r; ++k) {
                const int ni = horizontal ? i + k : i;
                const int nj = horizontal ? j : j + k;
                const bool v = img.in_bounds(ni, nj) && img.get(ni, nj);
                if (erosion ? !v : v) {
                    acc = !erosion;
                    break;
                }
            }
            out.set(i, j, acc);
        }
    return out;
}

}  // namespace

BinaryImage dilate(const BinaryImage& img, int radius)
{
    return morph_pass(morph_pass(img, radius, true, false), radius, false, false);
}

BinaryImage erode(const BinaryImage& img, int radius)
{
    return morph_pass(morph_pass(img, radius, true, true), radius, false, true);
}

BinaryImage close(const BinaryImage& img, int kernel_radius)
{
    if (kernel_radius < 1) throw std::invalid_argument("closing kernel radius must be >= 1");
    return erode(dilate(img, kernel_radius), kernel_radius);
}

namespace {

// Clockwise with j pointing up: W, NW, N, NE, E, SE, S, SW.
constexpr std::array<std::array<int, 2>, 8> kRing{{{-1, 0}, {-1, 1}, {0, 1}, {1, 1},
                                                   {1, 0}, {1, -1}, {0, -1}, {-1, -1}}};

int ring_index(int di, int dj)
{
    for (int k = 0; k < 8; ++k)
        if (kRing[k][0] == di && kRing[k][1] == dj) return k;
    return -1;
}

std::vector<Vec2> trace_outer(const std::vector<int>& labels, int w, int h, int label, int si, int sj)
{
    auto fg = [&](int i, int j) {
        return i >= 0 && j >= 0 && i < w && j < h && labels[static_cast<std::size_t>(j) * w + i] == label;
    };
    std::vector<Vec2> pts{{static_cast<double>(si), static_cast<double>(sj)}};
    int ci = si, cj = sj;
    int back = 0;  // west of the raster-first pixel is background
    int second_i = -1, second_j = -1;
    const std::size_t guard = 8u * static_cast<std::size_t>(w) * h + 16;
    for (std::size_t step = 0; step < guard; ++step) {
        int next = -1;
        for (int k = 1; k <= 8; ++k) {
            const int d = (back + k) % 8;
            if (fg(ci + kRing[d][0], cj + kRing[d][1])) {
                next = d;
                break;
            }
        }
        if (next < 0) break;  // isolated pixel
        const int ni = ci + kRing[next][0], nj = cj + kRing[next][1];
        if (ci == si && cj == sj && second_i >= 0 && ni == second_i && nj == second_j) break;
        if (second_i < 0) {
            second_i = ni;
            second_j = nj;
        }
        // The neighbour examined just before `next` is background and borders n.
        const int pd = (next + 7) % 8;
        const int pi = ci + kRing[pd][0], pj = cj + kRing[pd][1];
        back = ring_index(pi - ni, pj - nj);
        ci = ni;
        cj = nj;
        pts.push_back({static_cast<double>(ci), static_cast<double>(cj)});
    }
    if (pts.size() > 1 && pts.back() == pts.front()) pts.pop_back();
    return pts;
}

}  // namespace

std::vector<Contour> find_contours(const BinaryImage& img, std::size_t min_unknown_pocket)
{
    const int w = img.width, h = img.height;
    const std::size_t n = img.bits.size();

    // 8-connected foreground components, labelled in raster order.
    std::vector<int> labels(n, -1);
    std::vector<std::array<int, 2>> firsts;
    std::vector<std::size_t> sizes;
    std::deque<std::size_t> q;
    for (std::size_t idx = 0; idx < n; ++idx) {
        if (!img.bits[idx] || labels[idx] >= 0) continue;
        const int lab = static_cast<int>(firsts.size());
        firsts.push_back({static_cast<int>(idx % w), static_cast<int>(idx / w)});
        sizes.push_back(0);
        labels[idx] = lab;
        q.push_back(idx);
        while (!q.empty()) {
            const std::size_t c = q.front();
            q.pop_front();
            ++sizes[lab];
            const int ci = static_cast<int>(c % w), cj = static_cast<int>(c / w);
            for (const auto& d : kRing) {
                const int ni = ci + d[0], nj = cj + d[1];
                if (!img.in_bounds(ni, nj)) continue;
                const std::size_t m = img.index(ni, nj);
                if (img.bits[m] && labels[m] < 0) {
                    labels[m] = lab;
                    q.push_back(m);
                }
            }
        }
    }

    // 4-connected unknown pockets among background pixels, with their sizes.
    std::vector<int> pocket(n, -1);
    std::vector<std::size_t> pocket_size;
    const bool has_unknown = img.unknown.size() == n;
    if (has_unknown) {
        for (std::size_t idx = 0; idx < n; ++idx) {
            if (img.bits[idx] || !img.unknown[idx] || pocket[idx] >= 0) continue;
            const int lab = static_cast<int>(pocket_size.size());
            pocket_size.push_back(0);
            pocket[idx] = lab;
            q.push_back(idx);
            while (!q.empty()) {
                const std::size_t c = q.front();
                q.pop_front();
                ++pocket_size[lab];
                const int ci = static_cast<int>(c % w), cj = static_cast<int>(c / w);
                for (int k = 0; k < 8; k += 2) {
                    const int ni = ci + kRing[k][0], nj = cj + kRing[k][1];
                    if (!img.in_bounds(ni, nj)) continue;
                    const std::size_t m = img.index(ni, nj);
                    if (!img.bits[m] && img.unknown[m] && pocket[m] < 0) {
                        pocket[m] = lab;
                        q.push_back(m);
                    }
                }
            }
        }
    }

    std::vector<Contour> out;
    out.reserve(firsts.size());
    for (std::size_t lab = 0; lab < firsts.size(); ++lab) {
        Contour c;
        c.pixel_count = sizes[lab];
        c.points = trace_outer(labels, w, h, static_cast<int>(lab), firsts[lab][0], firsts[lab][1]);

        // Bounding box of the traced boundary, padded by one pixel.
        int i0 = w, i1 = -1, j0 = h, j1 = -1;
        for (const auto& p : c.points) {
            i0 = std::min(i0, static_cast<int>(p.x));
            i1 = std::max(i1, static_cast<int>(p.x));
            j0 = std::min(j0, static_cast<int>(p.y));
            j1 = std::max(j1, static_cast<int>(p.y));
        }
        c.touches_border = i0 == 0 || j0 == 0 || i1 == w - 1 || j1 == h - 1;

        if (has_unknown && !c.touches_border) {
            // Background reachable from the padded box edge is exterior; the rest are holes.
            const int bi0 = i0 - 1, bj0 = j0 - 1, bw = i1 - i0 + 3, bh = j1 - j0 + 3;
            std::vector<std::uint8_t> ext(static_cast<std::size_t>(bw) * bh, 0);
            auto local = [&](int i, int j) { return static_cast<std::size_t>(j - bj0) * bw + (i - bi0); };
            auto is_comp = [&](int i, int j) { return labels[img.index(i, j)] == static_cast<int>(lab); };
            std::deque<std::array<int, 2>> bq;
            for (int i = bi0; i < bi0 + bw; ++i)
                for (int j : {bj0, bj0 + bh - 1})
                    if (!ext[local(i, j)] && !is_comp(i, j)) { ext[local(i, j)] = 1; bq.push_back({i, j}); }
            for (int j = bj0; j < bj0 + bh; ++j)
                for (int i : {bi0, bi0 + bw - 1})
                    if (!ext[local(i, j)] && !is_comp(i, j)) { ext[local(i, j)] = 1; bq.push_back({i, j}); }
            while (!bq.empty()) {
                const auto [ci, cj] = bq.front();
                bq.pop_front();
                for (int k = 0; k < 8; k += 2) {
                    const int ni = ci + kRing[k][0], nj = cj + kRing[k][1];
                    if (ni < bi0 || nj < bj0 || ni >= bi0 + bw || nj >= bj0 + bh) continue;
                    if (ext[local(ni, nj)] || is_comp(ni, nj)) continue;
                    ext[local(ni, nj)] = 1;
                    bq.push_back({ni, nj});
                }
            }
            for (int j = j0; j <= j1 && !c.open; ++j)
                for (int i = i0; i <= i1 && !c.open; ++i) {
                    if (!is_comp(i, j)) continue;
                    for (const auto& d : kRing) {
                        const int ni = i + d[0], nj = j + d[1];
                        const std::size_t m = img.index(ni, nj);
                        if (!ext[local(ni, nj)] || pocket[m] < 0) continue;
                        c.touches_unknown = true;
                        if (pocket_size[static_cast<std::size_t>(pocket[m])] >= min_unknown_pocket) {
                            c.open = true;
                            break;
                        }
                    }
                }
        }
        if (c.touches_border) c.open = true;
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<Vec2> convex_hull(std::vector<Vec2> pts)
{
    std::sort(pts.begin(), pts.end(), [](const Vec2& a, const Vec2& b) {
        return a.x < b.x || (a.x == b.x && a.y < b.y);
    });
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (pts.size() < 3) return pts;

    std::vector<Vec2> hull(2 * pts.size());
    std::size_t k = 0;
    auto turn = [](const Vec2& o, const Vec2& a, const Vec2& b) { return (a - o).cross(b - o); };
    for (const auto& p : pts) {
        while (k >= 2 && turn(hull[k - 2], hull[k - 1], p) <= 0.0) --k;
        hull[k++] = p;
    }
    const std::size_t lower = k + 1;
    for (auto it = pts.rbegin() + 1; it != pts.rend(); ++it) {
        while (k >= lower && turn(hull[k - 2], hull[k - 1], *it) <= 0.0) --k;
        hull[k++] = *it;
    }
    hull.resize(k - 1);
    return hull;
}

std::vector<RegionOfInterest> filter_regions(const std::vector<Contour>& contours,
                                             const CylinderDims& cyl,
                                             const occupancy::GridGeometry& geom)
{
    const double min_area = cyl.length * cyl.diameter;
    const double res2 = geom.resolution * geom.resolution;
    std::vector<RegionOfInterest> out;
    for (const auto& c : contours) {
        if (c.open || c.points.empty()) continue;
        RegionOfInterest r;
        r.hull = convex_hull(c.points);
        r.area = polygon_area(r.hull) * res2;
        if (r.area < min_area) continue;
        const Vec2 cg = polygon_centroid(r.hull);
        r.centroid = geom.origin + Vec2{cg.x + 0.5, cg.y + 0.5} * geom.resolution;
        r.touches_unknown = c.touches_unknown;
        out.push_back(std::move(r));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const RegionOfInterest& a, const RegionOfInterest& b) { return a.area > b.area; });
    return out;
}

GridProcResult process(const occupancy::TrinaryMap& tri, const CylinderDims& cyl,
                       const GridProcParams& params)
{
    GridProcResult r;
    r.binary = binarize(tri);
    r.closed = close(r.binary, params.kernel_radius);
    r.contours = find_contours(r.closed, params.min_unknown_pocket);
    for (const auto& c : r.contours) r.hulls.push_back(convex_hull(c.points));
    r.regions = filter_regions(r.contours, cyl, tri.geom);
    return r;
}

namespace {

void draw_line(std::vector<std::uint8_t>& px, int w, int h, Vec2 a, Vec2 b, std::uint8_t v)
{
    const auto cells = occupancy::trace_cells({static_cast<int>(a.x), static_cast<int>(a.y)},
                                              {static_cast<int>(b.x), static_cast<int>(b.y)});
    for (const auto& c : cells)
        if (c.i >= 0 && c.j >= 0 && c.i < w && c.j < h)
            px[static_cast<std::size_t>(h - 1 - c.j) * w + c.i] = v;
}

std::vector<std::uint8_t> to_top_down(const BinaryImage& img)
{
    std::vector<std::uint8_t> px(img.bits.size());
    for (int j = 0; j < img.height; ++j)
        for (int i = 0; i < img.width; ++i)
            px[static_cast<std::size_t>(img.height - 1 - j) * img.width + i] = img.get(i, j) ? 255 : 0;
    return px;
}

}  // namespace

void write_stage_images(const occupancy::TrinaryMap& tri, const GridProcResult& result,
                        const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    const int w = tri.geom.width, h = tri.geom.height;
    occupancy::save_map(tri, dir / "stage_a_map.pgm", dir / "stage_a_map.meta");
    occupancy::write_pgm(dir / "stage_b_closed.pgm", w, h, to_top_down(result.closed));

    std::vector<std::uint8_t> c(static_cast<std::size_t>(w) * h, 0);
    for (std::size_t k = 0; k < result.contours.size(); ++k) {
        for (const auto& p : result.contours[k].points)
            c[static_cast<std::size_t>(h - 1 - static_cast<int>(p.y)) * w + static_cast<int>(p.x)] = 255;
        const auto& hull = result.hulls[k];
        for (std::size_t i = 0; i < hull.size(); ++i)
            draw_line(c, w, h, hull[i], hull[(i + 1) % hull.size()], 128);
    }
    occupancy::write_pgm(dir / "stage_c_contours.pgm", w, h, c);

    std::vector<std::uint8_t> d(static_cast<std::size_t>(w) * h, 0);
    for (const auto& r : result.regions)
        for (int j = 0; j < h; ++j)
            for (int i = 0; i < w; ++i)
                if (convex_contains(r.hull, {static_cast<double>(i), static_cast<double>(j)}))
                    d[static_cast<std::size_t>(h - 1 - j) * w + i] = 255;
    occupancy::write_pgm(dir / "stage_d_regions.pgm", w, h, d);
}

}  // namespace rim::gridproc
