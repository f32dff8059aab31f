#include <cctype>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "rim/occupancy.hpp"

namespace rim::occupancy {

namespace {

std::string fmt_double(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& in)
{
    std::string tok;
    while (in) {
        const int c = in.peek();
        if (c == EOF) break;
        if (c == '#') {
            std::string line;
            std::getline(in, line);
            continue;
        }
        if (std::isspace(c)) {
            in.get();
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(static_cast<char>(in.get()));
    }
    return tok;
}

}  // namespace

void write_pgm(const std::filesystem::path& path, int width, int height,
               const std::vector<std::uint8_t>& pixels)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw MapIoError("cannot write " + path.string());
    out << "P5\n" << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

std::vector<std::uint8_t> read_pgm(const std::filesystem::path& path, int& width, int& height)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MapIoError("cannot open " + path.string());
    if (next_token(in) != "P5") throw MapIoError(path.string() + ": not a binary PGM (P5)");
    int maxval = 0;
    try {
        width = std::stoi(next_token(in));
        height = std::stoi(next_token(in));
        maxval = std::stoi(next_token(in));
    } catch (const std::exception&) {
        throw MapIoError(path.string() + ": malformed PGM header");
    }
    if (width <= 0 || height <= 0 || maxval != 255)
        throw MapIoError(path.string() + ": unsupported PGM dimensions or depth");
    std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height);
    in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (in.gcount() != static_cast<std::streamsize>(px.size()))
        throw MapIoError(path.string() + ": truncated pixel data");
    return px;
}

void save_map(const TrinaryMap& tri, const std::filesystem::path& pgm_path,
              const std::filesystem::path& meta_path)
{
    const GridGeometry& g = tri.geom;
    std::vector<std::uint8_t> px(g.size());
    for (int j = 0; j < g.height; ++j)
        for (int i = 0; i < g.width; ++i) {
            const Occ o = tri.at(i, j);
            px[static_cast<std::size_t>(g.height - 1 - j) * g.width + i] =
                o == Occ::Occupied ? kPgmOccupied : (o == Occ::Free ? kPgmFree : kPgmUnknown);
        }
    write_pgm(pgm_path, g.width, g.height, px);

    std::ofstream meta(meta_path);
    if (!meta) throw MapIoError("cannot write " + meta_path.string());
    meta << "image: " << pgm_path.filename().string() << "\n"
         << "resolution: " << fmt_double(g.resolution) << "\n"
         << "origin: [" << fmt_double(g.origin.x) << ", " << fmt_double(g.origin.y) << ", 0.0]\n"
         << "negate: 0\n"
         << "occupied_thresh: 0.65\n"
         << "free_thresh: 0.196\n";
}

TrinaryMap load_map(const std::filesystem::path& pgm_path, const std::filesystem::path& meta_path)
{
    GridGeometry g;
    double occ_th = 0.65, free_th = 0.196;
    bool negate = false;
    try {
        const YAML::Node meta = YAML::LoadFile(meta_path.string());
        if (!meta["resolution"] || !meta["origin"] || meta["origin"].size() < 2)
            throw MapIoError(meta_path.string() + ": missing resolution or origin");
        g.resolution = meta["resolution"].as<double>();
        g.origin = {meta["origin"][0].as<double>(), meta["origin"][1].as<double>()};
        if (meta["occupied_thresh"]) occ_th = meta["occupied_thresh"].as<double>();
        if (meta["free_thresh"]) free_th = meta["free_thresh"].as<double>();
        if (meta["negate"]) negate = meta["negate"].as<int>() != 0;
    } catch (const YAML::Exception& e) {
        throw MapIoError(meta_path.string() + ": " + e.what());
    }
    if (!(g.resolution > 0.0)) throw MapIoError(meta_path.string() + ": resolution must be positive");

    const auto px = read_pgm(pgm_path, g.width, g.height);
    TrinaryMap tri(g);
    for (int j = 0; j < g.height; ++j)
        for (int i = 0; i < g.width; ++i) {
            const int v = px[static_cast<std::size_t>(g.height - 1 - j) * g.width + i];
            const double p = negate ? v / 255.0 : (255.0 - v) / 255.0;
            tri.at(i, j) = p > occ_th ? Occ::Occupied : (p < free_th ? Occ::Free : Occ::Unknown);
        }
    return tri;
}

}  // namespace rim::occupancy
