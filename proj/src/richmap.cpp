#include "rim/richmap.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace rim::richmap {

using nlohmann::json;

std::string to_string(Status s)
{
    switch (s) {
    case Status::Confirmed: return "confirmed";
    case Status::Missing: return "missing";
    case Status::New: return "new";
    }
    return "?";
}

Status status_from_string(const std::string& s)
{
    if (s == "confirmed") return Status::Confirmed;
    if (s == "missing") return Status::Missing;
    if (s == "new") return Status::New;
    throw LoadError("unknown record status '" + s + "'");
}

Vec2 CylinderRecord::body_center() const
{
    if (!has_axis()) return xy();
    return xy() + Vec2::from_angle(axis_yaw) * (0.5 * length);
}

OrientedRect CylinderRecord::footprint() const
{
    return {body_center(), has_axis() ? axis_yaw : 0.0, length, diameter};
}

bool CylinderRecord::same_persisted(const CylinderRecord& o) const
{
    const bool axis_eq = (has_axis() == o.has_axis()) && (!has_axis() || axis_yaw == o.axis_yaw);
    return id == o.id && position == o.position && axis_eq && length == o.length && diameter == o.diameter &&
           tag_id == o.tag_id && status == o.status && first_seen == o.first_seen && last_seen == o.last_seen;
}

bool RichMap::operator==(const RichMap& o) const
{
    if (!(grid.geom == o.grid.geom) || grid.cells != o.grid.cells || alpha != o.alpha) return false;
    if (records.size() != o.records.size()) return false;
    for (std::size_t k = 0; k < records.size(); ++k)
        if (!records[k].same_persisted(o.records[k])) return false;
    return true;
}

const CylinderRecord* RichMap::find(int id) const
{
    for (const auto& r : records)
        if (r.id == id) return &r;
    return nullptr;
}

CylinderRecord* RichMap::find(int id)
{
    for (auto& r : records)
        if (r.id == id) return &r;
    return nullptr;
}

namespace {

bool active(const CylinderRecord& r) { return r.status != Status::Missing; }

int next_id(const RichMap& m)
{
    int id = 0;
    for (const auto& r : m.records) id = std::max(id, r.id);
    return id + 1;
}

}  // namespace

RegisterResult register_observation(RichMap& map, const perception::CylinderObservation& obs,
                                    const RegisterContext& ctx)
{
    if (!(map.alpha > 0.0)) throw std::invalid_argument("register: alpha must be positive");
    CylinderRecord* nearest = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (auto& r : map.records) {
        if (!active(r)) continue;
        const double d = (r.position - obs.position).norm();
        if (d < best) {
            best = d;
            nearest = &r;
        }
    }

    if (nearest && best <= map.alpha) {
        CylinderRecord& r = *nearest;
        const double n = r.observations;
        const Eigen::Vector3d pos = (r.position * n + obs.position) / (n + 1.0);
        bool keep = true;
        for (const auto& o : map.records)
            if (&o != &r && active(o) && (o.position - pos).norm() <= map.alpha) keep = false;
        if (keep) r.position = pos;
        if (obs.axis_valid) {
            if (!r.has_axis()) {
                r.axis_yaw = std::atan2(obs.axis.y, obs.axis.x);
            } else {
                const Vec2 a = Vec2::from_angle(r.axis_yaw);
                // Axes compare mod pi; align before averaging.
                const Vec2 b = a.dot(obs.axis) < 0.0 ? obs.axis * -1.0 : obs.axis;
                const Vec2 m = (a * n + b) * (1.0 / (n + 1.0));
                if (m.norm() > 1e-12) r.axis_yaw = std::atan2(m.y, m.x);
            }
        }
        r.observations += 1;
        r.last_seen = ctx.time;
        return {false, r.id};
    }

    CylinderRecord rec;
    rec.id = next_id(map);
    rec.position = obs.position;
    if (obs.axis_valid) rec.axis_yaw = std::atan2(obs.axis.y, obs.axis.x);
    rec.length = ctx.length;
    rec.diameter = ctx.diameter;
    rec.tag_id = obs.tag_id;
    rec.status = ctx.status_for_new;
    rec.first_seen = ctx.time;
    rec.last_seen = ctx.time;
    map.records.push_back(rec);
    return {true, rec.id};
}

std::size_t count(const RichMap& map)
{
    return static_cast<std::size_t>(std::count_if(map.records.begin(), map.records.end(), active));
}

bool dedup_invariant_holds(const RichMap& map)
{
    for (std::size_t a = 0; a < map.records.size(); ++a)
        for (std::size_t b = a + 1; b < map.records.size(); ++b)
            if (active(map.records[a]) && active(map.records[b]) &&
                (map.records[a].position - map.records[b].position).norm() <= map.alpha)
                return false;
    return true;
}

std::vector<std::vector<std::size_t>> cluster_piles(const RichMap& map, double link)
{
    const std::size_t n = map.records.size();
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (active(map.records[a]) && active(map.records[b]) &&
                distance(map.records[a].xy(), map.records[b].xy()) <= link)
                parent[root(a)] = root(b);
    std::vector<std::vector<std::size_t>> piles;
    std::vector<long> slot(n, -1);
    for (std::size_t k = 0; k < n; ++k) {
        if (!active(map.records[k])) continue;
        const std::size_t r = root(k);
        if (slot[r] < 0) {
            slot[r] = static_cast<long>(piles.size());
            piles.emplace_back();
        }
        piles[static_cast<std::size_t>(slot[r])].push_back(k);
    }
    return piles;
}

// --- persistence ---------------------------------------------------------------

BundlePaths bundle_paths(const std::filesystem::path& base)
{
    auto with = [&](const char* ext) { return std::filesystem::path(base.string() + ext); };
    return {with(".pgm"), with(".meta"), with(".records.json"), with(".ppm")};
}

json records_to_json(const RichMap& map)
{
    json recs = json::array();
    for (const auto& r : map.records) {
        json j;
        j["id"] = r.id;
        j["x"] = r.position.x();
        j["y"] = r.position.y();
        j["z"] = r.position.z();
        j["axis_yaw"] = r.has_axis() ? json(r.axis_yaw) : json(nullptr);
        j["length"] = r.length;
        j["diameter"] = r.diameter;
        j["tag_id"] = r.tag_id;
        j["status"] = to_string(r.status);
        j["first_seen"] = r.first_seen;
        j["last_seen"] = r.last_seen;
        recs.push_back(std::move(j));
    }
    return json{{"schema_version", kSchemaVersion}, {"alpha", map.alpha}, {"records", std::move(recs)}};
}

void records_from_json(const json& j, RichMap& map)
{
    try {
        if (!j.is_object() || !j.contains("schema_version")) throw LoadError("records: missing schema_version");
        const auto& v = j.at("schema_version");
        if (!v.is_number_integer() || v.get<int>() != kSchemaVersion)
            throw LoadError("records: unsupported schema_version " + v.dump() + " (expected " +
                            std::to_string(kSchemaVersion) + ")");
        map.alpha = j.at("alpha").get<double>();
        map.records.clear();
        for (const auto& e : j.at("records")) {
            CylinderRecord r;
            r.id = e.at("id").get<int>();
            r.position = {e.at("x").get<double>(), e.at("y").get<double>(), e.at("z").get<double>()};
            const auto& a = e.at("axis_yaw");
            r.axis_yaw = a.is_null() ? std::numeric_limits<double>::quiet_NaN() : a.get<double>();
            r.length = e.at("length").get<double>();
            r.diameter = e.at("diameter").get<double>();
            r.tag_id = e.at("tag_id").get<std::string>();
            r.status = status_from_string(e.at("status").get<std::string>());
            r.first_seen = e.at("first_seen").get<double>();
            r.last_seen = e.at("last_seen").get<double>();
            if (map.find(r.id)) throw LoadError("records: duplicate id " + std::to_string(r.id));
            map.records.push_back(r);
        }
    } catch (const json::exception& e) {
        throw LoadError(std::string("records: malformed document: ") + e.what());
    }
}

void save(const RichMap& map, const std::filesystem::path& base)
{
    const auto p = bundle_paths(base);
    if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
    occupancy::save_map(map.grid, p.pgm, p.meta);
    std::ofstream out(p.records);
    if (!out) throw std::runtime_error("cannot write " + p.records.string());
    out << records_to_json(map).dump(2) << '\n';
    out.close();
    write_ppm(render(map), p.ppm);
}

RichMap load(const std::filesystem::path& base)
{
    const auto p = bundle_paths(base);
    RichMap m;
    try {
        m.grid = occupancy::load_map(p.pgm, p.meta);
    } catch (const std::exception& e) {
        throw LoadError(std::string("grid: ") + e.what());
    }
    std::ifstream in(p.records);
    if (!in) throw LoadError("records: cannot open " + p.records.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw LoadError(std::string("records: malformed document: ") + e.what());
    }
    records_from_json(j, m);
    return m;
}

// --- rendering -----------------------------------------------------------------

std::array<std::uint8_t, 3> RgbImage::at(int x, int y) const
{
    const std::size_t k = 3 * (static_cast<std::size_t>(y) * width + x);
    return {rgb[k], rgb[k + 1], rgb[k + 2]};
}

RgbImage render(const RichMap& map, int scale)
{
    if (scale < 1) throw std::invalid_argument("render: scale must be >= 1");
    const auto& g = map.grid.geom;
    RgbImage img;
    img.width = g.width * scale;
    img.height = g.height * scale;
    img.rgb.assign(3 * static_cast<std::size_t>(img.width) * img.height, 0);
    auto put = [&](int x, int y, std::array<std::uint8_t, 3> c) {
        const std::size_t k = 3 * (static_cast<std::size_t>(y) * img.width + x);
        img.rgb[k] = c[0];
        img.rgb[k + 1] = c[1];
        img.rgb[k + 2] = c[2];
    };
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const int i = x / scale;
            const int j = g.height - 1 - y / scale;
            std::uint8_t v = occupancy::kPgmUnknown;
            if (!map.grid.cells.empty()) {
                const auto c = map.grid.at(i, j);
                v = c == occupancy::Occ::Free ? occupancy::kPgmFree
                    : c == occupancy::Occ::Occupied ? occupancy::kPgmOccupied
                                                    : occupancy::kPgmUnknown;
            }
            put(x, y, {v, v, v});
        }

    const double px = g.resolution / scale;
    // Missing first so live records stay on top.
    for (int pass = 0; pass < 2; ++pass)
        for (const auto& r : map.records) {
            const bool missing = r.status == Status::Missing;
            if ((pass == 0) != missing) continue;
            const OrientedRect rect = r.footprint();
            const auto colour = missing ? kRed : kGreen;
            double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
            for (const auto& c : rect.corners()) {
                xmin = std::min(xmin, c.x);
                xmax = std::max(xmax, c.x);
                ymin = std::min(ymin, c.y);
                ymax = std::max(ymax, c.y);
            }
            const int x0 = std::max(0, static_cast<int>(std::floor((xmin - g.origin.x) / px)));
            const int x1 = std::min(img.width - 1, static_cast<int>(std::floor((xmax - g.origin.x) / px)));
            const int r0 = std::max(0, static_cast<int>(std::floor((ymin - g.origin.y) / px)));
            const int r1 = std::min(img.height - 1, static_cast<int>(std::floor((ymax - g.origin.y) / px)));
            for (int row = r0; row <= r1; ++row)
                for (int x = x0; x <= x1; ++x) {
                    const Vec2 c{g.origin.x + (x + 0.5) * px, g.origin.y + (row + 0.5) * px};
                    if (rect.contains(c)) put(x, img.height - 1 - row, colour);
                }
        }
    return img;
}

void write_ppm(const RgbImage& img, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
}

RgbImage read_ppm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open " + path.string());
    std::string magic;
    int maxval = 0;
    RgbImage img;
    in >> magic >> img.width >> img.height >> maxval;
    if (magic != "P6" || img.width <= 0 || img.height <= 0 || maxval != 255)
        throw LoadError("not a P6 image: " + path.string());
    in.get();
    img.rgb.resize(3 * static_cast<std::size_t>(img.width) * img.height);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(img.rgb.size())) throw LoadError("truncated image " + path.string());
    return img;
}

// --- recheck -------------------------------------------------------------------

json UpdateReport::to_json() const
{
    return json{{"verified", verified}, {"deleted", deleted}, {"added", added},
                {"skipped_piles", skipped_piles}, {"stale_piles", stale_piles}, {"piles", piles}};
}

namespace {

struct Viewpoint
{
    Vec2 position;
    double heading;
};

std::vector<Viewpoint> viewpoints_for(const CylinderRecord& r, const Vec2& pile_center, const RecheckParams& p)
{
    // Stand in front of the plate looking along the axis; without an axis, look
    // at the plate from outside the pile.
    Vec2 dir = r.has_axis() ? Vec2::from_angle(r.axis_yaw) : (pile_center - r.xy());
    if (dir.norm() < 1e-9) dir = {1.0, 0.0};
    dir = dir.normalized();
    std::vector<double> offs{p.standoff};
    offs.insert(offs.end(), p.standoff_fallbacks.begin(), p.standoff_fallbacks.end());
    std::vector<Viewpoint> out;
    for (double s : offs) out.push_back({r.xy() - dir * s, std::atan2(dir.y, dir.x)});
    return out;
}

bool reach(world::Simulator& sim, const RichMap& map, const nav::CostMap& cm, const Viewpoint& vp,
           const RecheckParams& p)
{
    const auto c = cm.geom.world_to_cell(vp.position);
    if (cm.is_blocked(c.i, c.j)) return false;
    const auto plan = nav::plan_from_pose(map.grid, cm, sim.state().position(), vp.position);
    if (!plan) return false;
    const auto st = nav::follow_path(sim, *plan.path, p.follow);
    if (st != nav::FollowStatus::Reached) return false;
    nav::rotate_to(sim, vp.heading, p.follow);
    return true;
}

}  // namespace

UpdateReport recheck(RichMap& map, world::Simulator& sim, const RecheckParams& p, EventLog* log)
{
    UpdateReport rep;
    const auto piles = cluster_piles(map, 2.0 * map.alpha);
    rep.piles = static_cast<int>(piles.size());
    const auto cm = nav::inflate(map.grid, p.inflate_radius, false);

    for (std::size_t pi = 0; pi < piles.size(); ++pi) {
        const auto& pile = piles[pi];
        std::vector<int> ids;
        Vec2 center{0, 0};
        for (auto k : pile) {
            ids.push_back(map.records[k].id);
            center = center + map.records[k].body_center();
        }
        center = center * (1.0 / static_cast<double>(pile.size()));
        if (log) log->emit(sim.time(), "recheck_pile", {{"pile", pi}, {"records", ids}});

        std::vector<int> verified;
        std::vector<int> unreachable;
        auto is_verified = [&](int id) { return std::find(verified.begin(), verified.end(), id) != verified.end(); };

        // Visit viewpoints nearest-first; one observation can verify several records.
        std::vector<int> todo = ids;
        while (!todo.empty()) {
            std::erase_if(todo, is_verified);
            if (todo.empty()) break;
            const Vec2 here = sim.state().position();
            std::sort(todo.begin(), todo.end(), [&](int a, int b) {
                const double da = distance(here, map.find(a)->xy()), db = distance(here, map.find(b)->xy());
                return da != db ? da < db : a < b;
            });
            const int id = todo.front();
            todo.erase(todo.begin());
            const CylinderRecord rec = *map.find(id);
            bool reached = false;
            for (const auto& vp : viewpoints_for(rec, center, p))
                if (reach(sim, map, cm, vp, p)) {
                    reached = true;
                    break;
                }
            if (!reached) {
                unreachable.push_back(id);
                if (log) log->emit(sim.time(), "viewpoint_unreachable", {{"id", id}});
                continue;
            }
            const auto obs = perception::observe(sim, p.observe);
            for (const auto& o : obs)
                for (int cid : ids) {
                    auto* r = map.find(cid);
                    if (!is_verified(cid) && (r->position - o.position).norm() <= map.alpha) {
                        verified.push_back(cid);
                        r->last_seen = sim.time();
                        if (log) log->emit(sim.time(), "verified", {{"id", cid}});
                    }
                }
        }

        int surviving = 0;
        for (int id : ids) {
            auto* r = map.find(id);
            if (is_verified(id)) {
                rep.verified.push_back(id);
                ++surviving;
            } else if (std::find(unreachable.begin(), unreachable.end(), id) != unreachable.end()) {
                ++surviving;  // not checked, kept as is
            } else {
                r->status = Status::Missing;
                rep.deleted.push_back(id);
                if (log) log->emit(sim.time(), "deleted", {{"id", id}});
            }
        }
        if (!unreachable.empty()) rep.skipped_piles.push_back(static_cast<int>(pi));
        if (surviving == 0) {
            rep.stale_piles.push_back(static_cast<int>(pi));
            if (log) log->emit(sim.time(), "stale_pile", {{"pile", pi}});
            if (!p.encircle_stale) continue;
        }

        // Encircle the pile to pick up additions.
        encircle::Target target{center, 0.0};
        for (auto k : pile) {
            for (const auto& c : map.records[k].footprint().corners())
                target.radius = std::max(target.radius, distance(c, center));
        }
        RegisterContext ctx{0.0, Status::New, p.length, p.diameter};
        auto inspect = [&](world::Simulator& s) {
            int added = 0;
            for (const auto& o : perception::observe(s, p.observe)) {
                ctx.time = s.time();
                const auto res = register_observation(map, o, ctx);
                if (res.inserted) {
                    ++added;
                    rep.added.push_back(res.id);
                    if (log) log->emit(s.time(), "register", {{"id", res.id}, {"tag_id", o.tag_id}, {"status", "new"}});
                }
            }
            return added;
        };
        const auto enc = encircle::run_encirclement(sim, map.grid, target, p.encircle, p.follow, inspect, log);
        if (enc.outcome == encircle::Outcome::Unreachable &&
            std::find(rep.skipped_piles.begin(), rep.skipped_piles.end(), static_cast<int>(pi)) == rep.skipped_piles.end())
            rep.skipped_piles.push_back(static_cast<int>(pi));
    }
    std::sort(rep.verified.begin(), rep.verified.end());
    std::sort(rep.deleted.begin(), rep.deleted.end());
    return rep;
}

}  // namespace rim::richmap
