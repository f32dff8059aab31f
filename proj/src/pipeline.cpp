#include "rim/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "rim/encircle.hpp"
#include "rim/gridproc.hpp"
#include "rim/nav.hpp"
#include "rim/perception.hpp"

namespace rim::pipeline {

using nlohmann::json;

Evaluation evaluate(const richmap::RichMap& map, const world::WorldSpec& world, double alpha, double pose_tol)
{
    Evaluation ev;
    ev.found = static_cast<int>(richmap::count(map));
    ev.ground_truth = static_cast<int>(world.cylinders.size());

    struct Pair
    {
        double d;
        std::size_t rec;
        std::size_t gt;
    };
    std::vector<Pair> pairs;
    for (std::size_t r = 0; r < map.records.size(); ++r) {
        if (map.records[r].status == richmap::Status::Missing) continue;
        for (std::size_t g = 0; g < world.cylinders.size(); ++g) {
            const double d = (map.records[r].position - world.cylinders[g].plate_center3()).norm();
            if (d <= alpha) pairs.push_back({d, r, g});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.d != b.d) return a.d < b.d;
        return a.rec != b.rec ? a.rec < b.rec : a.gt < b.gt;
    });
    std::vector<char> rec_used(map.records.size(), 0), gt_used(world.cylinders.size(), 0);
    for (const auto& p : pairs) {
        if (rec_used[p.rec] || gt_used[p.gt]) continue;
        rec_used[p.rec] = gt_used[p.gt] = 1;
        const auto& rec = map.records[p.rec];
        const auto& gt = world.cylinders[p.gt];
        ev.matches[rec.id] = static_cast<int>(p.gt);
        if (p.d <= 0.5 * alpha) ++ev.localized;
        if (rec.has_axis() && axis_difference(rec.axis_yaw, gt.yaw) <= pose_tol) ++ev.poses;
    }
    return ev;
}

json RunSummary::to_json() const
{
    json j;
    j["scenario"] = scenario;
    j["mode"] = mode;
    j["seed"] = seed;
    j["cylinders_found"] = eval.found;
    j["cylinders_localized_within_tol"] = eval.localized;
    j["poses_within_tol"] = eval.poses;
    j["ground_truth"] = eval.ground_truth;
    j["regions"] = regions;
    j["sim_time"] = std::round(sim_time * 1000.0) / 1000.0;
    j["distance"] = std::round(distance * 1000.0) / 1000.0;
    j["event_counts"] = event_counts;
    j["ok"] = ok;
    if (!error.empty()) j["error"] = error;
    return j;
}

void write_summary_files(const RunSummary& s, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "summary.json");
        out << s.to_json().dump(2) << '\n';
    }
    std::ofstream out(dir / "summary.csv");
    out << "scenario,mode,seed,found,localized,poses,ground_truth,regions,sim_time\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", s.sim_time);
    out << s.scenario << ',' << s.mode << ',' << s.seed << ',' << s.eval.found << ',' << s.eval.localized << ','
        << s.eval.poses << ',' << s.eval.ground_truth << ',' << s.regions << ',' << buf << '\n';
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
auto stage(const char* name, F&& f) -> decltype(f())
{
    try {
        return f();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(name, e.what());
    }
}

perception::ObserveOptions observe_options(const Scenario& sc, const RunOptions& opt)
{
    auto o = sc.observe;
    if (opt.dump_clouds) o.cloud_dump_dir = opt.out_dir / "clouds";
    return o;
}

json observation_json(const perception::CylinderObservation& o)
{
    json j{{"tag_id", o.tag_id}, {"x", o.position.x()}, {"y", o.position.y()}, {"z", o.position.z()},
           {"axis_valid", o.axis_valid}, {"inlier_ratio", o.inlier_ratio}};
    return j;
}

}  // namespace

GenerateOutput run_generate(const Scenario& sc, const RunOptions& opt)
{
    const auto wall0 = Clock::now();
    GenerateOutput out;
    auto& log = out.log;
    const std::uint64_t seed = opt.seed.value_or(sc.seed);

    world::Simulator sim = stage("setup", [&] { return world::Simulator(sc.world, sc.start, seed); });
    log.emit(0.0, "run_start", {{"mode", "generate"}, {"scenario", sc.name}, {"seed", seed}});

    auto grid = occupancy::OccupancyGrid::covering(sc.world.field_width, sc.world.field_height,
                                                   sc.mapping.resolution, sc.mapping.margin, sc.mapping.logodds);
    const auto ex = stage("explore", [&] { return nav::explore(sim, grid, sc.explore, sc.mapping, &log); });

    const gridproc::CylinderDims dims{sc.cylinder_length, sc.cylinder_diameter};
    const auto gp = stage("gridproc", [&] { return gridproc::process(ex.map, dims, sc.gridproc); });
    if (opt.dump_stages && opt.write_files)
        stage("gridproc", [&] { gridproc::write_stage_images(ex.map, gp, opt.out_dir / "stages"); return 0; });
    json regions = json::array();
    for (const auto& r : gp.regions) regions.push_back({{"x", r.centroid.x}, {"y", r.centroid.y}, {"area", r.area}});
    log.emit(sim.time(), "regions", {{"count", gp.regions.size()}, {"regions", regions}});

    auto& rm = out.map;
    rm.grid = ex.map;
    rm.regions = gp.regions;
    rm.alpha = sc.alpha;
    rm.params_snapshot = sc.resolved;

    const auto obs_opts = observe_options(sc, opt);
    richmap::RegisterContext ctx{0.0, richmap::Status::Confirmed, sc.cylinder_length, sc.cylinder_diameter};
    auto inspect = [&](world::Simulator& s) {
        int added = 0;
        for (const auto& o : perception::observe(s, obs_opts)) {
            ctx.time = s.time();
            const auto res = richmap::register_observation(rm, o, ctx);
            json f = observation_json(o);
            f["id"] = res.id;
            log.emit(s.time(), res.inserted ? "register" : "duplicate", f);
            if (res.inserted) ++added;
        }
        return added;
    };

    stage("encircle", [&] {
        for (std::size_t k = 0; k < gp.regions.size(); ++k) {
            const auto target = encircle::target_from_region(gp.regions[k], ex.map.geom);
            const auto res = encircle::run_encirclement(sim, ex.map, target, sc.encircle, sc.explore.follow,
                                                        inspect, &log);
            if (res.outcome == encircle::Outcome::Unreachable)
                log.emit(sim.time(), "region_skipped", {{"region", k}});
        }
        return 0;
    });

    auto& S = out.summary;
    S.scenario = sc.name;
    S.mode = "generate";
    S.seed = seed;
    S.eval = evaluate(rm, sc.world, sc.alpha);
    S.regions = static_cast<int>(gp.regions.size());
    S.sim_time = sim.time();
    S.distance = sim.distance_travelled();
    log.emit(sim.time(), "run_done", {{"found", S.eval.found}});
    S.event_counts = log.counts();
    S.ok = S.eval.found >= sc.min_found;
    if (!S.ok) S.error = "found fewer cylinders than expect.min_found";

    if (opt.write_files) {
        stage("save", [&] {
            std::filesystem::create_directories(opt.out_dir);
            richmap::save(rm, opt.out_dir / "map");
            log.write(opt.out_dir / "events.jsonl");
            std::ofstream(opt.out_dir / "params.json") << sc.resolved.dump(2) << '\n';
            write_summary_files(S, opt.out_dir);
            return 0;
        });
    }
    S.wall_time = std::chrono::duration<double>(Clock::now() - wall0).count();
    return out;
}

UpdateOutput run_update(const Scenario& sc, const std::filesystem::path& map_base, const RunOptions& opt)
{
    const auto wall0 = Clock::now();
    UpdateOutput out;
    auto& log = out.log;
    const std::uint64_t seed = opt.seed.value_or(sc.seed);

    out.map = stage("load", [&] { return richmap::load(map_base); });
    auto& rm = out.map;
    rm.params_snapshot = sc.resolved;
    world::Simulator sim = stage("setup", [&] { return world::Simulator(sc.world, sc.start, seed); });
    log.emit(0.0, "run_start", {{"mode", "update"}, {"scenario", sc.name}, {"seed", seed},
                                {"records", richmap::count(rm)}});

    auto rp = sc.recheck;
    rp.observe = observe_options(sc, opt);
    out.report = stage("recheck", [&] { return richmap::recheck(rm, sim, rp, &log); });
    log.emit(sim.time(), "update_report", out.report.to_json());

    auto& S = out.summary;
    S.scenario = sc.name;
    S.mode = "update";
    S.seed = seed;
    S.eval = evaluate(rm, sc.world, rm.alpha);
    S.sim_time = sim.time();
    S.distance = sim.distance_travelled();
    S.regions = out.report.piles;
    log.emit(sim.time(), "run_done", {{"found", S.eval.found}});
    S.event_counts = log.counts();
    S.ok = out.report.skipped_piles.empty();
    if (!S.ok) S.error = "some piles could not be reached";

    if (opt.write_files) {
        stage("save", [&] {
            std::filesystem::create_directories(opt.out_dir);
            richmap::save(rm, opt.out_dir / "map");
            log.write(opt.out_dir / "events.jsonl");
            std::ofstream(opt.out_dir / "report.json") << out.report.to_json().dump(2) << '\n';
            std::ofstream(opt.out_dir / "params.json") << sc.resolved.dump(2) << '\n';
            write_summary_files(S, opt.out_dir);
            return 0;
        });
    }
    S.wall_time = std::chrono::duration<double>(Clock::now() - wall0).count();
    return out;
}

std::vector<BatchRow> run_batch(const Scenario& sc, int trials, const RunOptions& opt)
{
    if (trials < 1) throw std::invalid_argument("batch: trials must be >= 1");
    std::vector<BatchRow> rows;
    const std::uint64_t base = opt.seed.value_or(sc.seed);
    for (int t = 0; t < trials; ++t) {
        BatchRow row;
        row.trial = t + 1;
        row.seed = base + static_cast<std::uint64_t>(t);
        RunOptions o = opt;
        o.seed = row.seed;
        o.out_dir = opt.out_dir / ("trial_" + std::to_string(t + 1));
        try {
            auto g = run_generate(sc, o);
            row.summary = g.summary;
            row.ok = g.summary.ok;
            row.error = g.summary.error;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    if (opt.write_files) {
        std::filesystem::create_directories(opt.out_dir);
        std::ofstream(opt.out_dir / "table.csv") << table_csv(rows);
        std::ofstream(opt.out_dir / "table.txt") << format_table(rows);
    }
    return rows;
}

std::string table_csv(const std::vector<BatchRow>& rows)
{
    std::ostringstream os;
    os << "trial,seed,found,localized,poses,ground_truth,ok,error\n";
    for (const auto& r : rows) {
        const auto& e = r.summary.eval;
        os << r.trial << ',' << r.seed << ',' << e.found << ',' << e.localized << ',' << e.poses << ','
           << e.ground_truth << ',' << (r.ok ? 1 : 0) << ",\"" << r.error << "\"\n";
    }
    return os.str();
}

std::string format_table(const std::vector<BatchRow>& rows)
{
    std::ostringstream os;
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-8s %-8s %-16s %-20s %-16s\n", "Trial", "Seed", "Cylinders Found",
                  "Cylinders Localized", "Pose Estimated");
    os << buf;
    for (const auto& r : rows) {
        const auto& e = r.summary.eval;
        if (!r.error.empty() && e.ground_truth == 0 && !r.ok) {
            std::snprintf(buf, sizeof buf, "%-8d %-8llu failed: %s\n", r.trial,
                          static_cast<unsigned long long>(r.seed), r.error.c_str());
        } else {
            const std::string f = std::to_string(e.found) + "/" + std::to_string(e.ground_truth);
            const std::string l = std::to_string(e.localized) + "/" + std::to_string(e.ground_truth);
            const std::string p = std::to_string(e.poses) + "/" + std::to_string(e.ground_truth);
            std::snprintf(buf, sizeof buf, "%-8d %-8llu %-16s %-20s %-16s\n", r.trial,
                          static_cast<unsigned long long>(r.seed), f.c_str(), l.c_str(), p.c_str());
        }
        os << buf;
    }
    return os.str();
}

}  // namespace rim::pipeline
