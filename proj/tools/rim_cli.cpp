#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "rim/pipeline.hpp"
#include "rim/richmap.hpp"
#include "rim/scenario.hpp"

namespace {

std::vector<rim::Override> parse_sets(const std::vector<std::string>& sets)
{
    std::vector<rim::Override> out;
    for (const auto& s : sets) out.push_back(rim::parse_override(s));
    return out;
}

void print_summary(const rim::pipeline::RunSummary& s)
{
    const auto& e = s.eval;
    std::printf("%s [%s] seed %llu: found %d/%d, localized %d/%d, poses %d/%d, sim %.1f s, wall %.2f s\n",
                s.scenario.c_str(), s.mode.c_str(), static_cast<unsigned long long>(s.seed), e.found,
                e.ground_truth, e.localized, e.ground_truth, e.poses, e.ground_truth, s.sim_time, s.wall_time);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"rich information map simulator"};
    app.require_subcommand(1);

    std::string scenario_path, map_base, out_dir = "out";
    std::vector<std::string> sets;
    std::uint64_t seed = 0;
    int trials = 3;
    int scale = 4;
    bool dump_stages = false, dump_clouds = false;

    auto add_common = [&](CLI::App* c) {
        c->add_option("--scenario", scenario_path, "scenario YAML file")->required()->check(CLI::ExistingFile);
        c->add_option("--seed", seed, "override the scenario seed");
        c->add_option("--out", out_dir, "output directory");
        c->add_option("--set", sets, "parameter override key=value (repeatable)");
        c->add_flag("--dump-stages", dump_stages, "write grid-processing stage images");
        c->add_flag("--dump-clouds", dump_clouds, "write sampled point clouds as CSV");
    };

    auto* gen = app.add_subcommand("generate", "explore, encircle and build a map bundle");
    add_common(gen);
    auto* upd = app.add_subcommand("update", "recheck a saved map bundle");
    add_common(upd);
    upd->add_option("--map", map_base, "bundle base path (without extension)")->required();
    auto* bat = app.add_subcommand("batch", "repeat generate over consecutive seeds");
    add_common(bat);
    bat->add_option("--trials", trials, "number of trials")->check(CLI::PositiveNumber);
    auto* ren = app.add_subcommand("render", "render a bundle as PPM");
    ren->add_option("--map", map_base, "bundle base path")->required();
    ren->add_option("--out", out_dir, "output image path")->required();
    ren->add_option("--scale", scale, "pixels per grid cell")->check(CLI::PositiveNumber);

    CLI11_PARSE(app, argc, argv);

    try {
        if (ren->parsed()) {
            const auto m = rim::richmap::load(map_base);
            rim::richmap::write_ppm(rim::richmap::render(m, scale), out_dir);
            std::printf("wrote %s (%zu records, %zu live)\n", out_dir.c_str(), m.records.size(),
                        rim::richmap::count(m));
            return 0;
        }

        const auto sc = rim::load_scenario(scenario_path, parse_sets(sets));
        rim::pipeline::RunOptions opt;
        opt.out_dir = out_dir;
        if (gen->count("--seed") || upd->count("--seed") || bat->count("--seed")) opt.seed = seed;
        opt.dump_stages = dump_stages;
        opt.dump_clouds = dump_clouds;

        if (gen->parsed()) {
            const auto r = rim::pipeline::run_generate(sc, opt);
            print_summary(r.summary);
            if (!r.summary.ok) {
                std::fprintf(stderr, "error: %s\n", r.summary.error.c_str());
                return 1;
            }
            return 0;
        }
        if (upd->parsed()) {
            const auto r = rim::pipeline::run_update(sc, map_base, opt);
            print_summary(r.summary);
            std::printf("verified %zu, deleted %zu, added %zu, count %zu\n", r.report.verified.size(),
                        r.report.deleted.size(), r.report.added.size(), rim::richmap::count(r.map));
            if (!r.summary.ok) {
                std::fprintf(stderr, "error: %s\n", r.summary.error.c_str());
                return 1;
            }
            return 0;
        }
        if (bat->parsed()) {
            const auto rows = rim::pipeline::run_batch(sc, trials, opt);
            std::cout << rim::pipeline::format_table(rows);
            for (const auto& r : rows)
                if (!r.ok) return 1;
            return 0;
        }
    } catch (const rim::pipeline::StageError& e) {
        std::fprintf(stderr, "error in stage %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
