#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rim/events.hpp"
#include "rim/richmap.hpp"
#include "rim/scenario.hpp"

namespace rim::pipeline {

/// A pipeline stage failed; `stage` names it.
class StageError : public std::runtime_error
{
public:
    StageError(std::string stage, const std::string& what)
        : std::runtime_error(stage + ": " + what), stage(std::move(stage)) {}
    std::string stage;
};

struct Evaluation
{
    int found{0};
    int localized{0};
    int poses{0};
    int ground_truth{0};
    /// record id -> index of the matched ground-truth cylinder
    std::map<int, int> matches;
};

/// One-to-one nearest association within alpha; localized = plate error
/// <= alpha/2, pose = axis error <= pose_tol mod pi.
Evaluation evaluate(const richmap::RichMap& map, const world::WorldSpec& world, double alpha,
                    double pose_tol = deg2rad(5.0));

struct RunSummary
{
    std::string scenario;
    std::string mode;
    std::uint64_t seed{0};
    Evaluation eval;
    int regions{0};
    double sim_time{0.0};
    double distance{0.0};
    double wall_time{0.0};
    std::map<std::string, std::size_t> event_counts;
    bool ok{true};
    std::string error;

    /// Deterministic fields only; wall time is left out.
    nlohmann::json to_json() const;
};

struct RunOptions
{
    std::filesystem::path out_dir{"out"};
    std::optional<std::uint64_t> seed;
    bool dump_stages{false};
    bool dump_clouds{false};
    bool write_files{true};
};

struct GenerateOutput
{
    RunSummary summary;
    richmap::RichMap map;
    EventLog log;
};

/// Explore, extract regions, encircle each one while registering plates, save.
/// Throws StageError.
GenerateOutput run_generate(const Scenario& sc, const RunOptions& opt);

struct UpdateOutput
{
    RunSummary summary;
    richmap::UpdateReport report;
    richmap::RichMap map;
    EventLog log;
};

/// Load a bundle and run the recheck against the scenario world. Throws StageError.
UpdateOutput run_update(const Scenario& sc, const std::filesystem::path& map_base, const RunOptions& opt);

struct BatchRow
{
    int trial{0};
    std::uint64_t seed{0};
    bool ok{false};
    RunSummary summary;
    std::string error;
};

/// Trials with seeds seed..seed+trials-1; writes table.csv and table.txt.
std::vector<BatchRow> run_batch(const Scenario& sc, int trials, const RunOptions& opt);

std::string format_table(const std::vector<BatchRow>& rows);
std::string table_csv(const std::vector<BatchRow>& rows);

void write_summary_files(const RunSummary& s, const std::filesystem::path& dir);

}  // namespace rim::pipeline
