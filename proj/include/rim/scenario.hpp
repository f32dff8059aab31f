#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rim/encircle.hpp"
#include "rim/gridproc.hpp"
#include "rim/nav.hpp"
#include "rim/perception.hpp"
#include "rim/richmap.hpp"
#include "rim/world.hpp"

namespace rim {

struct Scenario
{
    std::string name{"unnamed"};
    std::uint64_t seed{1};
    world::WorldSpec world;
    world::RobotState start;

    nav::MappingParams mapping;
    nav::ExploreParams explore;
    gridproc::GridProcParams gridproc;
    encircle::EncircleParams encircle;
    perception::ObserveOptions observe;
    richmap::RecheckParams recheck;
    double alpha{0.3};
    int render_scale{4};
    int min_found{0};
    double cylinder_length{1.2};
    double cylinder_diameter{0.3};

    /// Every resolved parameter, for the run record.
    nlohmann::json resolved = nlohmann::json::object();
};

using Override = std::pair<std::string, std::string>;

/// "a.b.c=value" -> {"a.b.c", "value"}; throws ScenarioError when malformed.
Override parse_override(const std::string& text);

/// Reads a scenario file (following `extends:` chains), applies the overrides
/// and validates the result. Throws ScenarioError.
Scenario load_scenario(const std::filesystem::path& path, const std::vector<Override>& overrides = {});
Scenario parse_scenario_text(const std::string& yaml, const std::vector<Override>& overrides = {});

}  // namespace rim
