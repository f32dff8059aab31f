#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace rim {

/// Line-delimited run log: one JSON object per event, in emission order.
class EventLog
{
public:
    void emit(double sim_time, const std::string& event, nlohmann::json fields = nlohmann::json::object());

    const std::vector<nlohmann::json>& records() const { return records_; }
    std::size_t count(const std::string& event) const;
    std::map<std::string, std::size_t> counts() const;
    void write(const std::filesystem::path& path) const;

private:
    std::vector<nlohmann::json> records_;
};

}  // namespace rim
