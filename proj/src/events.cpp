#include "rim/events.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace rim {

void EventLog::emit(double sim_time, const std::string& event, nlohmann::json fields)
{
    nlohmann::json rec = nlohmann::json::object();
    rec["t"] = std::round(sim_time * 1000.0) / 1000.0;
    rec["event"] = event;
    for (auto& [k, v] : fields.items()) rec[k] = std::move(v);
    records_.push_back(std::move(rec));
}

std::size_t EventLog::count(const std::string& event) const
{
    std::size_t n = 0;
    for (const auto& r : records_)
        if (r["event"] == event) ++n;
    return n;
}

std::map<std::string, std::size_t> EventLog::counts() const
{
    std::map<std::string, std::size_t> m;
    for (const auto& r : records_) ++m[r["event"].get<std::string>()];
    return m;
}

void EventLog::write(const std::filesystem::path& path) const
{
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (const auto& r : records_) out << r.dump() << '\n';
}

}  // namespace rim
