#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "aqnet/dataset.hpp"
#include "aqnet/rng.hpp"
#include "aqnet/station.hpp"

namespace aqnet::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("aqnet-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline StationRecord make_record(std::string id, double altitude, double pop, AreaType area,
                                 StationType type, PollutantTriple measured) {
    StationRecord r;
    r.station_id = std::move(id);
    r.country = "DE";
    r.lon = 10.0;
    r.lat = 50.0;
    r.altitude = altitude;
    r.pop_density = pop;
    r.area_type = area;
    r.station_type = type;
    r.measured = measured;
    return r;
}

inline SamplePatch random_patch(Rng& rng) {
    SamplePatch p;
    for (auto& v : p.s2) v = static_cast<float>(rng.uniform(0.0, 2.0));
    for (auto& v : p.s5p) v = static_cast<float>(rng.normal());
    return p;
}

}  // namespace aqnet::testing
