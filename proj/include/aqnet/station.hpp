#pragma once

#include <string>
#include <string_view>

#include "aqnet/pollutant.hpp"

namespace aqnet {

enum class AreaType { Rural, Suburban, Urban };
enum class StationType { Traffic, Industrial, Background };

std::string_view to_string(AreaType t);
std::string_view to_string(StationType t);
AreaType parse_area_type(std::string_view s);
StationType parse_station_type(std::string_view s);

/// One ground monitoring station with its measured pollutant averages (µg/m³).
struct StationRecord {
    std::string station_id;
    std::string country;  // ISO-2
    double lon = 0.0;
    double lat = 0.0;
    double altitude = 0.0;     // m
    double pop_density = 0.0;  // persons per km²
    AreaType area_type = AreaType::Rural;
    StationType station_type = StationType::Background;
    PollutantTriple measured{};

    double concentration(Pollutant p) const { return measured[index_of(p)]; }

    bool operator==(const StationRecord&) const = default;
};

/// Throws Error(Validation) naming the offending field.
void validate_record(const StationRecord& record);

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

}  // namespace aqnet
