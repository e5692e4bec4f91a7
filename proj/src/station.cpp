#include "aqnet/station.hpp"

#include <charconv>
#include <cmath>
#include <string>

#include "aqnet/error.hpp"

namespace aqnet {

std::string_view to_string(AreaType t) {
    switch (t) {
        case AreaType::Rural: return "rural";
        case AreaType::Suburban: return "suburban";
        case AreaType::Urban: return "urban";
    }
    return "?";
}

std::string_view to_string(StationType t) {
    switch (t) {
        case StationType::Traffic: return "traffic";
        case StationType::Industrial: return "industrial";
        case StationType::Background: return "background";
    }
    return "?";
}

AreaType parse_area_type(std::string_view s) {
    if (s == "rural") return AreaType::Rural;
    if (s == "suburban") return AreaType::Suburban;
    if (s == "urban") return AreaType::Urban;
    fail(ErrorKind::Validation, "area_type must be rural|suburban|urban, got '" +
                                    std::string(s) + "'");
}

StationType parse_station_type(std::string_view s) {
    if (s == "traffic") return StationType::Traffic;
    if (s == "industrial") return StationType::Industrial;
    if (s == "background") return StationType::Background;
    fail(ErrorKind::Validation, "station_type must be traffic|industrial|background, got '" +
                                    std::string(s) + "'");
}

void validate_record(const StationRecord& r) {
    auto bad = [&](const char* field, const std::string& why) {
        fail(ErrorKind::Validation,
             "station '" + r.station_id + "' field " + field + ": " + why);
    };
    if (r.station_id.empty()) bad("station_id", "empty");
    if (!std::isfinite(r.lon)) bad("lon", "not finite");
    if (!std::isfinite(r.lat)) bad("lat", "not finite");
    if (!std::isfinite(r.altitude)) bad("altitude", "not finite");
    if (!std::isfinite(r.pop_density) || r.pop_density < 0.0) bad("pop_density", "must be >= 0");
    for (Pollutant p : kAllPollutants) {
        const double v = r.concentration(p);
        if (!std::isfinite(v) || v < 0.0) bad(to_string(p).data(), "must be a finite value >= 0");
    }
}

std::string format_double(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc{}) fail(ErrorKind::Format, "cannot format number");
    return std::string(buf, end);
}

}  // namespace aqnet
