#include <cctype>
#include <string>

#include "aqnet/error.hpp"
#include "aqnet/pollutant.hpp"

namespace aqnet {

const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Validation: return "validation";
        case ErrorKind::Io: return "io";
        case ErrorKind::Format: return "format";
        case ErrorKind::Numeric: return "numeric";
        case ErrorKind::Leakage: return "leakage";
    }
    return "unknown";
}

std::string_view to_string(Pollutant p) {
    switch (p) {
        case Pollutant::NO2: return "no2";
        case Pollutant::O3: return "o3";
        case Pollutant::PM10: return "pm10";
    }
    return "?";
}

Pollutant parse_pollutant(std::string_view name) {
    std::string lower(name);
    for (auto& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (lower == "no2") return Pollutant::NO2;
    if (lower == "o3") return Pollutant::O3;
    if (lower == "pm10") return Pollutant::PM10;
    fail(ErrorKind::Validation, "unknown pollutant '" + std::string(name) + "'");
}

}  // namespace aqnet
