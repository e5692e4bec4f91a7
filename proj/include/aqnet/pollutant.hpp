#pragma once

#include <array>
#include <string>
#include <string_view>

namespace aqnet {

/// Pollutants of the 3-pollutant dataset. The enum order is the output order
/// of triple-output models.
enum class Pollutant { NO2 = 0, O3 = 1, PM10 = 2 };

inline constexpr std::array<Pollutant, 3> kAllPollutants{Pollutant::NO2, Pollutant::O3,
                                                         Pollutant::PM10};

inline constexpr std::size_t index_of(Pollutant p) { return static_cast<std::size_t>(p); }

std::string_view to_string(Pollutant p);

/// Accepts "no2", "o3", "pm10" (case-insensitive). Throws Error on anything else.
Pollutant parse_pollutant(std::string_view name);

/// Per-pollutant values in kAllPollutants order.
using PollutantTriple = std::array<double, 3>;

}  // namespace aqnet
