#pragma once

#include <filesystem>
#include <map>
#include <string_view>
#include <vector>

#include "aqnet/pollutant.hpp"

namespace aqnet {

/// Unhealthy-level thresholds Th_k in µg/m³.
struct ThresholdSet {
    std::map<Pollutant, double> values{
        {Pollutant::NO2, 10.0}, {Pollutant::O3, 60.0}, {Pollutant::PM10, 15.0}};

    double at(Pollutant p) const;
};

/// Reads {"no2": .., "o3": .., "pm10": ..}; missing keys keep their defaults.
ThresholdSet load_thresholds(const std::filesystem::path& path);

enum class AirQualityCategory { NoPollution, SomePollution, Unhealthy };

std::string_view to_string(AirQualityCategory c);

struct AqiComponent {
    Pollutant pollutant = Pollutant::NO2;
    double prediction = 0.0;  // after clamping at zero
    double threshold = 0.0;
    double ratio = 0.0;       // prediction / threshold
};

struct AQIResult {
    std::vector<AqiComponent> components;
    double alpha = 0.0;
    AirQualityCategory category = AirQualityCategory::NoPollution;
};

/// alpha = 1 - (1/N) * sum_k (Th_k - p_k) / Th_k, with p_k clamped at 0.
AQIResult compute_alpha(const std::map<Pollutant, double>& predictions,
                        const ThresholdSet& thresholds = {});

/// Convenience for full triples in (NO2, O3, PM10) order.
AQIResult compute_alpha(const PollutantTriple& predictions, const ThresholdSet& thresholds = {});

/// 0 -> no pollution, (0, 1] -> some pollution, > 1 -> unhealthy.
AirQualityCategory quantify(double alpha);

}  // namespace aqnet
