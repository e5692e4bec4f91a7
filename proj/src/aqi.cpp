#include "aqnet/aqi.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "aqnet/error.hpp"

namespace aqnet {

double ThresholdSet::at(Pollutant p) const {
    auto it = values.find(p);
    if (it == values.end()) {
        fail(ErrorKind::Validation,
             "no threshold configured for pollutant '" + std::string(to_string(p)) + "'");
    }
    return it->second;
}

ThresholdSet load_thresholds(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open thresholds file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, "thresholds file " + path.string() + ": " + e.what());
    }
    if (!j.is_object()) fail(ErrorKind::Format, "thresholds file must hold a JSON object");

    ThresholdSet set;
    for (const auto& [key, value] : j.items()) {
        const Pollutant p = parse_pollutant(key);
        if (!value.is_number()) {
            fail(ErrorKind::Format, "threshold for '" + key + "' is not a number");
        }
        const double th = value.get<double>();
        if (!(th > 0.0) || !std::isfinite(th)) {
            fail(ErrorKind::Validation, "threshold for '" + key + "' must be positive");
        }
        set.values[p] = th;
    }
    return set;
}

std::string_view to_string(AirQualityCategory c) {
    switch (c) {
        case AirQualityCategory::NoPollution: return "no_pollution";
        case AirQualityCategory::SomePollution: return "some_pollution";
        case AirQualityCategory::Unhealthy: return "unhealthy";
    }
    return "?";
}

AQIResult compute_alpha(const std::map<Pollutant, double>& predictions,
                        const ThresholdSet& thresholds) {
    if (predictions.empty()) fail(ErrorKind::Validation, "alpha needs at least one pollutant");

    AQIResult result;
    double deficit_sum = 0.0;
    for (const auto& [pollutant, raw] : predictions) {
        if (!std::isfinite(raw)) {
            fail(ErrorKind::Numeric,
                 "non-finite prediction for '" + std::string(to_string(pollutant)) + "'");
        }
        const double th = thresholds.at(pollutant);
        if (!(th > 0.0)) fail(ErrorKind::Validation, "thresholds must be positive");
        const double p = raw < 0.0 ? 0.0 : raw;
        deficit_sum += (th - p) / th;
        result.components.push_back({pollutant, p, th, p / th});
    }
    const double n = static_cast<double>(predictions.size());
    result.alpha = 1.0 - deficit_sum / n;
    // 1 - mean(1 - r) can land a few ulps below zero when every p is 0
    if (result.alpha < 0.0) result.alpha = 0.0;
    result.category = quantify(result.alpha);
    return result;
}

AQIResult compute_alpha(const PollutantTriple& predictions, const ThresholdSet& thresholds) {
    std::map<Pollutant, double> m;
    for (Pollutant p : kAllPollutants) m[p] = predictions[index_of(p)];
    return compute_alpha(m, thresholds);
}

AirQualityCategory quantify(double alpha) {
    if (!(alpha >= 0.0)) fail(ErrorKind::Validation, "alpha must be non-negative");
    if (alpha == 0.0) return AirQualityCategory::NoPollution;
    if (alpha <= 1.0) return AirQualityCategory::SomePollution;
    return AirQualityCategory::Unhealthy;
}

}  // namespace aqnet
