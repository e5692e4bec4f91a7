#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "aqnet/dataset.hpp"

namespace aqnet {

inline constexpr const char* kPlantedSignalFile = "planted_signal.json";

/// Ground truth for synthetic datasets. Concentrations are
///
///   c_k = max(0, scale * max(0, lin_k) + noise_sigma * N(0, 1))
///   lin_k = intercept_k + s2_coef_k * mean(s2) + s5p_coef_k * mean(s5p)
///         + altitude_coef_k * altitude / 1000 + pop_density_coef_k * pop_density / 1000
///         + sum over active binary features of flag_coef[f]_k
///
/// where mean(s2) and mean(s5p) are taken over the stored float32 arrays.
struct PlantedSignalSpec {
    PollutantTriple intercept{8.0, 45.0, 14.0};
    PollutantTriple s2_coef{10.0, 4.0, 12.0};
    PollutantTriple s5p_coef{6.0, -3.0, 2.0};
    PollutantTriple altitude_coef{-2.0, 12.0, -1.0};     // per km
    PollutantTriple pop_density_coef{2.0, -1.0, 1.5};    // per 1000 persons/km²
    // indexed by BinaryFeature: rural, suburban, urban, traffic, industrial, background
    std::array<PollutantTriple, 6> flag_coef{{
        {-4.0, 6.0, -4.0},
        {0.0, 1.0, 0.0},
        {6.0, -4.0, 5.0},
        {8.0, -5.0, 4.0},
        {2.0, 0.0, 3.0},
        {-2.0, 2.0, -1.0},
    }};
    double noise_sigma = 1.0;
    double scale = 1.0;

    double altitude_max = 1500.0;
    double pop_density_max = 5000.0;
    std::string id_prefix = "SYN";

    bool operator==(const PlantedSignalSpec&) const = default;
};

void to_json(nlohmann::json& j, const PlantedSignalSpec& s);
void from_json(const nlohmann::json& j, PlantedSignalSpec& s);

PlantedSignalSpec load_planted_spec(const std::filesystem::path& path);

/// Noise-free planted concentrations (the Bayes-optimal predictor).
PollutantTriple planted_concentrations(const PlantedSignalSpec& spec, const StationRecord& record,
                                       const SamplePatch& patch);

/// Writes manifest.csv, patches/ and planted_signal.json under out.
DatasetManifest generate_synthetic(std::size_t n, std::uint64_t seed,
                                   const PlantedSignalSpec& planted,
                                   const std::filesystem::path& out);

}  // namespace aqnet
