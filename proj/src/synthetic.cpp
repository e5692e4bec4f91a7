#include "aqnet/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "aqnet/error.hpp"
#include "aqnet/rng.hpp"

namespace fs = std::filesystem;

namespace aqnet {

void to_json(nlohmann::json& j, const PlantedSignalSpec& s) {
    nlohmann::json flags = nlohmann::json::object();
    for (BinaryFeature f : kAllBinaryFeatures) {
        flags[std::string(to_string(f))] = s.flag_coef[static_cast<std::size_t>(f)];
    }
    j = nlohmann::json{{"pollutant_order", {"no2", "o3", "pm10"}},
                       {"intercept", s.intercept},
                       {"s2_coef", s.s2_coef},
                       {"s5p_coef", s.s5p_coef},
                       {"altitude_coef_per_km", s.altitude_coef},
                       {"pop_density_coef_per_1000", s.pop_density_coef},
                       {"flag_coef", flags},
                       {"noise_sigma", s.noise_sigma},
                       {"scale", s.scale},
                       {"altitude_max", s.altitude_max},
                       {"pop_density_max", s.pop_density_max},
                       {"id_prefix", s.id_prefix}};
}

void from_json(const nlohmann::json& j, PlantedSignalSpec& s) {
    PlantedSignalSpec d;
    s.intercept = j.value("intercept", d.intercept);
    s.s2_coef = j.value("s2_coef", d.s2_coef);
    s.s5p_coef = j.value("s5p_coef", d.s5p_coef);
    s.altitude_coef = j.value("altitude_coef_per_km", d.altitude_coef);
    s.pop_density_coef = j.value("pop_density_coef_per_1000", d.pop_density_coef);
    s.flag_coef = d.flag_coef;
    if (j.contains("flag_coef")) {
        for (const auto& [name, value] : j.at("flag_coef").items()) {
            s.flag_coef[static_cast<std::size_t>(parse_binary_feature(name))] =
                value.get<PollutantTriple>();
        }
    }
    s.noise_sigma = j.value("noise_sigma", d.noise_sigma);
    s.scale = j.value("scale", d.scale);
    s.altitude_max = j.value("altitude_max", d.altitude_max);
    s.pop_density_max = j.value("pop_density_max", d.pop_density_max);
    s.id_prefix = j.value("id_prefix", d.id_prefix);
}

PlantedSignalSpec load_planted_spec(const fs::path& path) {
    fs::path file = fs::is_directory(path) ? path / kPlantedSignalFile : path;
    std::ifstream in(file);
    if (!in) fail(ErrorKind::Io, "cannot open planted signal spec " + file.string());
    try {
        nlohmann::json j;
        in >> j;
        return j.get<PlantedSignalSpec>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, "planted signal spec " + file.string() + ": " + e.what());
    }
}

namespace {

double array_mean(const std::vector<float>& xs) {
    double sum = 0.0;
    for (float x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

constexpr std::array<const char*, 12> kCountries{"AT", "BE", "CZ", "DE", "DK", "ES",
                                                 "FR", "IT", "NL", "PL", "PT", "SE"};

// Separable low-frequency field: sin along columns times cos along rows.
std::vector<double> smooth_pattern(Rng& rng) {
    const double fx = 1.0 + static_cast<double>(rng.below(2));
    const double fy = 1.0 + static_cast<double>(rng.below(2));
    const double px = rng.uniform();
    const double py = rng.uniform();
    std::vector<double> cols(kPatchSide), rows(kPatchSide);
    for (std::size_t i = 0; i < kPatchSide; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(kPatchSide);
        cols[i] = std::sin(2.0 * std::numbers::pi * (fx * t + px));
        rows[i] = std::cos(2.0 * std::numbers::pi * (fy * t + py));
    }
    std::vector<double> field(kPatchPixels);
    for (std::size_t r = 0; r < kPatchSide; ++r) {
        for (std::size_t c = 0; c < kPatchSide; ++c) field[r * kPatchSide + c] = rows[r] * cols[c];
    }
    return field;
}

}  // namespace

PollutantTriple planted_concentrations(const PlantedSignalSpec& spec, const StationRecord& record,
                                       const SamplePatch& patch) {
    const double s2_signal = array_mean(patch.s2);
    const double s5p_signal = array_mean(patch.s5p);
    PollutantTriple out{};
    for (std::size_t k = 0; k < 3; ++k) {
        double lin = spec.intercept[k] + spec.s2_coef[k] * s2_signal + spec.s5p_coef[k] * s5p_signal +
                     spec.altitude_coef[k] * record.altitude / 1000.0 +
                     spec.pop_density_coef[k] * record.pop_density / 1000.0;
        for (BinaryFeature f : kAllBinaryFeatures) {
            if (has_feature(record, f)) lin += spec.flag_coef[static_cast<std::size_t>(f)][k];
        }
        out[k] = spec.scale * std::max(0.0, lin);
    }
    return out;
}

DatasetManifest generate_synthetic(std::size_t n, std::uint64_t seed,
                                   const PlantedSignalSpec& planted, const fs::path& out) {
    if (n < 4) fail(ErrorKind::Validation, "synthetic datasets need n >= 4");
    if (!(planted.noise_sigma >= 0.0)) fail(ErrorKind::Validation, "noise_sigma must be >= 0");
    if (!(planted.scale > 0.0)) fail(ErrorKind::Validation, "scale must be > 0");

    std::error_code ec;
    fs::create_directories(out / "patches", ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + (out / "patches").string() + ": " + ec.message());

    Rng rng(derive_seed(seed, 0x5e17));
    std::vector<ManifestEntry> entries;
    entries.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        char id[64];
        std::snprintf(id, sizeof(id), "%s%05zu", planted.id_prefix.c_str(), i);

        StationRecord r;
        r.station_id = id;
        r.country = kCountries[rng.below(kCountries.size())];
        r.lon = std::round(rng.uniform(-10.0, 30.0) * 1e4) / 1e4;
        r.lat = std::round(rng.uniform(36.0, 60.0) * 1e4) / 1e4;
        const double ua = rng.uniform();
        r.altitude = std::round(ua * ua * planted.altitude_max);
        const double up = rng.uniform();
        r.pop_density = std::round(up * up * planted.pop_density_max);
        r.area_type = static_cast<AreaType>(rng.below(3));
        r.station_type = static_cast<StationType>(rng.below(3));

        SamplePatch patch;
        const double s2_level = rng.uniform(0.05, 0.35);
        const auto s2_field = smooth_pattern(rng);
        for (std::size_t b = 0; b < kS2Bands; ++b) {
            const double gain = 0.6 + 0.08 * static_cast<double>(b);
            for (std::size_t p = 0; p < kPatchPixels; ++p) {
                const double texture = 0.02 * rng.uniform();
                patch.s2[b * kPatchPixels + p] = static_cast<float>(
                    s2_level * (gain * (1.0 + 0.3 * s2_field[p]) + texture));
            }
        }
        const double s5p_level = rng.uniform(0.5, 2.0);
        const auto s5p_field = smooth_pattern(rng);
        for (std::size_t p = 0; p < kPatchPixels; ++p) {
            patch.s5p[p] = static_cast<float>(s5p_level * (1.0 + 0.25 * s5p_field[p]) +
                                              0.02 * rng.normal());
        }

        const PollutantTriple clean = planted_concentrations(planted, r, patch);
        for (std::size_t k = 0; k < 3; ++k) {
            const double noise = planted.noise_sigma * rng.normal();
            r.measured[k] = std::max(0.0, clean[k] + noise);
        }

        auto [s2_name, s5p_name] = write_patch(out / "patches", r.station_id, patch);
        entries.push_back({r, "patches/" + s2_name, "patches/" + s5p_name});
    }

    DatasetManifest manifest(out, std::move(entries));
    write_manifest(manifest);

    std::ofstream js(out / kPlantedSignalFile, std::ios::binary);
    if (!js) fail(ErrorKind::Io, "cannot write planted signal spec under " + out.string());
    js << nlohmann::json(planted).dump(2) << '\n';
    return manifest;
}

}  // namespace aqnet
