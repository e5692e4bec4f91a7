#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "aqnet/station.hpp"

namespace aqnet {

inline constexpr std::size_t kTabularWidth = 8;

/// [altitude, pop_density, rural, suburban, urban, traffic, industrial, background]
struct TabularVector {
    std::array<double, kTabularWidth> values{};

    bool operator==(const TabularVector&) const = default;
};

TabularVector encode_tabular(const StationRecord& record);

enum class BinaryFeature { Rural, Suburban, Urban, Traffic, Industrial, Background };

inline constexpr std::array<BinaryFeature, 6> kAllBinaryFeatures{
    BinaryFeature::Rural,   BinaryFeature::Suburban,   BinaryFeature::Urban,
    BinaryFeature::Traffic, BinaryFeature::Industrial, BinaryFeature::Background};

std::string_view to_string(BinaryFeature f);
BinaryFeature parse_binary_feature(std::string_view s);
bool has_feature(const StationRecord& record, BinaryFeature f);

struct RelativeInfluence {
    double phi_true = 0.0;   // mean concentration where the feature holds
    double phi_false = 0.0;  // mean concentration where it does not
    std::size_t n_true = 0;
    std::size_t n_false = 0;
    std::optional<double> value;  // empty when phi_true + phi_false == 0
};

/// RI = (phi1 - phi0) / (phi0 + phi1) from the two group means.
/// Throws when either group is empty.
RelativeInfluence relative_influence(std::span<const StationRecord> records,
                                     BinaryFeature feature, Pollutant pollutant);

/// Same statistic from explicit concentration groups.
RelativeInfluence relative_influence(std::span<const double> true_group,
                                     std::span<const double> false_group);

enum class BinField { Altitude, PopDensity };

BinField parse_bin_field(std::string_view s);

struct Bin {
    double lo = 0.0;
    double hi = 0.0;
    double mean = 0.0;
    std::size_t count = 0;
};

struct BinnedSeries {
    std::vector<Bin> bins;  // ascending, empty bins omitted
};

/// Mean concentration over half-open bins [k*w, (k+1)*w) of the chosen field.
BinnedSeries binned_aggregate(std::span<const StationRecord> records, BinField field,
                              double bin_width, Pollutant pollutant);

struct PollutantSummary {
    Pollutant pollutant = Pollutant::NO2;
    double mean = 0.0;
    double threshold = 0.0;
    bool exceeds = false;
};

struct ThresholdSet;

/// Per-pollutant dataset averages compared against thresholds.
std::vector<PollutantSummary> dataset_summary(std::span<const StationRecord> records,
                                              const ThresholdSet& thresholds);

}  // namespace aqnet
