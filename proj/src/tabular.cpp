#include "aqnet/tabular.hpp"

#include <cmath>
#include <map>
#include <string>

#include "aqnet/aqi.hpp"
#include "aqnet/error.hpp"

namespace aqnet {

TabularVector encode_tabular(const StationRecord& record) {
    TabularVector v;
    v.values[0] = record.altitude;
    v.values[1] = record.pop_density;
    v.values[2 + static_cast<std::size_t>(record.area_type)] = 1.0;
    v.values[5 + static_cast<std::size_t>(record.station_type)] = 1.0;
    return v;
}

std::string_view to_string(BinaryFeature f) {
    switch (f) {
        case BinaryFeature::Rural: return "rural";
        case BinaryFeature::Suburban: return "suburban";
        case BinaryFeature::Urban: return "urban";
        case BinaryFeature::Traffic: return "traffic";
        case BinaryFeature::Industrial: return "industrial";
        case BinaryFeature::Background: return "background";
    }
    return "?";
}

BinaryFeature parse_binary_feature(std::string_view s) {
    for (BinaryFeature f : kAllBinaryFeatures) {
        if (to_string(f) == s) return f;
    }
    fail(ErrorKind::Validation, "unknown binary feature '" + std::string(s) + "'");
}

bool has_feature(const StationRecord& r, BinaryFeature f) {
    switch (f) {
        case BinaryFeature::Rural: return r.area_type == AreaType::Rural;
        case BinaryFeature::Suburban: return r.area_type == AreaType::Suburban;
        case BinaryFeature::Urban: return r.area_type == AreaType::Urban;
        case BinaryFeature::Traffic: return r.station_type == StationType::Traffic;
        case BinaryFeature::Industrial: return r.station_type == StationType::Industrial;
        case BinaryFeature::Background: return r.station_type == StationType::Background;
    }
    return false;
}

namespace {

double mean_of(std::span<const double> xs) {
    double sum = 0.0;
    for (double x : xs) sum += x;
    return sum / static_cast<double>(xs.size());
}

}  // namespace

RelativeInfluence relative_influence(std::span<const double> true_group,
                                     std::span<const double> false_group) {
    if (true_group.empty() || false_group.empty()) {
        fail(ErrorKind::Validation, "relative influence needs records on both sides of the feature");
    }
    RelativeInfluence ri;
    ri.n_true = true_group.size();
    ri.n_false = false_group.size();
    ri.phi_true = mean_of(true_group);
    ri.phi_false = mean_of(false_group);
    const double denom = ri.phi_true + ri.phi_false;
    if (denom != 0.0) ri.value = (ri.phi_true - ri.phi_false) / denom;
    return ri;
}

RelativeInfluence relative_influence(std::span<const StationRecord> records,
                                     BinaryFeature feature, Pollutant pollutant) {
    std::vector<double> yes, no;
    for (const auto& r : records) {
        (has_feature(r, feature) ? yes : no).push_back(r.concentration(pollutant));
    }
    if (yes.empty() || no.empty()) {
        fail(ErrorKind::Validation, "relative influence of '" + std::string(to_string(feature)) +
                                        "': one group is empty");
    }
    return relative_influence(yes, no);
}

BinField parse_bin_field(std::string_view s) {
    if (s == "altitude") return BinField::Altitude;
    if (s == "pop_density") return BinField::PopDensity;
    fail(ErrorKind::Validation, "bin field must be altitude|pop_density, got '" +
                                    std::string(s) + "'");
}

BinnedSeries binned_aggregate(std::span<const StationRecord> records, BinField field,
                              double bin_width, Pollutant pollutant) {
    if (!(bin_width > 0.0) || !std::isfinite(bin_width)) {
        fail(ErrorKind::Validation, "bin width must be positive");
    }
    if (records.empty()) fail(ErrorKind::Validation, "binned aggregate needs at least one record");

    struct Acc {
        double sum = 0.0;
        std::size_t count = 0;
    };
    std::map<long long, Acc> acc;
    for (const auto& r : records) {
        const double x = field == BinField::Altitude ? r.altitude : r.pop_density;
        if (!std::isfinite(x)) continue;
        const auto k = static_cast<long long>(std::floor(x / bin_width));
        auto& a = acc[k];
        a.sum += r.concentration(pollutant);
        ++a.count;
    }

    BinnedSeries series;
    for (const auto& [k, a] : acc) {
        series.bins.push_back({static_cast<double>(k) * bin_width,
                               static_cast<double>(k + 1) * bin_width,
                               a.sum / static_cast<double>(a.count), a.count});
    }
    return series;
}

std::vector<PollutantSummary> dataset_summary(std::span<const StationRecord> records,
                                              const ThresholdSet& thresholds) {
    if (records.empty()) fail(ErrorKind::Validation, "summary needs at least one record");
    std::vector<PollutantSummary> out;
    for (Pollutant p : kAllPollutants) {
        double sum = 0.0;
        for (const auto& r : records) sum += r.concentration(p);
        PollutantSummary s;
        s.pollutant = p;
        s.mean = sum / static_cast<double>(records.size());
        s.threshold = thresholds.at(p);
        s.exceeds = s.mean > s.threshold;
        out.push_back(s);
    }
    return out;
}

}  // namespace aqnet
