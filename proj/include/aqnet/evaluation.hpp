#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aqnet/aqi.hpp"
#include "aqnet/dataset.hpp"
#include "aqnet/model.hpp"

namespace aqnet {

/// Signed percentage error 100 * (pred - truth) / truth. Throws when truth <= 0.
double percentage_error(double predicted, double truth);

struct ErrorSummary {
    std::size_t count = 0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
};

/// Quartiles by linear interpolation between order statistics.
ErrorSummary error_summary(std::span<const double> values);

/// Anything that maps a station to a (NO2, O3, PM10) prediction in µg/m³.
class TriplePredictor {
public:
    virtual ~TriplePredictor() = default;
    virtual PollutantTriple predict(const StationRecord& record, const SamplePatch& patch) const = 0;
};

/// Adapts a trained triple-output model; inputs are normalized with the
/// model's stored train-split statistics.
class ModelPredictor final : public TriplePredictor {
public:
    explicit ModelPredictor(const AqNet& model);
    PollutantTriple predict(const StationRecord& record, const SamplePatch& patch) const override;

private:
    const AqNet& model_;
};

struct StationEvaluation {
    std::string station_id;
    double lon = 0.0;
    double lat = 0.0;
    PollutantTriple predicted{};  // raw model output
    PollutantTriple truth{};
    PollutantTriple abs_error{};
    std::array<std::optional<double>, 3> pct_error;  // empty where truth <= 0
    double predicted_alpha = 0.0;  // from clamped predictions
    double true_alpha = 0.0;
    std::optional<double> alpha_pct_error;
};

struct OODSummary {
    std::string quantity;  // pollutant name or "alpha"
    std::optional<ErrorSummary> pct_error;
    std::size_t excluded = 0;
};

struct OODReport {
    std::vector<StationEvaluation> stations;  // ordered by station_id
    std::vector<OODSummary> summaries;        // no2, o3, pm10, alpha
};

/// Predicts every OOD station, compares against measurements and the
/// measurement-based alpha. Throws Error(Leakage) when any OOD station id is
/// among training_ids.
OODReport ood_evaluate(const TriplePredictor& predictor, const DatasetManifest& ood,
                       std::span<const std::string> training_ids,
                       const ThresholdSet& thresholds = {});

nlohmann::json ood_report_to_json(const OODReport& report);

/// `station_id,lon,lat,pollutant,abs_error`; one row per station x pollutant,
/// followed by one "alpha" row per station.
void export_geo_errors(const OODReport& report, const std::filesystem::path& out);

struct GeoErrorRow {
    std::string station_id;
    double lon = 0.0;
    double lat = 0.0;
    std::string quantity;
    double abs_error = 0.0;
};

std::vector<GeoErrorRow> read_geo_errors(const std::filesystem::path& path);

/// `station_id,quantity,predicted,truth,pct_error` (pct_error empty when undefined).
void export_pct_errors(const OODReport& report, const std::filesystem::path& out);

}  // namespace aqnet
