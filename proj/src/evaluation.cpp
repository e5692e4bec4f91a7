#include "aqnet/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "aqnet/error.hpp"

namespace fs = std::filesystem;

namespace aqnet {

double percentage_error(double predicted, double truth) {
    if (!(truth > 0.0)) fail(ErrorKind::Validation, "percentage error is undefined for truth <= 0");
    return 100.0 * (predicted - truth) / truth;
}

namespace {

double interpolated_quantile(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

ErrorSummary error_summary(std::span<const double> values) {
    if (values.empty()) fail(ErrorKind::Validation, "error summary of an empty list");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    ErrorSummary s;
    s.count = sorted.size();
    s.q1 = interpolated_quantile(sorted, 0.25);
    s.median = interpolated_quantile(sorted, 0.5);
    s.q3 = interpolated_quantile(sorted, 0.75);
    s.iqr = s.q3 - s.q1;
    return s;
}

ModelPredictor::ModelPredictor(const AqNet& model) : model_(model) {
    if (!model.config().outputs.triple) {
        fail(ErrorKind::Validation, "out-of-distribution evaluation needs a triple-output model");
    }
    if (!model.norm_stats) {
        fail(ErrorKind::Validation, "model carries no normalization statistics");
    }
}

PollutantTriple ModelPredictor::predict(const StationRecord& record, const SamplePatch& patch) const {
    const NormalizedSample x = normalize_sample(patch, record, *model_.norm_stats);
    const nn::Tensor out = model_.predict(make_inputs({&x}, model_.config().use_tabular));
    return {out[0], out[1], out[2]};
}

OODReport ood_evaluate(const TriplePredictor& predictor, const DatasetManifest& ood,
                       std::span<const std::string> training_ids, const ThresholdSet& thresholds) {
    if (ood.size() == 0) fail(ErrorKind::Validation, "OOD dataset is empty");
    const std::unordered_set<std::string> seen(training_ids.begin(), training_ids.end());
    for (const auto& e : ood.entries()) {
        if (seen.count(e.record.station_id)) {
            fail(ErrorKind::Leakage, "OOD station '" + e.record.station_id +
                                         "' is also a training station");
        }
    }

    std::vector<std::string> ids = ood.station_ids();
    std::sort(ids.begin(), ids.end());

    OODReport report;
    for (const auto& id : ids) {
        const auto& rec = ood.entry(id).record;
        StationEvaluation row;
        row.station_id = id;
        row.lon = rec.lon;
        row.lat = rec.lat;
        row.predicted = predictor.predict(rec, load_patch(id, ood));
        row.truth = rec.measured;
        for (std::size_t k = 0; k < 3; ++k) {
            row.abs_error[k] = std::abs(row.predicted[k] - row.truth[k]);
            if (row.truth[k] > 0.0) row.pct_error[k] = percentage_error(row.predicted[k], row.truth[k]);
        }
        row.predicted_alpha = compute_alpha(row.predicted, thresholds).alpha;
        row.true_alpha = compute_alpha(row.truth, thresholds).alpha;
        if (row.true_alpha > 0.0) {
            row.alpha_pct_error = percentage_error(row.predicted_alpha, row.true_alpha);
        }
        report.stations.push_back(std::move(row));
    }

    auto summarize = [&](std::string name, auto&& getter) {
        OODSummary s;
        s.quantity = std::move(name);
        std::vector<double> values;
        for (const auto& row : report.stations) {
            const std::optional<double> v = getter(row);
            if (v) {
                values.push_back(*v);
            } else {
                ++s.excluded;
            }
        }
        if (!values.empty()) s.pct_error = error_summary(values);
        report.summaries.push_back(std::move(s));
    };
    for (Pollutant p : kAllPollutants) {
        summarize(std::string(to_string(p)),
                  [p](const StationEvaluation& r) { return r.pct_error[index_of(p)]; });
    }
    summarize("alpha", [](const StationEvaluation& r) { return r.alpha_pct_error; });
    return report;
}

nlohmann::json ood_report_to_json(const OODReport& report) {
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    nlohmann::json stations = nlohmann::json::array();
    for (const auto& r : report.stations) {
        nlohmann::json per = nlohmann::json::object();
        for (Pollutant p : kAllPollutants) {
            const auto k = index_of(p);
            per[std::string(to_string(p))] = {{"predicted", r.predicted[k]},
                                              {"true", r.truth[k]},
                                              {"abs_error", r.abs_error[k]},
                                              {"pct_error", opt(r.pct_error[k])}};
        }
        stations.push_back({{"station_id", r.station_id},
                            {"lon", r.lon},
                            {"lat", r.lat},
                            {"pollutants", per},
                            {"predicted_alpha", r.predicted_alpha},
                            {"true_alpha", r.true_alpha},
                            {"alpha_pct_error", opt(r.alpha_pct_error)}});
    }
    nlohmann::json summaries = nlohmann::json::object();
    for (const auto& s : report.summaries) {
        nlohmann::json entry{{"excluded", s.excluded}};
        if (s.pct_error) {
            entry["count"] = s.pct_error->count;
            entry["median"] = s.pct_error->median;
            entry["q1"] = s.pct_error->q1;
            entry["q3"] = s.pct_error->q3;
            entry["iqr"] = s.pct_error->iqr;
        }
        summaries[s.quantity] = entry;
    }
    return {{"stations", stations}, {"pct_error_summary", summaries}};
}

void export_geo_errors(const OODReport& report, const fs::path& out) {
    if (report.stations.empty()) fail(ErrorKind::Validation, "cannot export an empty report");
    std::ofstream f(out, std::ios::binary);
    if (!f) fail(ErrorKind::Io, "cannot write " + out.string());
    f << "station_id,lon,lat,pollutant,abs_error\n";
    for (const auto& r : report.stations) {
        for (Pollutant p : kAllPollutants) {
            f << r.station_id << ',' << format_double(r.lon) << ',' << format_double(r.lat) << ','
              << to_string(p) << ',' << format_double(r.abs_error[index_of(p)]) << '\n';
        }
    }
    for (const auto& r : report.stations) {
        f << r.station_id << ',' << format_double(r.lon) << ',' << format_double(r.lat)
          << ",alpha," << format_double(std::abs(r.predicted_alpha - r.true_alpha)) << '\n';
    }
    if (!f) fail(ErrorKind::Io, "failed writing " + out.string());
}

std::vector<GeoErrorRow> read_geo_errors(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != "station_id,lon,lat,pollutant,abs_error") {
        fail(ErrorKind::Format, path.string() + " has an unexpected header");
    }
    auto num = [&](const std::string& s) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) {
            fail(ErrorKind::Format, "'" + s + "' is not a number in " + path.string());
        }
        return v;
    };
    std::vector<GeoErrorRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() != 5) fail(ErrorKind::Format, "malformed geo error row: " + line);
        rows.push_back({f[0], num(f[1]), num(f[2]), f[3], num(f[4])});
    }
    return rows;
}

void export_pct_errors(const OODReport& report, const fs::path& out) {
    std::ofstream f(out, std::ios::binary);
    if (!f) fail(ErrorKind::Io, "cannot write " + out.string());
    f << "station_id,quantity,predicted,truth,pct_error\n";
    auto cell = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& r : report.stations) {
        for (Pollutant p : kAllPollutants) {
            const auto k = index_of(p);
            f << r.station_id << ',' << to_string(p) << ',' << format_double(r.predicted[k]) << ','
              << format_double(r.truth[k]) << ',' << cell(r.pct_error[k]) << '\n';
        }
        f << r.station_id << ",alpha," << format_double(r.predicted_alpha) << ','
          << format_double(r.true_alpha) << ',' << cell(r.alpha_pct_error) << '\n';
    }
}

}  // namespace aqnet
