#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "aqnet/dataset.hpp"
#include "aqnet/model.hpp"

namespace aqnet {

struct TrainSettings {
    std::size_t epochs = 30;
    std::size_t min_epochs_before_early_stop = 25;
    std::size_t patience = 5;
    double learning_rate = 0.001;
    std::size_t batch_size = 40;
    double dropout = 0.0;
    std::uint64_t seed = 0;
    std::string loss = "mse_sum_over_outputs";

    void validate() const;
    bool operator==(const TrainSettings&) const = default;
};

void to_json(nlohmann::json& j, const TrainSettings& s);
void from_json(const nlohmann::json& j, TrainSettings& s);

struct MetricSet {
    double r2 = 0.0;  // NaN when undefined (fewer than 2 values or constant truths)
    double mae = 0.0;
    double mse = 0.0;
};

/// r2 = 1 - SSres/SStot, mae = mean |pred - truth|, mse = mean (pred - truth)^2.
/// Throws when lengths differ, fewer than 2 values, or truths are constant.
MetricSet evaluate_metrics(std::span<const double> predictions, std::span<const double> truths);

struct PollutantMetrics {
    Pollutant pollutant = Pollutant::NO2;
    MetricSet metrics;
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainReport {
    std::uint64_t seed = 0;
    std::string config_fingerprint;
    std::size_t n_train = 0, n_val = 0, n_test = 0;
    std::size_t batches_per_epoch = 0;
    std::vector<EpochRecord> curve;
    std::size_t best_epoch = 0;
    std::size_t stopped_epoch = 0;
    bool early_stopped = false;
    std::vector<PollutantMetrics> train_metrics;
    std::vector<PollutantMetrics> val_metrics;
    std::vector<PollutantMetrics> test_metrics;
    double wall_clock_hours = 0.0;

    const MetricSet& test(Pollutant p) const;
    const MetricSet& val(Pollutant p) const;
    const MetricSet& train(Pollutant p) const;
};

/// include_timing=false drops wall-clock fields so identical runs serialize identically.
nlohmann::json report_to_json(const TrainReport& r, bool include_timing = true);
void write_curve_csv(const TrainReport& r, const std::filesystem::path& path);

struct TrainResult {
    TrainReport report;
    AqNet model;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Trains on split.train, early-stops on split.val, reports metrics on every
/// split with the best-validation weights restored.
TrainResult train(const DatasetManifest& manifest, const SplitAssignment& split,
                  const ModelConfig& config, const TrainSettings& settings,
                  const EpochCallback& on_epoch = {});

/// Number of optimizer steps per epoch: ceil(n / batch) minus a trailing batch of size 1.
std::size_t batches_per_epoch(std::size_t n_train, std::size_t batch_size);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation
};

MeanStd mean_std(std::span<const double> values);

/// "0.66±0.06"
std::string format_mean_std(const MeanStd& m, int decimals = 2);

struct AggregateMetrics {
    Pollutant pollutant = Pollutant::NO2;
    MeanStd r2, mae, mse;
};

struct AggregateReport {
    std::size_t n_runs = 0;
    std::vector<AggregateMetrics> test;
    MeanStd wall_clock_hours;
    std::vector<TrainReport> runs;
};

AggregateReport aggregate_reports(std::vector<TrainReport> runs);
nlohmann::json aggregate_to_json(const AggregateReport& a, bool include_timing = true);

/// Runs seeds settings.seed + i for i in [0, n_runs), each with its own split.
AggregateReport multi_run(const DatasetManifest& manifest, const ModelConfig& config,
                          const TrainSettings& settings, std::size_t n_runs,
                          const EpochCallback& on_epoch = {});

/// r2 per hour of training.
double efficiency_score(double r2, double runtime_hours);

}  // namespace aqnet
