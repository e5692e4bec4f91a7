#include "aqnet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "aqnet/error.hpp"
#include "aqnet/model_io.hpp"
#include "aqnet/nn/adam.hpp"
#include "aqnet/rng.hpp"

namespace aqnet {

using nn::Tensor;

void TrainSettings::validate() const {
    if (epochs == 0) fail(ErrorKind::Validation, "epochs must be >= 1");
    if (batch_size < 2) fail(ErrorKind::Validation, "batch_size must be >= 2");
    if (min_epochs_before_early_stop > epochs) {
        fail(ErrorKind::Validation, "min_epochs_before_early_stop must not exceed epochs");
    }
    if (patience == 0) fail(ErrorKind::Validation, "patience must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
        fail(ErrorKind::Validation, "learning_rate must be positive");
    }
    if (dropout < 0.0 || dropout >= 1.0) fail(ErrorKind::Validation, "dropout must lie in [0, 1)");
    if (loss != "mse_sum_over_outputs") {
        fail(ErrorKind::Validation, "loss must be mse_sum_over_outputs, got '" + loss + "'");
    }
}

void to_json(nlohmann::json& j, const TrainSettings& s) {
    j = nlohmann::json{{"epochs", s.epochs},
                       {"min_epochs_before_early_stop", s.min_epochs_before_early_stop},
                       {"patience", s.patience},
                       {"learning_rate", s.learning_rate},
                       {"batch_size", s.batch_size},
                       {"dropout", s.dropout},
                       {"seed", s.seed},
                       {"loss", s.loss}};
}

void from_json(const nlohmann::json& j, TrainSettings& s) {
    TrainSettings d;
    s.epochs = j.value("epochs", d.epochs);
    s.min_epochs_before_early_stop =
        j.value("min_epochs_before_early_stop", d.min_epochs_before_early_stop);
    s.patience = j.value("patience", d.patience);
    s.learning_rate = j.value("learning_rate", d.learning_rate);
    s.batch_size = j.value("batch_size", d.batch_size);
    s.dropout = j.value("dropout", d.dropout);
    s.seed = j.value("seed", d.seed);
    s.loss = j.value("loss", d.loss);
}

MetricSet evaluate_metrics(std::span<const double> pred, std::span<const double> truth) {
    if (pred.size() != truth.size()) {
        fail(ErrorKind::Validation, "metric inputs differ in length (" + std::to_string(pred.size()) +
                                        " vs " + std::to_string(truth.size()) + ")");
    }
    if (pred.size() < 2) fail(ErrorKind::Validation, "metrics need at least 2 values");
    const double n = static_cast<double>(pred.size());
    double truth_sum = 0.0;
    for (double y : truth) truth_sum += y;
    const double truth_mean = truth_sum / n;

    double ss_res = 0.0, ss_tot = 0.0, abs_sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double e = pred[i] - truth[i];
        ss_res += e * e;
        abs_sum += std::abs(e);
        const double d = truth[i] - truth_mean;
        ss_tot += d * d;
    }
    if (ss_tot == 0.0) fail(ErrorKind::Validation, "R2 is undefined for constant truths");
    return {1.0 - ss_res / ss_tot, abs_sum / n, ss_res / n};
}

namespace {

const MetricSet& find_metrics(const std::vector<PollutantMetrics>& list, Pollutant p) {
    for (const auto& m : list) {
        if (m.pollutant == p) return m.metrics;
    }
    fail(ErrorKind::Validation, "report has no metrics for '" + std::string(to_string(p)) + "'");
}

}  // namespace

const MetricSet& TrainReport::test(Pollutant p) const { return find_metrics(test_metrics, p); }
const MetricSet& TrainReport::val(Pollutant p) const { return find_metrics(val_metrics, p); }
const MetricSet& TrainReport::train(Pollutant p) const { return find_metrics(train_metrics, p); }

std::size_t batches_per_epoch(std::size_t n_train, std::size_t batch_size) {
    if (batch_size == 0) return 0;
    std::size_t batches = (n_train + batch_size - 1) / batch_size;
    if (n_train % batch_size == 1 && batches > 0) --batches;
    return batches;
}

namespace {

struct CachedSample {
    NormalizedSample x;
    PollutantTriple y{};
};

std::vector<CachedSample> load_samples(const DatasetManifest& manifest,
                                       const std::vector<std::string>& ids, const NormStats& stats) {
    std::vector<CachedSample> out;
    out.reserve(ids.size());
    for (const auto& id : ids) {
        const auto& rec = manifest.entry(id).record;
        out.push_back({normalize_sample(load_patch(id, manifest), rec, stats), rec.measured});
    }
    return out;
}

ModelInputs gather(const std::vector<CachedSample>& samples, std::span<const std::size_t> idx,
                   bool with_tabular) {
    std::vector<const NormalizedSample*> ptrs;
    ptrs.reserve(idx.size());
    for (auto i : idx) ptrs.push_back(&samples[i].x);
    return make_inputs(ptrs, with_tabular);
}

Tensor scaled_targets(const std::vector<CachedSample>& samples, std::span<const std::size_t> idx,
                      const std::vector<Pollutant>& outputs, const TargetScaling& scaling) {
    const std::size_t k = outputs.size();
    Tensor t({idx.size(), k});
    for (std::size_t b = 0; b < idx.size(); ++b) {
        for (std::size_t j = 0; j < k; ++j) {
            const double y = samples[idx[b]].y[index_of(outputs[j])];
            t[b * k + j] = (y - scaling.mean[j]) / scaling.std[j];
        }
    }
    return t;
}

// Sum over outputs of the per-output mean squared error; fills grad with dL/dout.
double mse_sum_loss(const Tensor& out, const Tensor& target, Tensor* grad) {
    const std::size_t b = out.dim(0);
    const double inv_b = 1.0 / static_cast<double>(b);
    double loss = 0.0;
    if (grad) *grad = Tensor(out.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double e = out[i] - target[i];
        loss += e * e * inv_b;
        if (grad) (*grad)[i] = 2.0 * e * inv_b;
    }
    return loss;
}

constexpr std::size_t kEvalChunk = 16;

// Evaluation-mode outputs for every sample, in standardized units, [N, K].
Tensor forward_all(const AqNet& model, const std::vector<CachedSample>& samples) {
    const std::size_t k = model.config().outputs.arity();
    Tensor out({samples.size(), k});
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < samples.size(); start += kEvalChunk) {
        idx.clear();
        for (std::size_t i = start; i < std::min(samples.size(), start + kEvalChunk); ++i) idx.push_back(i);
        Tensor o = model.forward(gather(samples, idx, model.config().use_tabular), nn::ForwardMode{});
        std::copy(o.values().begin(), o.values().end(), out.data() + start * k);
    }
    return out;
}

double dataset_loss(const AqNet& model, const std::vector<CachedSample>& samples) {
    if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::vector<std::size_t> idx(samples.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const Tensor out = forward_all(model, samples);
    const Tensor target = scaled_targets(samples, idx, model.output_pollutants(), model.target_scaling);
    return mse_sum_loss(out, target, nullptr);
}

std::vector<PollutantMetrics> split_metrics(const AqNet& model,
                                            const std::vector<CachedSample>& samples) {
    std::vector<PollutantMetrics> out;
    const auto pollutants = model.output_pollutants();
    if (samples.empty()) return out;
    const Tensor raw = forward_all(model, samples);
    const std::size_t k = pollutants.size();
    for (std::size_t j = 0; j < k; ++j) {
        std::vector<double> pred, truth;
        for (std::size_t i = 0; i < samples.size(); ++i) {
            pred.push_back(raw[i * k + j] * model.target_scaling.std[j] + model.target_scaling.mean[j]);
            truth.push_back(samples[i].y[index_of(pollutants[j])]);
        }
        MetricSet m;
        try {
            m = evaluate_metrics(pred, truth);
        } catch (const Error&) {
            // too few samples or constant truths: keep mae/mse, r2 undefined
            double abs_sum = 0.0, sq_sum = 0.0;
            for (std::size_t i = 0; i < pred.size(); ++i) {
                abs_sum += std::abs(pred[i] - truth[i]);
                sq_sum += (pred[i] - truth[i]) * (pred[i] - truth[i]);
            }
            m.r2 = std::numeric_limits<double>::quiet_NaN();
            m.mae = abs_sum / static_cast<double>(pred.size());
            m.mse = sq_sum / static_cast<double>(pred.size());
        }
        out.push_back({pollutants[j], m});
    }
    return out;
}

TargetScaling fit_target_scaling(const std::vector<CachedSample>& samples,
                                 const std::vector<Pollutant>& outputs) {
    TargetScaling s;
    const double n = static_cast<double>(samples.size());
    for (Pollutant p : outputs) {
        double sum = 0.0;
        for (const auto& c : samples) sum += c.y[index_of(p)];
        const double mean = sum / n;
        double ss = 0.0;
        for (const auto& c : samples) ss += (c.y[index_of(p)] - mean) * (c.y[index_of(p)] - mean);
        s.mean.push_back(mean);
        s.std.push_back(std::max(std::sqrt(ss / n), kStdFloor));
    }
    return s;
}

std::vector<Tensor> snapshot(AqNet& model) {
    std::vector<Tensor> out;
    for (auto* p : model.parameters()) out.push_back(p->value);
    return out;
}

void restore(AqNet& model, const std::vector<Tensor>& snap) {
    auto params = model.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = snap[i];
}

}  // namespace

TrainResult train(const DatasetManifest& manifest, const SplitAssignment& split,
                  const ModelConfig& config, const TrainSettings& settings,
                  const EpochCallback& on_epoch) {
    settings.validate();
    config.validate();
    if (split.train.empty() || split.val.empty()) {
        fail(ErrorKind::Validation, "training needs non-empty train and validation splits");
    }
    const auto started = std::chrono::steady_clock::now();

    const NormStats stats = compute_norm_stats(manifest, split);
    const auto train_set = load_samples(manifest, split.train, stats);
    const auto val_set = load_samples(manifest, split.val, stats);
    const auto test_set = load_samples(manifest, split.test, stats);

    AqNet model = build_model(config, settings.seed, settings.dropout);
    model.norm_stats = stats;
    model.target_scaling = fit_target_scaling(train_set, model.output_pollutants());

    TrainReport report;
    report.seed = settings.seed;
    report.config_fingerprint = config_fingerprint(config);
    report.n_train = train_set.size();
    report.n_val = val_set.size();
    report.n_test = test_set.size();
    report.batches_per_epoch = batches_per_epoch(train_set.size(), settings.batch_size);
    if (report.batches_per_epoch == 0) {
        fail(ErrorKind::Validation, "train split of " + std::to_string(train_set.size()) +
                                        " samples yields no batch of size >= 2");
    }

    nn::Adam optimizer(model.parameters(), nn::AdamSettings{settings.learning_rate});
    Rng order_rng(derive_seed(settings.seed, 0xe90c));
    Rng dropout_rng(derive_seed(settings.seed, 0xd207));
    const nn::ForwardMode train_mode{true, &dropout_rng};
    const bool with_tab = config.use_tabular;
    const auto outputs = model.output_pollutants();

    std::vector<std::size_t> order(train_set.size());
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<Tensor> best_weights = snapshot(model);
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= settings.epochs; ++epoch) {
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        order_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t b = 0; b < report.batches_per_epoch; ++b) {
            const std::size_t start = b * settings.batch_size;
            const std::size_t len = std::min(settings.batch_size, order.size() - start);
            std::span<const std::size_t> idx(order.data() + start, len);

            optimizer.zero_grad();
            const Tensor out = model.forward(gather(train_set, idx, with_tab), train_mode);
            Tensor grad;
            const double loss =
                mse_sum_loss(out, scaled_targets(train_set, idx, outputs, model.target_scaling), &grad);
            if (!std::isfinite(loss)) {
                fail(ErrorKind::Numeric, "non-finite training loss at epoch " + std::to_string(epoch) +
                                             ", batch " + std::to_string(b + 1));
            }
            model.backward(grad);
            optimizer.step();
            loss_sum += loss * static_cast<double>(len);
            seen += len;
        }

        EpochRecord rec{epoch, loss_sum / static_cast<double>(seen), dataset_loss(model, val_set)};
        if (!std::isfinite(rec.val_loss)) {
            fail(ErrorKind::Numeric, "non-finite validation loss at epoch " + std::to_string(epoch));
        }
        report.curve.push_back(rec);
        if (on_epoch) on_epoch(rec);

        if (rec.val_loss < best_val) {
            best_val = rec.val_loss;
            report.best_epoch = epoch;
            best_weights = snapshot(model);
            since_best = 0;
        } else {
            ++since_best;
        }
        report.stopped_epoch = epoch;
        if (epoch > settings.min_epochs_before_early_stop && since_best >= settings.patience) {
            report.early_stopped = true;
            break;
        }
    }

    restore(model, best_weights);
    report.train_metrics = split_metrics(model, train_set);
    report.val_metrics = split_metrics(model, val_set);
    report.test_metrics = split_metrics(model, test_set);
    report.wall_clock_hours =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() / 3600.0;
    return {std::move(report), std::move(model)};
}

namespace {

nlohmann::json number_or_null(double v) {
    return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

nlohmann::json metrics_json(const std::vector<PollutantMetrics>& list) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& m : list) {
        j[std::string(to_string(m.pollutant))] = {{"r2", number_or_null(m.metrics.r2)},
                                                  {"mae", number_or_null(m.metrics.mae)},
                                                  {"mse", number_or_null(m.metrics.mse)}};
    }
    return j;
}

}  // namespace

nlohmann::json report_to_json(const TrainReport& r, bool include_timing) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& e : r.curve) {
        curve.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_loss", e.val_loss}});
    }
    nlohmann::json j{{"seed", r.seed},
                     {"config_fingerprint", r.config_fingerprint},
                     {"n_train", r.n_train},
                     {"n_val", r.n_val},
                     {"n_test", r.n_test},
                     {"batches_per_epoch", r.batches_per_epoch},
                     {"best_epoch", r.best_epoch},
                     {"stopped_epoch", r.stopped_epoch},
                     {"early_stopped", r.early_stopped},
                     {"curve", curve},
                     {"train_metrics", metrics_json(r.train_metrics)},
                     {"val_metrics", metrics_json(r.val_metrics)},
                     {"test_metrics", metrics_json(r.test_metrics)}};
    if (include_timing) {
        j["wall_clock_hours"] = r.wall_clock_hours;
        if (r.wall_clock_hours > 0.0 && !r.test_metrics.empty() &&
            std::isfinite(r.test_metrics.front().metrics.r2)) {
            j["efficiency_score"] = efficiency_score(r.test_metrics.front().metrics.r2, r.wall_clock_hours);
        }
    }
    return j;
}

void write_curve_csv(const TrainReport& r, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << "epoch,train_loss,val_loss\n";
    for (const auto& e : r.curve) {
        out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.val_loss) << '\n';
    }
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) fail(ErrorKind::Validation, "mean_std of an empty list");
    const double n = static_cast<double>(values.size());
    double sum = 0.0;
    for (double v : values) sum += v;
    MeanStd m;
    m.mean = sum / n;
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - m.mean) * (v - m.mean);
        m.std = std::sqrt(ss / (n - 1.0));
    }
    return m;
}

std::string format_mean_std(const MeanStd& m, int decimals) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%.*f±%.*f", decimals, m.mean, decimals, m.std);
    return buf;
}

AggregateReport aggregate_reports(std::vector<TrainReport> runs) {
    if (runs.size() < 2) fail(ErrorKind::Validation, "aggregation needs at least 2 runs");
    AggregateReport agg;
    agg.n_runs = runs.size();
    for (const auto& pm : runs.front().test_metrics) {
        std::vector<double> r2, mae, mse;
        for (const auto& run : runs) {
            const auto& m = run.test(pm.pollutant);
            r2.push_back(m.r2);
            mae.push_back(m.mae);
            mse.push_back(m.mse);
        }
        agg.test.push_back({pm.pollutant, mean_std(r2), mean_std(mae), mean_std(mse)});
    }
    std::vector<double> hours;
    for (const auto& run : runs) hours.push_back(run.wall_clock_hours);
    agg.wall_clock_hours = mean_std(hours);
    agg.runs = std::move(runs);
    return agg;
}

nlohmann::json aggregate_to_json(const AggregateReport& a, bool include_timing) {
    auto stat = [](const MeanStd& m) {
        return nlohmann::json{{"mean", number_or_null(m.mean)},
                              {"std", number_or_null(m.std)},
                              {"formatted", format_mean_std(m)}};
    };
    nlohmann::json test = nlohmann::json::object();
    for (const auto& t : a.test) {
        test[std::string(to_string(t.pollutant))] = {{"r2", stat(t.r2)}, {"mae", stat(t.mae)}, {"mse", stat(t.mse)}};
    }
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : a.runs) runs.push_back(report_to_json(r, include_timing));
    nlohmann::json j{{"n_runs", a.n_runs}, {"test_metrics", test}, {"runs", runs}};
    if (include_timing) j["wall_clock_hours"] = stat(a.wall_clock_hours);
    return j;
}

AggregateReport multi_run(const DatasetManifest& manifest, const ModelConfig& config,
                          const TrainSettings& settings, std::size_t n_runs,
                          const EpochCallback& on_epoch) {
    if (n_runs < 2) fail(ErrorKind::Validation, "multi-run needs n_runs >= 2");
    std::vector<TrainReport> reports;
    for (std::size_t i = 0; i < n_runs; ++i) {
        TrainSettings s = settings;
        s.seed = settings.seed + i;
        try {
            const SplitAssignment split = split_dataset(manifest, s.seed);
            reports.push_back(train(manifest, split, config, s, on_epoch).report);
        } catch (const Error& e) {
            fail(e.kind(), "run " + std::to_string(i) + " failed: " + e.what());
        }
    }
    return aggregate_reports(std::move(reports));
}

double efficiency_score(double r2, double runtime_hours) {
    if (!(runtime_hours > 0.0)) fail(ErrorKind::Validation, "runtime must be positive");
    return r2 / runtime_hours;
}

}  // namespace aqnet
