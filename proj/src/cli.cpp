#include "aqnet/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <sstream>

#include "aqnet/aqi.hpp"
#include "aqnet/error.hpp"
#include "aqnet/evaluation.hpp"
#include "aqnet/model_io.hpp"
#include "aqnet/synthetic.hpp"
#include "aqnet/tabular.hpp"

namespace fs = std::filesystem;

namespace aqnet {

RunConfig resolve_run_config(const nlohmann::json& file, const nlohmann::json& flags) {
    auto section = [](const nlohmann::json& j, const char* key) {
        return j.is_object() && j.contains(key) ? j.at(key) : nlohmann::json::object();
    };

    nlohmann::json model = section(file, "model");
    const nlohmann::json model_flags = section(flags, "model");
    model.merge_patch(model_flags);
    // An --outputs flag alone re-targets the head width inherited from the file.
    if (model_flags.contains("outputs") && !model_flags.contains("regression_head_dims") &&
        model.contains("regression_head_dims")) {
        model["regression_head_dims"][1] =
            OutputSpec::parse(model_flags.at("outputs").get<std::string>()).arity();
    }
    nlohmann::json train = section(file, "train");
    train.merge_patch(section(flags, "train"));
    // A short run without an explicit early-stop floor trains for all its epochs.
    if (train.contains("epochs") && !train.contains("min_epochs_before_early_stop") &&
        train.at("epochs").is_number_unsigned()) {
        train["min_epochs_before_early_stop"] =
            std::min(train.at("epochs").get<std::size_t>(), TrainSettings{}.min_epochs_before_early_stop);
    }

    RunConfig c;
    try {
        c.model = model.get<ModelConfig>();
        c.train = train.get<TrainSettings>();
        for (const auto* layer : {&file, &flags}) {
            if (!layer->is_object()) continue;
            if (layer->contains("data")) c.data = layer->at("data").get<std::string>();
            if (layer->contains("out_dir")) c.out_dir = layer->at("out_dir").get<std::string>();
            if (layer->contains("thresholds")) c.thresholds_file = layer->at("thresholds").get<std::string>();
            if (layer->contains("runs")) c.runs = layer->at("runs").get<std::size_t>();
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Validation, std::string("config: ") + e.what());
    }
    c.model.validate();
    c.train.validate();
    if (c.runs == 0) fail(ErrorKind::Validation, "runs must be >= 1");
    return c;
}

nlohmann::json run_config_to_json(const RunConfig& c) {
    return {{"model", c.model},     {"train", c.train},
            {"data", c.data},       {"out_dir", c.out_dir},
            {"thresholds", c.thresholds_file}, {"runs", c.runs}};
}

std::string run_dir_name(const RunConfig& c) {
    return "run-" + config_fingerprint(c.model) + "-s" + std::to_string(c.train.seed);
}

namespace {

void write_json(const fs::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
    try {
        nlohmann::json j;
        in >> j;
        return j;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, path.string() + ": " + e.what());
    }
}

ThresholdSet thresholds_from(const std::string& file) {
    return file.empty() ? ThresholdSet{} : load_thresholds(file);
}

// Writes to <out_dir>/<name> when an output dir was given, otherwise to `fallback`.
class Sink {
public:
    Sink(const std::string& out_dir, const std::string& name, std::ostream& fallback) {
        if (out_dir.empty()) {
            stream_ = &fallback;
            return;
        }
        fs::create_directories(out_dir);
        path_ = fs::path(out_dir) / name;
        file_.open(path_, std::ios::binary);
        if (!file_) fail(ErrorKind::Io, "cannot write " + path_.string());
        stream_ = &file_;
    }
    std::ostream& stream() { return *stream_; }
    const fs::path& path() const { return path_; }

private:
    std::ofstream file_;
    std::ostream* stream_ = nullptr;
    fs::path path_;
};

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        if (!cell.empty() && cell.back() == '\r') cell.pop_back();
        cells.push_back(cell);
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& s, std::size_t row, const std::string& column) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
        fail(ErrorKind::Format, "row " + std::to_string(row) + " column " + column + ": '" + s +
                                    "' is not a number");
    }
    return v;
}

struct Options {
    // shared
    std::string config_file;
    std::string data;
    std::string out_dir;
    std::string thresholds;
    bool no_timestamp = false;

    // build-synthetic
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::optional<double> sigma, scale;
    std::optional<std::string> id_prefix, planted;

    // train flags, kept optional so only explicit flags override the file
    std::optional<std::string> preset, s2_backbone, outputs, pretrained_source, pretrained_path, loss;
    std::optional<std::size_t> s2_feature_dim, s5p_feature_dim, tabular_feature_dim,
        tabular_hidden_dim, s2_stem_stride, s5p_pool;
    std::vector<std::size_t> s2_channels, s5p_channels, satellite_head_dims, regression_head_dims;
    std::optional<bool> use_tabular;
    std::optional<std::size_t> epochs, min_epochs, patience, batch_size, runs;
    std::optional<double> learning_rate, dropout;
    std::optional<std::uint64_t> train_seed;

    // eval / predict / aqi / analyze
    std::string model_file;
    bool ood = false;
    std::string train_data;
    std::optional<std::uint64_t> split_seed;
    std::string input;
    std::string field = "altitude";
    double bin_width = 50.0;
    std::string pollutant = "no2";
};

nlohmann::json flag_overrides(const Options& o) {
    nlohmann::json model = nlohmann::json::object();
    if (o.preset) model["preset"] = *o.preset;
    if (o.s2_backbone) model["s2_backbone"] = *o.s2_backbone;
    if (o.outputs) model["outputs"] = *o.outputs;
    if (o.pretrained_source) model["pretrained_source"] = *o.pretrained_source;
    if (o.pretrained_path) model["pretrained_path"] = *o.pretrained_path;
    if (o.s2_feature_dim) model["s2_feature_dim"] = *o.s2_feature_dim;
    if (o.s5p_feature_dim) model["s5p_feature_dim"] = *o.s5p_feature_dim;
    if (o.tabular_feature_dim) model["tabular_feature_dim"] = *o.tabular_feature_dim;
    if (o.tabular_hidden_dim) model["tabular_hidden_dim"] = *o.tabular_hidden_dim;
    if (o.s2_stem_stride) model["s2_stem_stride"] = *o.s2_stem_stride;
    if (o.s5p_pool) model["s5p_pool"] = *o.s5p_pool;
    if (!o.s2_channels.empty()) model["s2_channels"] = o.s2_channels;
    if (!o.s5p_channels.empty()) model["s5p_channels"] = o.s5p_channels;
    if (!o.satellite_head_dims.empty()) model["satellite_head_dims"] = o.satellite_head_dims;
    if (!o.regression_head_dims.empty()) model["regression_head_dims"] = o.regression_head_dims;
    if (o.use_tabular) model["use_tabular"] = *o.use_tabular;

    nlohmann::json train = nlohmann::json::object();
    if (o.epochs) train["epochs"] = *o.epochs;
    if (o.min_epochs) train["min_epochs_before_early_stop"] = *o.min_epochs;
    if (o.patience) train["patience"] = *o.patience;
    if (o.batch_size) train["batch_size"] = *o.batch_size;
    if (o.learning_rate) train["learning_rate"] = *o.learning_rate;
    if (o.dropout) train["dropout"] = *o.dropout;
    if (o.train_seed) train["seed"] = *o.train_seed;
    if (o.loss) train["loss"] = *o.loss;

    nlohmann::json j{{"model", model}, {"train", train}};
    if (!o.data.empty()) j["data"] = o.data;
    if (!o.out_dir.empty()) j["out_dir"] = o.out_dir;
    if (!o.thresholds.empty()) j["thresholds"] = o.thresholds;
    if (o.runs) j["runs"] = *o.runs;
    return j;
}

RunConfig resolve_from_options(const Options& o) {
    nlohmann::json file = nlohmann::json::object();
    if (!o.config_file.empty()) file = read_json(o.config_file);
    // The preset is the base layer: a preset flag replaces the file's model section defaults.
    return resolve_run_config(file, flag_overrides(o));
}

int cmd_build_synthetic(const Options& o, std::ostream& out) {
    PlantedSignalSpec spec = o.planted ? load_planted_spec(*o.planted) : PlantedSignalSpec{};
    if (o.sigma) spec.noise_sigma = *o.sigma;
    if (o.scale) spec.scale = *o.scale;
    if (o.id_prefix) spec.id_prefix = *o.id_prefix;
    const auto manifest = generate_synthetic(o.n, o.seed, spec, o.out_dir);
    out << "dataset=" << manifest.root().string() << " entries=" << manifest.size() << '\n';
    return 0;
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
    const RunConfig rc = resolve_from_options(o);
    if (rc.data.empty()) fail(ErrorKind::Validation, "train needs --data (or \"data\" in the config file)");
    const DatasetManifest manifest = load_manifest(rc.data);
    const fs::path run_dir = fs::path(rc.out_dir) / run_dir_name(rc);
    fs::create_directories(run_dir);
    write_json(run_dir / "config.json", run_config_to_json(rc));

    auto progress = [&err](const EpochRecord& e) {
        err << "epoch " << e.epoch << " train_loss=" << e.train_loss << " val_loss=" << e.val_loss << '\n';
    };
    const bool timing = !o.no_timestamp;

    if (rc.runs >= 2) {
        const AggregateReport agg = multi_run(manifest, rc.model, rc.train, rc.runs, progress);
        write_json(run_dir / "aggregate.json", aggregate_to_json(agg, timing));
        for (const auto& t : agg.test) {
            out << to_string(t.pollutant) << " r2=" << format_mean_std(t.r2)
                << " mae=" << format_mean_std(t.mae) << " mse=" << format_mean_std(t.mse) << '\n';
        }
    } else {
        const SplitAssignment split = split_dataset(manifest, rc.train.seed);
        write_json(run_dir / "split.json", {{"seed", split.seed},
                                            {"train", split.train},
                                            {"val", split.val},
                                            {"test", split.test}});
        TrainResult result = train(manifest, split, rc.model, rc.train, progress);
        write_json(run_dir / "report.json", report_to_json(result.report, timing));
        write_curve_csv(result.report, run_dir / "curve.csv");
        save_model(result.model, run_dir / "model.aqnet");
        for (const auto& m : result.report.test_metrics) {
            out << to_string(m.pollutant) << " r2=" << m.metrics.r2 << " mae=" << m.metrics.mae
                << " mse=" << m.metrics.mse << '\n';
        }
    }
    out << "run_dir=" << run_dir.string() << '\n';
    return 0;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const AqNet model = load_model(o.model_file);
    const DatasetManifest data = load_manifest(o.data);
    const fs::path out_dir = o.out_dir.empty() ? fs::path(".") : fs::path(o.out_dir);
    fs::create_directories(out_dir);

    if (o.ood) {
        std::vector<std::string> training_ids;
        if (!o.train_data.empty()) training_ids = load_manifest(o.train_data).station_ids();
        else fail(ErrorKind::Validation, "eval --ood needs --train-data for the leakage guard");
        const ModelPredictor predictor(model);
        const OODReport report = ood_evaluate(predictor, data, training_ids, thresholds_from(o.thresholds));
        write_json(out_dir / "ood_report.json", ood_report_to_json(report));
        export_geo_errors(report, out_dir / "geo_errors.csv");
        export_pct_errors(report, out_dir / "pct_errors.csv");
        for (const auto& s : report.summaries) {
            out << s.quantity;
            if (s.pct_error) {
                out << " median_pct_error=" << s.pct_error->median << " iqr=" << s.pct_error->iqr;
            }
            out << " excluded=" << s.excluded << '\n';
        }
        return 0;
    }

    if (!model.norm_stats) fail(ErrorKind::Validation, "model carries no normalization statistics");
    std::vector<std::string> ids = data.station_ids();
    if (o.split_seed) ids = split_dataset(data, *o.split_seed).test;
    const auto pollutants = model.output_pollutants();
    std::vector<std::vector<double>> pred(pollutants.size()), truth(pollutants.size());
    for (const auto& id : ids) {
        const auto& rec = data.entry(id).record;
        const NormalizedSample x = normalize_sample(load_patch(id, data), rec, *model.norm_stats);
        const nn::Tensor y = model.predict(make_inputs({&x}, model.config().use_tabular));
        for (std::size_t k = 0; k < pollutants.size(); ++k) {
            pred[k].push_back(y[k]);
            truth[k].push_back(rec.concentration(pollutants[k]));
        }
    }
    nlohmann::json metrics = nlohmann::json::object();
    for (std::size_t k = 0; k < pollutants.size(); ++k) {
        const MetricSet m = evaluate_metrics(pred[k], truth[k]);
        metrics[std::string(to_string(pollutants[k]))] = {{"r2", m.r2}, {"mae", m.mae}, {"mse", m.mse}};
        out << to_string(pollutants[k]) << " r2=" << m.r2 << " mae=" << m.mae << " mse=" << m.mse << '\n';
    }
    write_json(out_dir / "eval_report.json", {{"n", ids.size()}, {"metrics", metrics}});
    return 0;
}

int cmd_predict(const Options& o, std::ostream& out) {
    const AqNet model = load_model(o.model_file);
    if (!model.norm_stats) fail(ErrorKind::Validation, "model carries no normalization statistics");
    const DatasetManifest data = load_manifest(o.data);
    Sink sink(o.out_dir, "predictions.csv", out);
    auto& s = sink.stream();
    const auto pollutants = model.output_pollutants();
    s << "station_id";
    for (Pollutant p : pollutants) s << ',' << to_string(p);
    s << '\n';
    for (const auto& e : data.entries()) {
        const NormalizedSample x = normalize_sample(load_patch(e.record.station_id, data), e.record,
                                                    *model.norm_stats);
        const nn::Tensor y = model.predict(make_inputs({&x}, model.config().use_tabular));
        s << e.record.station_id;
        for (std::size_t k = 0; k < pollutants.size(); ++k) s << ',' << format_double(y[k]);
        s << '\n';
    }
    return 0;
}

int cmd_aqi(const Options& o, std::ostream& out) {
    std::ifstream in(o.input);
    if (!in) fail(ErrorKind::Io, "cannot open " + o.input);
    const ThresholdSet thresholds = thresholds_from(o.thresholds);

    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::Format, o.input + " is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto header = split_line(line);
    std::vector<std::pair<std::size_t, Pollutant>> columns;
    for (std::size_t i = 0; i < header.size(); ++i) {
        for (Pollutant p : kAllPollutants) {
            if (header[i] == to_string(p)) columns.emplace_back(i, p);
        }
    }
    if (columns.empty()) fail(ErrorKind::Format, o.input + " has none of the columns no2,o3,pm10");

    Sink sink(o.out_dir, "aqi.csv", out);
    auto& s = sink.stream();
    s << line << ",alpha,category\n";
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_line(line);
        if (cells.size() != header.size()) {
            fail(ErrorKind::Format, "row " + std::to_string(row) + ": expected " +
                                        std::to_string(header.size()) + " cells");
        }
        std::map<Pollutant, double> preds;
        for (const auto& [col, p] : columns) preds[p] = parse_cell(cells[col], row, header[col]);
        const AQIResult r = compute_alpha(preds, thresholds);
        s << line << ',' << format_double(r.alpha) << ',' << to_string(r.category) << '\n';
    }
    return 0;
}

int cmd_analyze_ri(const Options& o, std::ostream& out) {
    const auto records = load_manifest(o.data).records();
    Sink sink(o.out_dir, "relative_influence.csv", out);
    auto& s = sink.stream();
    s << "feature,pollutant,phi_true,phi_false,n_true,n_false,ri\n";
    for (BinaryFeature f : kAllBinaryFeatures) {
        for (Pollutant p : kAllPollutants) {
            s << to_string(f) << ',' << to_string(p) << ',';
            std::size_t n_true = 0;
            for (const auto& r : records) n_true += has_feature(r, f) ? 1 : 0;
            if (n_true == 0 || n_true == records.size()) {
                // one side of the feature is empty; the statistic does not exist
                s << ",," << n_true << ',' << records.size() - n_true << ",undefined\n";
                continue;
            }
            const RelativeInfluence ri = relative_influence(records, f, p);
            s << format_double(ri.phi_true) << ',' << format_double(ri.phi_false) << ',' << ri.n_true
              << ',' << ri.n_false << ',' << (ri.value ? format_double(*ri.value) : "undefined") << '\n';
        }
    }
    return 0;
}

int cmd_analyze_bins(const Options& o, std::ostream& out) {
    const auto records = load_manifest(o.data).records();
    const BinField field = parse_bin_field(o.field);
    const Pollutant pollutant = parse_pollutant(o.pollutant);
    const BinnedSeries series = binned_aggregate(records, field, o.bin_width, pollutant);
    Sink sink(o.out_dir, "bins_" + o.field + "_" + o.pollutant + ".csv", out);
    auto& s = sink.stream();
    s << "bin_lo,bin_hi,mean,count\n";
    for (const auto& b : series.bins) {
        s << format_double(b.lo) << ',' << format_double(b.hi) << ',' << format_double(b.mean) << ','
          << b.count << '\n';
    }
    return 0;
}

int cmd_summary(const Options& o, std::ostream& out) {
    const auto records = load_manifest(o.data).records();
    const auto rows = dataset_summary(records, thresholds_from(o.thresholds));
    Sink sink(o.out_dir, "summary.csv", out);
    auto& s = sink.stream();
    s << "pollutant,average,threshold,status\n";
    for (const auto& r : rows) {
        char mean[32];
        std::snprintf(mean, sizeof(mean), "%.2f", r.mean);
        s << to_string(r.pollutant) << ',' << mean << ',' << format_double(r.threshold) << ','
          << (r.exceeds ? "exceeds" : "within") << '\n';
    }
    return 0;
}

std::string one_line(std::string text) {
    std::replace(text.begin(), text.end(), '\n', ' ');
    std::replace(text.begin(), text.end(), '"', '\'');
    return text;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Multimodal air-quality regression toolkit", "aqnet"};
    app.require_subcommand(1);
    Options o;

    auto* synth = app.add_subcommand("build-synthetic", "Generate a synthetic dataset with a planted signal");
    synth->add_option("--n", o.n, "Number of stations")->required();
    synth->add_option("--seed", o.seed, "Generator seed");
    synth->add_option("--sigma", o.sigma, "Gaussian noise sigma (µg/m³)");
    synth->add_option("--scale", o.scale, "Multiplier applied to planted concentrations");
    synth->add_option("--id-prefix", o.id_prefix, "Station id prefix");
    synth->add_option("--planted", o.planted, "Planted signal spec JSON");
    synth->add_option("--out-dir", o.out_dir, "Output dataset directory")->required();

    auto* train_cmd = app.add_subcommand("train", "Train a model (use --runs N for repeated runs)");
    train_cmd->add_option("--data", o.data, "Dataset directory or manifest");
    train_cmd->add_option("--config", o.config_file, "JSON run config");
    train_cmd->add_option("--out-dir", o.out_dir, "Directory for run outputs");
    train_cmd->add_option("--preset", o.preset, "Model preset");
    train_cmd->add_option("--s2-backbone", o.s2_backbone);
    train_cmd->add_option("--s2-channels", o.s2_channels)->expected(3);
    train_cmd->add_option("--s2-stem-stride", o.s2_stem_stride);
    train_cmd->add_option("--s2-feature-dim", o.s2_feature_dim);
    train_cmd->add_option("--s5p-channels", o.s5p_channels)->expected(2);
    train_cmd->add_option("--s5p-pool", o.s5p_pool);
    train_cmd->add_option("--s5p-feature-dim", o.s5p_feature_dim);
    train_cmd->add_option("--tabular-hidden-dim", o.tabular_hidden_dim);
    train_cmd->add_option("--tabular-feature-dim", o.tabular_feature_dim);
    train_cmd->add_option("--satellite-head-dims", o.satellite_head_dims)->expected(2);
    train_cmd->add_option("--regression-head-dims", o.regression_head_dims)->expected(2);
    train_cmd->add_option("--outputs", o.outputs, "triple | single:<pollutant>");
    train_cmd->add_option("--use-tabular", o.use_tabular, "true | false");
    train_cmd->add_option("--pretrained-source", o.pretrained_source);
    train_cmd->add_option("--pretrained-path", o.pretrained_path);
    train_cmd->add_option("--epochs", o.epochs);
    train_cmd->add_option("--min-epochs-before-early-stop", o.min_epochs);
    train_cmd->add_option("--patience", o.patience);
    train_cmd->add_option("--learning-rate", o.learning_rate);
    train_cmd->add_option("--batch-size", o.batch_size);
    train_cmd->add_option("--dropout", o.dropout);
    train_cmd->add_option("--seed", o.train_seed);
    train_cmd->add_option("--loss", o.loss);
    train_cmd->add_option("--runs", o.runs, "Repeat with seeds seed..seed+N-1 and aggregate");
    train_cmd->add_option("--thresholds", o.thresholds);
    train_cmd->add_flag("--no-timestamp", o.no_timestamp, "Omit wall-clock fields from reports");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a saved model");
    eval_cmd->add_option("--model", o.model_file)->required();
    eval_cmd->add_option("--data", o.data)->required();
    eval_cmd->add_flag("--ood", o.ood, "Out-of-distribution analysis");
    eval_cmd->add_option("--train-data", o.train_data, "Training dataset (leakage guard for --ood)");
    eval_cmd->add_option("--split-seed", o.split_seed, "Evaluate only the test split of this seed");
    eval_cmd->add_option("--thresholds", o.thresholds);
    eval_cmd->add_option("--out-dir", o.out_dir);

    auto* predict_cmd = app.add_subcommand("predict", "Predict concentrations for every station");
    predict_cmd->add_option("--model", o.model_file)->required();
    predict_cmd->add_option("--data", o.data)->required();
    predict_cmd->add_option("--out-dir", o.out_dir);

    auto* aqi_cmd = app.add_subcommand("aqi", "Air-quality index for a CSV of predictions");
    aqi_cmd->add_option("--input", o.input)->required();
    aqi_cmd->add_option("--thresholds", o.thresholds, "Threshold overrides JSON");
    aqi_cmd->add_option("--out-dir", o.out_dir);

    auto* analyze = app.add_subcommand("analyze", "Dataset analytics");
    analyze->require_subcommand(1);
    auto* ri_cmd = analyze->add_subcommand("ri", "Relative influence of each binary feature");
    ri_cmd->add_option("--data", o.data)->required();
    ri_cmd->add_option("--out-dir", o.out_dir);
    auto* bins_cmd = analyze->add_subcommand("bins", "Binned mean concentration");
    bins_cmd->add_option("--data", o.data)->required();
    bins_cmd->add_option("--field", o.field, "altitude | pop_density");
    bins_cmd->add_option("--bin-width", o.bin_width);
    bins_cmd->add_option("--pollutant", o.pollutant);
    bins_cmd->add_option("--out-dir", o.out_dir);

    auto* summary_cmd = app.add_subcommand("summary", "Average vs threshold concentrations");
    summary_cmd->add_option("--data", o.data)->required();
    summary_cmd->add_option("--thresholds", o.thresholds);
    summary_cmd->add_option("--out-dir", o.out_dir);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error kind=usage message=\"" << one_line(e.what()) << "\"\n";
        return 2;
    }

    try {
        if (synth->parsed()) return cmd_build_synthetic(o, out);
        if (train_cmd->parsed()) return cmd_train(o, out, err);
        if (eval_cmd->parsed()) return cmd_eval(o, out);
        if (predict_cmd->parsed()) return cmd_predict(o, out);
        if (aqi_cmd->parsed()) return cmd_aqi(o, out);
        if (ri_cmd->parsed()) return cmd_analyze_ri(o, out);
        if (bins_cmd->parsed()) return cmd_analyze_bins(o, out);
        if (summary_cmd->parsed()) return cmd_summary(o, out);
    } catch (const Error& e) {
        err << "error kind=" << to_string(e.kind()) << " message=\"" << one_line(e.what()) << "\"\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error kind=internal message=\"" << one_line(e.what()) << "\"\n";
        return 1;
    }
    return 2;
}

}  // namespace aqnet
