// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "aqnet/aqi.hpp"
#include "aqnet/error.hpp"
#include "aqnet/evaluation.hpp"
#include "aqnet/model.hpp"
#include "aqnet/synthetic.hpp"
#include "aqnet/tabular.hpp"
#include "aqnet/training.hpp"
#include "gradcheck.hpp"
#include "support.hpp"

using namespace aqnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

struct Criterion {
    int id;
    std::string title;
    double budget_seconds;  // 0 = no runtime bound
    std::function<Outcome()> run;
};

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), format, args...);
    return buf;
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1 -------------------------------------------------------------------------
Outcome aqi_oracle() {
    Rng rng(101);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const PollutantTriple p{rng.uniform(0, 120), rng.uniform(0, 200), rng.uniform(0, 90)};
        const PollutantTriple th{rng.uniform(0.1, 80), rng.uniform(0.1, 150), rng.uniform(0.1, 60)};
        ThresholdSet t;
        t.values = {{Pollutant::NO2, th[0]}, {Pollutant::O3, th[1]}, {Pollutant::PM10, th[2]}};
        const double mean_ratio = (p[0] / th[0] + p[1] / th[1] + p[2] / th[2]) / 3.0;
        worst = std::max(worst, std::abs(compute_alpha(p, t).alpha - mean_ratio));
    }
    const AQIResult table = compute_alpha(PollutantTriple{17.39, 54.72, 21.30});
    const bool ok = worst <= 1e-12 && std::abs(table.alpha - 1.357) <= 1e-3 &&
                    table.category == AirQualityCategory::Unhealthy;
    return {ok, fmt("max |index - mean ratio| = %.2e; table index = %.4f (%s)", worst, table.alpha,
                    std::string(to_string(table.category)).c_str())};
}

// 2 -------------------------------------------------------------------------
Outcome ri_properties() {
    Rng rng(202);
    std::size_t violations = 0;
    for (int i = 0; i < 1000; ++i) {
        std::vector<double> a(1 + rng.below(20)), b(1 + rng.below(20));
        for (auto& x : a) x = rng.uniform(0, 100);
        for (auto& x : b) x = rng.uniform(0, 100);
        const double ri = relative_influence(a, b).value.value();
        const double swapped = relative_influence(b, a).value.value();
        const double c = std::exp(rng.uniform(-5, 5));
        for (auto& x : a) x *= c;
        for (auto& x : b) x *= c;
        const double scaled = relative_influence(a, b).value.value();
        if (!(ri >= -1.0 && ri <= 1.0)) ++violations;
        if (swapped != -ri) ++violations;
        if (std::abs(scaled - ri) > 1e-12) ++violations;
    }
    const std::vector<double> t{10}, f{20};
    const double hand = relative_influence(t, f).value.value();
    return {violations == 0 && hand == -1.0 / 3.0,
            fmt("%zu property violations over 1000 pairs; hand case = %.17g", violations, hand)};
}

// 3 -------------------------------------------------------------------------
Outcome metric_oracle() {
    Rng rng(303);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const std::size_t n = 2 + rng.below(300);
        std::vector<double> p(n), t(n);
        for (std::size_t j = 0; j < n; ++j) {
            t[j] = rng.uniform(0, 80);
            p[j] = t[j] + rng.normal() * 10;
        }
        long double mean = 0;
        for (double v : t) mean += v;
        mean /= n;
        long double res = 0, tot = 0, abs_sum = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const long double e = static_cast<long double>(p[j]) - t[j];
            res += e * e;
            abs_sum += std::fabs(e);
            tot += (t[j] - mean) * (t[j] - mean);
        }
        const MetricSet m = evaluate_metrics(p, t);
        worst = std::max({worst, std::abs(m.r2 - static_cast<double>(1 - res / tot)),
                          std::abs(m.mae - static_cast<double>(abs_sum / n)),
                          std::abs(m.mse - static_cast<double>(res / n))});
    }
    const std::vector<double> y{1, 2, 3}, mean_pred{2, 2, 2}, off{1, 2, 4};
    const bool pinned = evaluate_metrics(y, y).r2 == 1.0 && evaluate_metrics(mean_pred, y).r2 == 0.0 &&
                        evaluate_metrics(off, y).r2 == 0.5;
    return {worst <= 1e-9 && pinned, fmt("max deviation from brute force = %.2e; pinned cases %s", worst,
                                         pinned ? "exact" : "WRONG")};
}

// 4 -------------------------------------------------------------------------
Outcome split_contract() {
    auto ids_of = [](std::size_t n) {
        std::vector<std::string> ids;
        for (std::size_t i = 0; i < n; ++i) ids.push_back(fmt("st%05zu", i));
        return ids;
    };
    bool sizes_ok = true;
    for (std::uint64_t seed : {0ull, 1ull, 42ull, 2024ull, 987654321ull}) {
        const auto s = split_ids(ids_of(1318), seed);
        sizes_ok &= s.train.size() == 660 && s.val.size() == 329 && s.test.size() == 329;
    }
    Rng rng(404);
    std::size_t bad = 0;
    for (int i = 0; i < 100; ++i) {
        const std::size_t n = 4 + rng.below(2000);
        const std::uint64_t seed = rng.next_u64();
        auto ids = ids_of(n);
        const auto s = split_ids(ids, seed);
        std::set<std::string> all;
        for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(part->begin(), part->end());
        const bool partition = all.size() == n && s.train.size() + s.val.size() + s.test.size() == n &&
                               s.val.size() == n / 4 && s.test.size() == n / 4;
        rng.shuffle(ids);
        const auto again = split_ids(ids, seed);
        const bool same = again.train == s.train && again.val == s.val && again.test == s.test;
        if (!partition || !same) ++bad;
    }
    return {sizes_ok && bad == 0,
            fmt("N=1318 -> 660/329/329 %s; %zu of 100 random (N, seed) pairs failed", sizes_ok ? "yes" : "NO", bad)};
}

// 5 -------------------------------------------------------------------------
Outcome architecture_algebra() {
    AqNet baseline(preset_config("baseline"), 0);
    const std::size_t fused = baseline.measured_widths().fused_satellite;
    Rng rng(505);
    std::size_t bad = 0;
    for (int i = 0; i < 20; ++i) {
        auto dim = [&](std::size_t hi) { return 1 + static_cast<std::size_t>(rng.below(hi)); };
        ModelConfig c = preset_config("tiny");
        c.s2_channels = {dim(6), dim(6), dim(6)};
        c.s2_stem_stride = dim(3);
        c.s2_feature_dim = dim(64);
        c.s5p_channels = {dim(4), dim(4)};
        c.s5p_pool = dim(6);
        c.s5p_feature_dim = dim(64);
        c.tabular_hidden_dim = dim(64);
        c.tabular_feature_dim = dim(64);
        c.satellite_head_dims = {dim(64), dim(64)};
        c.use_tabular = rng.below(2) == 1;
        c.set_outputs(rng.below(2) ? OutputSpec{} : OutputSpec{false, kAllPollutants[rng.below(3)]});
        c.regression_head_dims[0] = dim(64);
        AqNet m(c, i);
        const ModelWidths w = m.measured_widths();
        const bool ok = w.fused_satellite == c.s2_feature_dim + c.s5p_feature_dim &&
                        w.regression_input == c.satellite_head_dims[1] + (c.use_tabular ? c.tabular_feature_dim : 0) &&
                        w.outputs == c.outputs.arity();
        if (!ok) ++bad;
    }
    Rng in_rng(506);
    ModelInputs in;
    in.s2 = nn::Tensor({2, kS2Bands, kPatchSide, kPatchSide});
    in.s5p = nn::Tensor({2, 1, kPatchSide, kPatchSide});
    in.tabular = nn::Tensor({2, kTabularWidth});
    for (auto* t : {&in.s2, &in.s5p, &in.tabular}) {
        for (auto& v : t->values()) v = in_rng.normal();
    }
    const std::size_t triple = AqNet(preset_config("aqnet"), 0).predict(in).dim(1);
    const std::size_t single = AqNet(preset_config("aqnet-single"), 0).predict(in).dim(1);
    return {fused == 2176 && bad == 0 && triple == 3 && single == 1,
            fmt("baseline fusion width %zu; %zu of 20 random configs broke the width algebra; arities %zu/%zu",
                fused, bad, triple, single)};
}

// 6 -------------------------------------------------------------------------
Outcome gradient_check() {
    ModelConfig c = preset_config("tiny");
    c.s2_channels = {3, 4, 4};
    c.s2_feature_dim = 8;
    c.s5p_channels = {2, 3};
    c.s5p_feature_dim = 16;
    c.tabular_hidden_dim = 12;
    c.tabular_feature_dim = 8;
    c.satellite_head_dims = {16, 12};
    c.regression_head_dims = {12, 3};
    AqNet m(c, 606);
    Rng rng(607);
    ModelInputs in;
    in.s2 = nn::Tensor({2, kS2Bands, kPatchSide, kPatchSide});
    in.s5p = nn::Tensor({2, 1, kPatchSide, kPatchSide});
    in.tabular = nn::Tensor({2, kTabularWidth});
    for (auto* t : {&in.s2, &in.s5p, &in.tabular}) {
        for (auto& v : t->values()) v = rng.normal();
    }
    nn::Tensor target({2, 3});
    for (auto& v : target.values()) v = rng.normal();

    auto mse = [&](const nn::Tensor& y, nn::Tensor* grad) {
        double loss = 0.0;
        if (grad) *grad = nn::Tensor(y.shape());
        for (std::size_t i = 0; i < y.size(); ++i) {
            const double d = y[i] - target[i];
            loss += d * d / 2.0;
            if (grad) (*grad)[i] = d;
        }
        return loss;
    };
    nn::Tensor grad;
    mse(m.forward(in, nn::ForwardMode{true, nullptr}), &grad);
    m.backward(grad);
    auto loss = [&] { return mse(m.forward(in, nn::ForwardMode{}), nullptr); };

    bool ok = true;
    std::string detail;
    for (std::string module : {"s2", "s5p", "tabular", "satellite_head", "regression_head"}) {
        const auto params = m.parameters(module + ".");
        const std::size_t per = (24 + params.size() - 1) / params.size();
        const auto r = testing::check_gradients(params, loss, per, rng, 1e-5, 1e-3);
        ok &= r.checked >= 20 && r.mismatches.empty() && r.nonzero > 0;
        if (!detail.empty()) detail += "; ";
        detail += fmt("%s %zu sampled, worst rel gap %.1e", module.c_str(), r.checked, r.worst_relative);
    }
    return {ok, detail};
}

// 7 -------------------------------------------------------------------------
Outcome overfit_sanity(const fs::path& work) {
    PlantedSignalSpec spec;
    spec.noise_sigma = 0.0;
    const auto m = generate_synthetic(40, 707, spec, work / "overfit");
    ModelConfig c = preset_config("tiny");
    c.set_outputs(OutputSpec::parse("single:no2"));
    TrainSettings s;
    s.epochs = 200;
    s.min_epochs_before_early_stop = 200;
    s.batch_size = 4;
    s.seed = 7;
    const auto r = train(m, split_dataset(m, 7), c, s).report;
    const double r2 = r.train(Pollutant::NO2).r2;
    return {r2 >= 0.95, fmt("train R2 = %.4f after %zu epochs (best epoch %zu)", r2, r.stopped_epoch, r.best_epoch)};
}

// 8 -------------------------------------------------------------------------
Outcome ablation_direction(const fs::path& work) {
    PlantedSignalSpec spec;
    spec.noise_sigma = 0.5;
    spec.s2_coef = {0.5, 0.5, 0.5};
    spec.s5p_coef = {0.5, -0.5, 0.5};
    spec.altitude_coef = {-6.0, 20.0, -4.0};
    spec.pop_density_coef = {5.0, -3.0, 4.0};
    spec.flag_coef = {{{-8.0, 10.0, -7.0},
                       {0.0, 2.0, 0.0},
                       {10.0, -8.0, 9.0},
                       {12.0, -8.0, 7.0},
                       {4.0, 0.0, 5.0},
                       {-4.0, 4.0, -2.0}}};
    const auto m = generate_synthetic(120, 808, spec, work / "ablation");
    TrainSettings s;
    s.batch_size = 8;
    std::vector<double> with, without;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        s.seed = seed;
        const auto split = split_dataset(m, seed);
        for (bool tab : {true, false}) {
            ModelConfig c = preset_config("tiny");
            c.use_tabular = tab;
            const auto r = train(m, split, c, s).report;
            double mean_r2 = 0.0;
            for (Pollutant p : kAllPollutants) mean_r2 += r.val(p).r2 / 3.0;
            (tab ? with : without).push_back(mean_r2);
        }
    }
    const double a = median(with), b = median(without);
    return {a >= b, fmt("median val R2 with tabular = %.3f, without = %.3f", a, b)};
}

// 9 -------------------------------------------------------------------------
Outcome ood_overestimation(const fs::path& work) {
    const auto m = generate_synthetic(120, 909, PlantedSignalSpec{}, work / "ood-train");
    PlantedSignalSpec shifted;
    shifted.scale = 0.8;
    shifted.id_prefix = "OOD";
    const auto ood = generate_synthetic(36, 910, shifted, work / "ood-test");
    TrainSettings s;
    s.batch_size = 8;
    s.seed = 9;
    const auto split = split_dataset(m, 9);
    const auto result = train(m, split, preset_config("tiny"), s);
    const ModelPredictor predictor(result.model);
    const auto report = ood_evaluate(predictor, ood, m.station_ids());
    bool ok = true;
    std::string detail;
    for (int k = 0; k < 3; ++k) {
        const auto& sum = report.summaries[k];
        ok &= sum.pct_error.has_value() && sum.pct_error->median > 0.0;
        detail += fmt("%s median %+.1f%% (IQR %.1f); ", sum.quantity.c_str(), sum.pct_error->median, sum.pct_error->iqr);
    }
    export_geo_errors(report, work / "ood-geo.csv");
    ok &= read_geo_errors(work / "ood-geo.csv").size() == 36 * 4;
    return {ok, detail + fmt("alpha median %+.1f%%", report.summaries[3].pct_error->median)};
}

// 10 ------------------------------------------------------------------------
Outcome efficiency() {
    const double a = efficiency_score(0.596, 4.0);
    const double b = efficiency_score(0.579, 4.5);
    return {a == 0.149 && std::abs(b - 0.129) <= 5e-4, fmt("0.596/4 = %.17g; 0.579/4.5 = %.6f", a, b)};
}

// 11 ------------------------------------------------------------------------
Outcome cli_determinism(const fs::path& work) {
    const std::string cli = AQNET_CLI_PATH;
    const std::string data = (work / "det-data").string();
    auto sh = [](const std::string& cmd) { return std::system((cmd + " >/dev/null 2>&1").c_str()); };
    if (sh(cli + " build-synthetic --n 40 --seed 11 --out-dir " + data) != 0) return {false, "dataset generation failed"};
    auto run = [&](const std::string& out) -> nlohmann::json {
        const std::string cmd = cli + " train --data " + data +
                                " --preset tiny --epochs 6 --batch-size 8 --seed 11 --out-dir " + out;
        if (sh(cmd) != 0) return nullptr;
        for (const auto& e : fs::directory_iterator(out)) {
            std::ifstream in(e.path() / "report.json");
            return nlohmann::json::parse(in);
        }
        return nullptr;
    };
    auto a = run((work / "det-a").string());
    auto b = run((work / "det-b").string());
    if (a.is_null() || b.is_null()) return {false, "train invocation failed"};
    const bool same_metrics = a["test_metrics"] == b["test_metrics"] && a["val_metrics"] == b["val_metrics"] &&
                              a["train_metrics"] == b["train_metrics"] && a["curve"] == b["curve"];
    return {same_metrics, fmt("test no2 r2 %.6f vs %.6f", a["test_metrics"]["no2"]["r2"].get<double>(),
                              b["test_metrics"]["no2"]["r2"].get<double>())};
}

}  // namespace

int main() {
    testing::TempDir work("acceptance");
    const std::vector<Criterion> criteria{
        {1, "AQI oracle", 1, aqi_oracle},
        {2, "relative influence properties", 1, ri_properties},
        {3, "metric oracle", 5, metric_oracle},
        {4, "split contract", 5, split_contract},
        {5, "architecture algebra", 30, architecture_algebra},
        {6, "gradient check", 120, gradient_check},
        {7, "overfit sanity", 600, [&] { return overfit_sanity(work.path()); }},
        {8, "ablation direction", 1800, [&] { return ablation_direction(work.path()); }},
        {9, "OOD overestimation", 900, [&] { return ood_overestimation(work.path()); }},
        {10, "efficiency score", 0, efficiency},
        {11, "CLI determinism", 0, [&] { return cli_determinism(work.path()); }},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = c.budget_seconds == 0 || secs < c.budget_seconds;
        const bool pass = o.pass && in_time;
        failures += !pass;
        std::cout << (pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.title << "): " << o.detail
                  << fmt(" [%.2fs", secs) << (c.budget_seconds > 0 ? fmt(" of %.0fs budget]", c.budget_seconds) : "]")
                  << (in_time ? "" : " over budget") << std::endl;
    }
    std::cout << (failures == 0 ? "all criteria passed" : fmt("%d criteria failed", failures)) << std::endl;
    return failures == 0 ? 0 : 1;
}
