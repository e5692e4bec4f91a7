#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "aqnet/aqi.hpp"
#include "aqnet/error.hpp"
#include "aqnet/evaluation.hpp"
#include "aqnet/synthetic.hpp"
#include "support.hpp"

using namespace aqnet;
using testing::TempDir;

namespace {

// Returns the measured values, optionally scaled and shifted.
class ShimPredictor final : public TriplePredictor {
public:
    explicit ShimPredictor(double scale = 1.0, double shift = 0.0) : scale_(scale), shift_(shift) {}
    PollutantTriple predict(const StationRecord& r, const SamplePatch&) const override {
        PollutantTriple p = r.measured;
        for (auto& v : p) v = v * scale_ + shift_;
        return p;
    }

private:
    double scale_, shift_;
};

// Linear-interpolation quantile written independently of the library.
double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = static_cast<std::size_t>(std::ceil(pos));
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

DatasetManifest two_station_set(const std::filesystem::path& root) {
    std::vector<ManifestEntry> entries;
    const std::vector<StationRecord> recs{
        testing::make_record("GB2", 20, 900, AreaType::Urban, StationType::Traffic, {30, 40, 20}),
        testing::make_record("GB1", 80, 100, AreaType::Rural, StationType::Background, {8, 65, 0}),
    };
    for (const auto& r : recs) {
        ManifestEntry e;
        e.record = r;
        e.record.lon = r.station_id == "GB1" ? -3.25 : -1.5;
        e.record.lat = r.station_id == "GB1" ? 55.75 : 52.125;
        auto [s2, s5p] = write_patch(root, r.station_id, SamplePatch{});
        e.s2_file = s2;
        e.s5p_file = s5p;
        entries.push_back(e);
    }
    return DatasetManifest(root, entries);
}

}  // namespace

TEST_SUITE("percentage error") {
    TEST_CASE("signed examples") {
        CHECK(percentage_error(24, 20) == doctest::Approx(20.0));
        CHECK(percentage_error(20, 20) == 0.0);
        CHECK(percentage_error(15, 20) == doctest::Approx(-25.0));
        CHECK_THROWS_AS(percentage_error(1, 0), Error);
        CHECK_THROWS_AS(percentage_error(1, -2), Error);
    }
}

TEST_SUITE("error summary") {
    TEST_CASE("singleton and four values") {
        const std::vector<double> one{10};
        const auto s1 = error_summary(one);
        CHECK(s1.median == 10.0);
        CHECK(s1.iqr == 0.0);
        const std::vector<double> four{0, 10, 20, 30};
        const auto s4 = error_summary(four);
        CHECK(s4.median == 15.0);
        CHECK(s4.q1 == 7.5);
        CHECK(s4.q3 == 22.5);
        CHECK(s4.iqr == 15.0);
        CHECK(s4.count == 4);
        CHECK_THROWS_AS(error_summary(std::vector<double>{}), Error);
    }

    TEST_CASE("order invariant, ordered and matching the reference quantiles") {
        Rng rng(1);
        for (int i = 0; i < 300; ++i) {
            std::vector<double> v(1 + rng.below(40));
            for (auto& x : v) x = rng.normal() * 30;
            const auto s = error_summary(v);
            rng.shuffle(v);
            const auto t = error_summary(v);
            CHECK(s.median == t.median);
            CHECK(s.q1 == t.q1);
            CHECK(s.q3 == t.q3);
            CHECK(s.q1 <= s.median);
            CHECK(s.median <= s.q3);
            CHECK(s.median == doctest::Approx(quantile(v, 0.5)).epsilon(1e-12));
            CHECK(s.q1 == doctest::Approx(quantile(v, 0.25)).epsilon(1e-12));
            CHECK(s.q3 == doctest::Approx(quantile(v, 0.75)).epsilon(1e-12));
        }
    }
}

TEST_SUITE("ood evaluation") {
    TEST_CASE("a training station in the OOD set is leakage") {
        TempDir dir("oleak");
        const auto ood = generate_synthetic(4, 1, PlantedSignalSpec{}, dir.path());
        const std::vector<std::string> training{"X1", ood.station_ids()[2]};
        try {
            ood_evaluate(ShimPredictor{}, ood, training);
            FAIL("expected leakage error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::Leakage);
        }
    }

    TEST_CASE("identity predictor gives zero error and matching index") {
        TempDir dir("oid");
        PlantedSignalSpec spec;
        spec.id_prefix = "OOD";
        const auto ood = generate_synthetic(6, 2, spec, dir.path());
        const auto report = ood_evaluate(ShimPredictor{}, ood, std::vector<std::string>{"SYN00000"});
        REQUIRE(report.stations.size() == 6);
        for (const auto& s : report.stations) {
            for (int k = 0; k < 3; ++k) {
                CHECK(s.pct_error[k].value() == 0.0);
                CHECK(s.abs_error[k] == 0.0);
            }
            CHECK(s.predicted_alpha == s.true_alpha);
        }
        REQUIRE(report.summaries.size() == 4);
        CHECK(report.summaries[3].quantity == "alpha");
        for (const auto& sum : report.summaries) CHECK(sum.pct_error->median == 0.0);
    }

    TEST_CASE("overestimating predictor has positive median error") {
        TempDir dir("oover");
        const auto ood = generate_synthetic(10, 3, PlantedSignalSpec{}, dir.path());
        const auto report = ood_evaluate(ShimPredictor{1.25}, ood, std::vector<std::string>{});
        for (int k = 0; k < 3; ++k) CHECK(report.summaries[k].pct_error->median == doctest::Approx(25.0));
    }

    TEST_CASE("zero truths are excluded and counted; rows are ordered by id") {
        TempDir dir("ozero");
        const auto ood = two_station_set(dir.path());
        const auto report = ood_evaluate(ShimPredictor{1.0, 2.0}, ood, std::vector<std::string>{});
        REQUIRE(report.stations.size() == 2);
        CHECK(report.stations[0].station_id == "GB1");
        CHECK_FALSE(report.stations[0].pct_error[2].has_value());
        CHECK(report.summaries[2].excluded == 1);
        CHECK(report.summaries[2].pct_error->count == 1);
        CHECK(report.summaries[0].excluded == 0);
    }

    TEST_CASE("predicted index uses clamped predictions") {
        TempDir dir("oclamp");
        const auto ood = two_station_set(dir.path());
        const auto report = ood_evaluate(ShimPredictor{1.0, -100.0}, ood, std::vector<std::string>{});
        for (const auto& s : report.stations) {
            CHECK(s.predicted_alpha == compute_alpha(s.predicted).alpha);
            CHECK(s.predicted_alpha == 0.0);
            CHECK(s.true_alpha == compute_alpha(s.truth).alpha);
            CHECK(s.predicted[0] < 0.0);
        }
    }

    TEST_CASE("report json carries stations and summaries") {
        TempDir dir("ojson");
        const auto report = ood_evaluate(ShimPredictor{1.1}, two_station_set(dir.path()), std::vector<std::string>{});
        const auto j = ood_report_to_json(report);
        CHECK(j.at("stations").size() == 2);
        CHECK(j.at("pct_error_summary").size() == 4);
        CHECK(j.at("pct_error_summary").at("alpha").contains("iqr"));
    }
}

TEST_SUITE("exports") {
    TEST_CASE("geo errors: row count, recomputed errors and round trip") {
        TempDir dir("geo");
        const auto ood = two_station_set(dir / "data");
        const auto report = ood_evaluate(ShimPredictor{0.9, 1.0}, ood, std::vector<std::string>{});
        export_geo_errors(report, dir / "geo.csv");
        const auto rows = read_geo_errors(dir / "geo.csv");
        REQUIRE(rows.size() == 8);
        std::size_t alpha_rows = 0;
        for (const auto& row : rows) {
            const auto& rec = ood.entry(row.station_id).record;
            CHECK(row.lon == rec.lon);
            CHECK(row.lat == rec.lat);
            if (row.quantity == "alpha") {
                ++alpha_rows;
                PollutantTriple pred = rec.measured;
                for (auto& v : pred) v = v * 0.9 + 1.0;
                const double expected = std::abs(compute_alpha(pred).alpha - compute_alpha(rec.measured).alpha);
                CHECK(std::abs(row.abs_error - expected) <= 1e-9);
                continue;
            }
            const Pollutant p = parse_pollutant(row.quantity);
            const double truth = rec.concentration(p);
            CHECK(std::abs(row.abs_error - std::abs(truth * 0.9 + 1.0 - truth)) <= 1e-9);
        }
        CHECK(alpha_rows == 2);

        std::ifstream in(dir / "geo.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "station_id,lon,lat,pollutant,abs_error");
    }

    TEST_CASE("percentage error export leaves undefined cells empty") {
        TempDir dir("pct");
        const auto report = ood_evaluate(ShimPredictor{}, two_station_set(dir / "data"), std::vector<std::string>{});
        export_pct_errors(report, dir / "pct.csv");
        std::ifstream in(dir / "pct.csv");
        std::string line;
        std::getline(in, line);
        CHECK(line == "station_id,quantity,predicted,truth,pct_error");
        std::size_t rows = 0, empty = 0;
        while (std::getline(in, line)) {
            ++rows;
            empty += line.back() == ',';
        }
        CHECK(rows == 8);
        CHECK(empty == 1);
    }

    TEST_CASE("model adapter requires a triple model with stats") {
        AqNet single(preset_config("aqnet-single"), 0);
        CHECK_THROWS_AS(ModelPredictor{single}, Error);
        AqNet triple(preset_config("tiny"), 0);
        CHECK_THROWS_AS(ModelPredictor{triple}, Error);
        triple.norm_stats = NormStats{};
        CHECK_NOTHROW(ModelPredictor{triple});
    }
}
