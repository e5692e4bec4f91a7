#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "aqnet/aqi.hpp"
#include "aqnet/error.hpp"
#include "aqnet/rng.hpp"
#include "aqnet/station.hpp"
#include "support.hpp"

using namespace aqnet;

namespace {

// Closed form of the index: mean of prediction-to-threshold ratios.
double mean_ratio(const PollutantTriple& p, const PollutantTriple& th) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += std::max(0.0, p[k]) / th[k];
    return s / 3.0;
}

ThresholdSet thresholds_of(const PollutantTriple& th) {
    ThresholdSet t;
    t.values = {{Pollutant::NO2, th[0]}, {Pollutant::O3, th[1]}, {Pollutant::PM10, th[2]}};
    return t;
}

}  // namespace

TEST_SUITE("rng") {
    TEST_CASE("same seed gives the same stream") {
        Rng a(42), b(42);
        for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    }

    TEST_CASE("uniform stays in [0,1) and below stays in range") {
        Rng r(1);
        for (int i = 0; i < 10000; ++i) {
            const double u = r.uniform();
            CHECK((u >= 0.0 && u < 1.0));
            CHECK(r.below(7) < 7u);
        }
    }

    TEST_CASE("normal draws have roughly unit moments") {
        Rng r(3);
        double s = 0.0, s2 = 0.0;
        const int n = 20000;
        for (int i = 0; i < n; ++i) {
            const double z = r.normal();
            s += z;
            s2 += z * z;
        }
        CHECK(std::abs(s / n) < 0.05);
        CHECK(std::abs(s2 / n - 1.0) < 0.05);
    }

    TEST_CASE("shuffle is a permutation") {
        Rng r(9);
        std::vector<int> v(50);
        std::iota(v.begin(), v.end(), 0);
        r.shuffle(v);
        std::vector<int> sorted = v;
        std::sort(sorted.begin(), sorted.end());
        for (int i = 0; i < 50; ++i) CHECK(sorted[i] == i);
    }

    TEST_CASE("derived seeds differ per salt and per base") {
        std::set<std::uint64_t> seen;
        for (std::uint64_t base = 0; base < 20; ++base) {
            for (std::uint64_t salt = 0; salt < 20; ++salt) seen.insert(derive_seed(base, salt));
        }
        CHECK(seen.size() == 400);
    }
}

TEST_SUITE("station") {
    TEST_CASE("enum names round-trip") {
        for (auto a : {AreaType::Rural, AreaType::Suburban, AreaType::Urban}) {
            CHECK(parse_area_type(to_string(a)) == a);
        }
        for (auto s : {StationType::Traffic, StationType::Industrial, StationType::Background}) {
            CHECK(parse_station_type(to_string(s)) == s);
        }
        CHECK_THROWS_AS(parse_area_type("coastal"), Error);
        CHECK(parse_pollutant("PM10") == Pollutant::PM10);
        CHECK_THROWS_AS(parse_pollutant("so2"), Error);
    }

    TEST_CASE("record validation rejects bad fields") {
        auto r = testing::make_record("A", 10, 100, AreaType::Urban, StationType::Traffic, {1, 2, 3});
        CHECK_NOTHROW(validate_record(r));
        auto bad = r;
        bad.pop_density = -1;
        CHECK_THROWS_AS(validate_record(bad), Error);
        bad = r;
        bad.measured[1] = -0.5;
        CHECK_THROWS_AS(validate_record(bad), Error);
        bad = r;
        bad.altitude = std::nan("");
        CHECK_THROWS_AS(validate_record(bad), Error);
        bad = r;
        bad.station_id.clear();
        CHECK_THROWS_AS(validate_record(bad), Error);
    }

    TEST_CASE("format_double round-trips exactly") {
        Rng r(5);
        for (int i = 0; i < 1000; ++i) {
            const double v = r.normal() * std::pow(10.0, r.uniform(-8, 8));
            CHECK(std::stod(format_double(v)) == v);
        }
        CHECK(format_double(10.0) == "10");
    }
}

TEST_SUITE("aqi") {
    TEST_CASE("reference averages give an unhealthy index of 1.357") {
        const AQIResult r = compute_alpha(PollutantTriple{17.39, 54.72, 21.30});
        CHECK(std::abs(r.alpha - 1.357) <= 1e-3);
        CHECK(r.category == AirQualityCategory::Unhealthy);
        REQUIRE(r.components.size() == 3);
        CHECK(r.components[0].ratio == doctest::Approx(1.739));
    }

    TEST_CASE("predictions equal to thresholds give exactly 1") {
        const AQIResult r = compute_alpha(PollutantTriple{10, 60, 15});
        CHECK(r.alpha == 1.0);
        CHECK(r.category == AirQualityCategory::SomePollution);
    }

    TEST_CASE("all-zero predictions give 0 and no pollution") {
        const AQIResult r = compute_alpha(PollutantTriple{0, 0, 0});
        CHECK(r.alpha == 0.0);
        CHECK(r.category == AirQualityCategory::NoPollution);
    }

    TEST_CASE("negative predictions are clamped before the index") {
        const AQIResult r = compute_alpha(PollutantTriple{-5, 60, 15});
        CHECK(r.alpha == doctest::Approx(2.0 / 3.0));
        CHECK(r.components[0].prediction == 0.0);
    }

    TEST_CASE("subset of pollutants averages over the supplied ones") {
        const AQIResult r = compute_alpha(std::map<Pollutant, double>{{Pollutant::NO2, 20.0}});
        CHECK(r.alpha == doctest::Approx(2.0));
        CHECK_THROWS_AS(compute_alpha(std::map<Pollutant, double>{}), Error);
        ThresholdSet partial;
        partial.values.erase(Pollutant::O3);
        CHECK_THROWS_AS(compute_alpha(PollutantTriple{1, 1, 1}, partial), Error);
    }

    TEST_CASE("quantify boundaries") {
        CHECK(quantify(0.0) == AirQualityCategory::NoPollution);
        CHECK(quantify(0.5) == AirQualityCategory::SomePollution);
        CHECK(quantify(1.0) == AirQualityCategory::SomePollution);
        CHECK(quantify(1.357) == AirQualityCategory::Unhealthy);
        CHECK_THROWS_AS(quantify(-0.1), Error);
        CHECK(to_string(AirQualityCategory::Unhealthy) == "unhealthy");
    }

    TEST_CASE("index equals the mean-ratio form on random triples") {
        Rng rng(11);
        for (int i = 0; i < 1000; ++i) {
            const PollutantTriple p{rng.uniform(0, 100), rng.uniform(0, 150), rng.uniform(0, 80)};
            const PollutantTriple th{rng.uniform(0.5, 50), rng.uniform(0.5, 100), rng.uniform(0.5, 50)};
            CHECK(std::abs(compute_alpha(p, thresholds_of(th)).alpha - mean_ratio(p, th)) <= 1e-12);
        }
    }

    TEST_CASE("index is strictly increasing in each prediction") {
        Rng rng(12);
        for (int i = 0; i < 200; ++i) {
            PollutantTriple p{rng.uniform(0, 50), rng.uniform(0, 90), rng.uniform(0, 40)};
            const double base = compute_alpha(p).alpha;
            const int k = static_cast<int>(rng.below(3));
            p[k] += rng.uniform(0.01, 5);
            CHECK(compute_alpha(p).alpha > base);
        }
    }

    TEST_CASE("joint scaling of predictions and thresholds is neutral") {
        Rng rng(13);
        for (int i = 0; i < 200; ++i) {
            const PollutantTriple p{rng.uniform(0, 50), rng.uniform(0, 90), rng.uniform(0, 40)};
            const PollutantTriple th{rng.uniform(1, 20), rng.uniform(1, 90), rng.uniform(1, 30)};
            const double c = rng.uniform(0.1, 10);
            const PollutantTriple pc{p[0] * c, p[1] * c, p[2] * c};
            const PollutantTriple thc{th[0] * c, th[1] * c, th[2] * c};
            CHECK(compute_alpha(pc, thresholds_of(thc)).alpha ==
                  doctest::Approx(compute_alpha(p, thresholds_of(th)).alpha).epsilon(1e-12));
        }
    }

    TEST_CASE("permuting pollutants with their thresholds is neutral") {
        Rng rng(14);
        for (int i = 0; i < 200; ++i) {
            const PollutantTriple p{rng.uniform(0, 50), rng.uniform(0, 90), rng.uniform(0, 40)};
            const PollutantTriple th{rng.uniform(1, 20), rng.uniform(1, 90), rng.uniform(1, 30)};
            const PollutantTriple pp{p[2], p[0], p[1]};
            const PollutantTriple thp{th[2], th[0], th[1]};
            CHECK(compute_alpha(pp, thresholds_of(thp)).alpha ==
                  doctest::Approx(compute_alpha(p, thresholds_of(th)).alpha).epsilon(1e-12));
        }
    }

    TEST_CASE("threshold file overrides only the given pollutants") {
        testing::TempDir dir("thr");
        {
            std::ofstream(dir / "t.json") << R"({"no2": 40})";
        }
        const ThresholdSet t = load_thresholds(dir / "t.json");
        CHECK(t.at(Pollutant::NO2) == 40.0);
        CHECK(t.at(Pollutant::O3) == 60.0);
        {
            std::ofstream(dir / "bad.json") << R"({"no2": 0})";
        }
        CHECK_THROWS_AS(load_thresholds(dir / "bad.json"), Error);
    }
}
