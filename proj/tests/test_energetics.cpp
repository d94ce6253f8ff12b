#include <catch2/catch.hpp>

#include "paee/energetics.hpp"
#include "test_support.hpp"

using namespace paee;
using energetics::derive_paee;
using energetics::estimate_rmr;
using energetics::RmrEstimate;
using energetics::weir_power;

TEST_CASE("weir_power basics") {
    CHECK(weir_power(0.0, 0.0) == 0.0);
    CHECK(weir_power(300.0, 250.0) == Approx(101.73).margin(0.01));
    // linear form
    CHECK(weir_power(600.0, 500.0) == 2.0 * weir_power(300.0, 250.0));
    CHECK(weir_power(-100.0, -80.0) == -weir_power(100.0, 80.0));
}

TEST_CASE("estimate_rmr averages breaths past the discard window") {
    data::BreathSeries rest;
    SECTION("constant gas flows") {
        for (int i = 0; i < 800; ++i) {
            rest.t.push_back(i * 2.5);
            rest.vo2.push_back(250.0);
            rest.vco2.push_back(200.0);
            rest.label.push_back("rest");
        }
        const RmrEstimate r = estimate_rmr(rest);
        CHECK(r.vo2 == Approx(250.0));
        CHECK(r.vco2 == Approx(200.0));
    }
    SECTION("early transient is excluded") {
        for (int i = 0; i < 800; ++i) {
            const double t = i * 2.5;
            rest.t.push_back(t);
            rest.vo2.push_back(t < 300.0 ? 999.0 : 250.0);
            rest.vco2.push_back(t < 300.0 ? 999.0 : 200.0);
            rest.label.push_back("rest");
        }
        const RmrEstimate r = estimate_rmr(rest);
        CHECK(r.vo2 == Approx(250.0));
        CHECK(r.vco2 == Approx(200.0));
    }
    SECTION("seeded noisy rest matches a brute-force mean") {
        testsup::TestRand tr(3);
        double t = 0.7;
        double sum2 = 0.0, sum2c = 0.0;
        int n = 0;
        for (int i = 0; i < 700; ++i) {
            rest.t.push_back(t);
            rest.vo2.push_back(250.0 + 20.0 * tr.next());
            rest.vco2.push_back(210.0 + 15.0 * tr.next());
            rest.label.push_back("rest");
            t += 2.2 + tr.uniform01();
        }
        const double cutoff = rest.t.front() + 300.0;
        for (std::size_t i = 0; i < rest.size(); ++i) {
            if (rest.t[i] < cutoff) continue;
            sum2 += rest.vo2[i];
            sum2c += rest.vco2[i];
            ++n;
        }
        const RmrEstimate r = estimate_rmr(rest);
        CHECK(r.vo2 == Approx(sum2 / n).margin(1e-12));
        CHECK(r.vco2 == Approx(sum2c / n).margin(1e-12));
    }
    SECTION("too-short rest fails") {
        rest.t = {0.0, 100.0};
        rest.vo2 = {250.0, 250.0};
        rest.vco2 = {200.0, 200.0};
        rest.label = {"rest", "rest"};
        CHECK_THROWS_AS(estimate_rmr(rest), Error);
    }
    SECTION("data before the discard boundary never matters") {
        for (int i = 0; i < 800; ++i) {
            rest.t.push_back(i * 2.5);
            rest.vo2.push_back(i * 2.5 < 300.0 ? 1.0 : 260.0);
            rest.vco2.push_back(i * 2.5 < 300.0 ? 1.0 : 215.0);
            rest.label.push_back("rest");
        }
        auto mangled = rest;
        for (std::size_t i = 0; i < mangled.size(); ++i)
            if (mangled.t[i] < 299.0) mangled.vo2[i] = 777.0;
        CHECK(estimate_rmr(rest).vo2 == estimate_rmr(mangled).vo2);
    }
}

namespace {

data::UniformSeries flat(double start, std::size_t n, double v) {
    data::UniformSeries s;
    s.start = start;
    s.rate = 1.0;
    s.values.assign(n, v);
    return s;
}

} // namespace

TEST_CASE("derive_paee converts gas flows above RMR to W/kg") {
    const RmrEstimate rmr{250.0, 212.5};
    SECTION("gas at RMR gives zero PAEE") {
        const auto p = derive_paee(flat(0, 40, 250.0), flat(0, 40, 212.5), rmr, 70.0);
        for (double v : p.series.values) CHECK(v == Approx(0.0).margin(1e-12));
    }
    SECTION("hand-computed excess") {
        const auto p = derive_paee(flat(0, 5, 250.0 + 700.0), flat(0, 5, 212.5 + 595.0), rmr, 70.0);
        for (double v : p.series.values) CHECK(v == Approx(3.404).margin(0.01));
    }
    SECTION("flows below RMR stay negative") {
        const auto p = derive_paee(flat(0, 5, 200.0), flat(0, 5, 180.0), rmr, 70.0);
        for (double v : p.series.values) CHECK(v < 0.0);
    }
    SECTION("shift equivariance in RMR") {
        const double delta = 37.5;
        const auto p1 = derive_paee(flat(0, 20, 400.0), flat(0, 20, 330.0), rmr, 60.0);
        const auto p2 = derive_paee(flat(0, 20, 400.0 + delta), flat(0, 20, 330.0 + delta),
                                    RmrEstimate{rmr.vo2 + delta, rmr.vco2 + delta}, 60.0);
        for (std::size_t i = 0; i < p1.series.size(); ++i)
            CHECK(p1.series.values[i] == Approx(p2.series.values[i]).margin(1e-10));
    }
    SECTION("doubling mass halves every sample exactly") {
        const auto p1 = derive_paee(flat(0, 20, 500.0), flat(0, 20, 420.0), rmr, 60.0);
        const auto p2 = derive_paee(flat(0, 20, 500.0), flat(0, 20, 420.0), rmr, 120.0);
        for (std::size_t i = 0; i < p1.series.size(); ++i)
            CHECK(p1.series.values[i] == 2.0 * p2.series.values[i]);
    }
    SECTION("validation") {
        CHECK_THROWS_AS(derive_paee(flat(0, 5, 1.0), flat(0, 6, 1.0), rmr, 70.0), Error);
        CHECK_THROWS_AS(derive_paee(flat(0, 5, 1.0), flat(0, 5, 1.0), rmr, 0.0), Error);
    }
}
