#include <catch2/catch.hpp>

#include <complex>

#include "paee/dsp.hpp"
#include "test_support.hpp"

using namespace paee;
using data::UniformSeries;

namespace {

// Reference coefficients for Butterworth(order 4, fc 6 Hz, fs 30 Hz),
// computed once with an independent bilinear-transform implementation and
// frozen here.
const double kRefB[5] = {0.046582906636443676, 0.1863316265457747, 0.27949743981866204,
                         0.1863316265457747, 0.046582906636443676};
const double kRefA[5] = {1.0, -0.78209519802333749, 0.67997852691629945, -0.18267569775303227,
                         0.030118875043169235};

// Pinned 50-sample signal and its zero-phase reference output (odd padding,
// padlen 12) from the same independent implementation.
const double kFfX[50] = {
    1.690525703800356,     -0.46593737054083278,  0.032820163678584403, 0.40751628299650783,
    -0.7889230286257386,   0.0020655729059481302, -0.00089038585793136283, -1.7547243063454208,
    1.0176580056634932,    0.60049851591954939,   -0.62542897396675967, -0.17154826119572117,
    0.50529937419675164,   -0.26135641519164698,  -0.24274907867254661, -1.4532414124907906,
    0.55458031189188783,   0.12388090528703843,   0.27445992375996359,  -1.5265245318698402,
    1.6506996911864755,    0.15433553545635803,   -0.38713994328638812, 2.0290722207611118,
    -0.04538602986064609,  -1.4506786991465748,   -0.40522785542768669, -2.2883151019717225,
    1.0493965493432547,    -0.41647431852001854,  -0.74255352520456774, 1.0724701315754954,
    -1.6510755894058389,   0.53542935632609101,   -2.0644148031211755,  -0.66215933966680873,
    -1.2042198455997326,   1.461975627213524,     1.7661608779293339,   -0.3294137519130651,
    0.84073324214353573,   -0.17998640125235033,  0.56806188732798191,  -0.75283719642146474,
    -1.7083392031670559,   -1.803098658479741,    0.38312185175751196,  2.2475950528076996,
    0.26941163050788702,   -0.52460461940085235};
const double kFfY[50] = {
    1.6925769405677387,    0.44274354737504673,  -0.18798863050146228,  -0.22786574920609481,
    -0.17193843754216537,  -0.30733202350967803, -0.45012466371515358,  -0.33159333054224144,
    -0.027729693887370618, 0.16356485856397943,  0.14688613748351126,   0.059494695446994324,
    -0.05317466236069629,  -0.26127205650969904, -0.46551952867248253,  -0.43314638186326082,
    -0.17339478306202794,  0.019655674448950364, -0.015271035116628504, -0.087516114210690582,
    0.068032282664845109,  0.46164541624687733,  0.80691846597336725,   0.71747500962240573,
    0.063581277590265717,  -0.77926183762551016, -1.2033317210388299,   -0.97646519390575581,
    -0.43492623632375788,  -0.037951277613145012, 0.067875061356486077, -0.044723478653895449,
    -0.3657929747179956,   -0.87437601294487588, -1.2638523901620111,   -1.0653788824047201,
    -0.21505804511071935,  0.6999027762158383,   1.0296740058874743,    0.78905730881361724,
    0.48753674793043378,   0.30808218028284307,  -0.11091651345154227,  -0.92911471913396293,
    -1.5279132502053299,   -1.1021767387735655,  0.2312512298313123,    1.3007356316704715,
    1.0143329176261664,    -0.51811833166077981};

/// Zero-phase magnitude of the filter at frequency f: |H(e^{jw})|^2.
double zero_phase_gain(const dsp::IirCoefficients& c, double f_hz, double fs_hz) {
    const std::complex<double> z =
        std::exp(std::complex<double>(0.0, -2.0 * 3.14159265358979323846 * f_hz / fs_hz));
    std::complex<double> num = 0.0, den = 0.0, zp = 1.0;
    for (std::size_t i = 0; i < std::max(c.b.size(), c.a.size()); ++i) {
        if (i < c.b.size()) num += c.b[i] * zp;
        if (i < c.a.size()) den += c.a[i] * zp;
        zp *= z;
    }
    const double mag = std::abs(num / den);
    return mag * mag;
}

} // namespace

TEST_CASE("Butterworth(4, 6 Hz, 30 Hz) matches the independent reference to 1e-9") {
    const auto c = dsp::design_butterworth_lowpass(4, 6.0, 30.0);
    REQUIRE(c.b.size() == 5);
    REQUIRE(c.a.size() == 5);
    for (int i = 0; i < 5; ++i) {
        CHECK(c.b[i] == Approx(kRefB[i]).margin(1e-9));
        CHECK(c.a[i] == Approx(kRefA[i]).margin(1e-9));
    }
}

TEST_CASE("Butterworth designs have unit DC gain and live inside the unit circle") {
    for (const auto& [order, fc, fs] : std::vector<std::tuple<int, double, double>>{
             {4, 6.0, 30.0}, {2, 0.25, 30.0}, {1, 3.0, 50.0}, {6, 10.0, 100.0}, {3, 0.4, 2.0}}) {
        const auto c = dsp::design_butterworth_lowpass(order, fc, fs);
        double sb = 0.0, sa = 0.0;
        for (double v : c.b) sb += v;
        for (double v : c.a) sa += v;
        CHECK(sb / sa == Approx(1.0).margin(1e-12));
        // audit poles with an independent root finder (a is z^-1 order; reverse)
        std::vector<double> poly(c.a.rbegin(), c.a.rend());
        for (const auto& root : testsup::poly_roots(poly)) CHECK(std::abs(root) < 1.0);
    }
}

TEST_CASE("cutoff at or above Nyquist is rejected") {
    CHECK_THROWS_AS(dsp::design_butterworth_lowpass(4, 15.0, 30.0), Error);
    CHECK_THROWS_AS(dsp::design_butterworth_lowpass(4, -1.0, 30.0), Error);
    try {
        dsp::design_butterworth_lowpass(4, 15.0, 30.0);
    } catch (const Error& e) {
        CHECK(e.code() == errc::cutoff_out_of_range);
    }
}

TEST_CASE("filtfilt reproduces the pinned zero-phase reference to 1e-8") {
    const auto c = dsp::design_butterworth_lowpass(4, 6.0, 30.0);
    const std::vector<double> x(kFfX, kFfX + 50);
    const auto y = dsp::filtfilt(c, x);
    REQUIRE(y.size() == 50);
    for (int i = 0; i < 50; ++i) CHECK(y[i] == Approx(kFfY[i]).margin(1e-8));
}

TEST_CASE("filtfilt is exact on constants and symmetric under time reversal") {
    const auto c = dsp::design_butterworth_lowpass(4, 6.0, 30.0);
    const std::vector<double> ones(40, 2.5);
    for (double v : dsp::filtfilt(c, ones)) CHECK(v == Approx(2.5).margin(1e-10));

    // steady margins keep the edge transients out of the comparison; with
    // the pinned 12-sample padding, white-noise edges only agree to ~1e-3
    std::vector<double> x(200, 0.3);
    testsup::TestRand tr(11);
    for (int i = 60; i < 140; ++i) x[i] = tr.next();
    auto xr = x;
    std::reverse(xr.begin(), xr.end());
    auto y = dsp::filtfilt(c, x), yr = dsp::filtfilt(c, xr);
    std::reverse(yr.begin(), yr.end());
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y[i] == Approx(yr[i]).margin(1e-10));
}

TEST_CASE("filtfilt impulse response is symmetric about the impulse") {
    const auto c = dsp::design_butterworth_lowpass(4, 6.0, 30.0);
    std::vector<double> x(201, 0.0);
    x[100] = 1.0;
    const auto y = dsp::filtfilt(c, x);
    for (int d = 1; d <= 60; ++d)
        CHECK(y[static_cast<std::size_t>(100 + d)] ==
              Approx(y[static_cast<std::size_t>(100 - d)]).margin(1e-10));
}

TEST_CASE("filtfilt attenuates a 10 Hz tone by the analytic |H|^2") {
    const auto c = dsp::design_butterworth_lowpass(4, 6.0, 30.0);
    const double gain = zero_phase_gain(c, 10.0, 30.0);
    std::vector<double> x(600);
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = std::sin(2.0 * 3.14159265358979323846 * 10.0 * static_cast<double>(i) / 30.0);
    const auto y = dsp::filtfilt(c, x);
    // project the interior onto the tone to estimate the output amplitude
    double num = 0.0, den = 0.0;
    for (std::size_t i = 100; i < 500; ++i) {
        num += y[i] * x[i];
        den += x[i] * x[i];
    }
    CHECK(num / den == Approx(gain).margin(1e-6));
}

TEST_CASE("filtfilt rejects too-short signals") {
    const auto c = dsp::design_butterworth_lowpass(4, 6.0, 30.0);
    std::vector<double> x(12, 1.0);  // needs > 12
    CHECK_THROWS_AS(dsp::filtfilt(c, x), Error);
}

TEST_CASE("filters are linear operators") {
    const auto c = dsp::design_butterworth_lowpass(4, 6.0, 30.0);
    testsup::TestRand tr(21);
    std::vector<double> x(80), y(80);
    for (int i = 0; i < 80; ++i) {
        x[i] = tr.next();
        y[i] = tr.next();
    }
    const double alpha = 1.7, beta = -0.6;
    std::vector<double> mix(80);
    for (int i = 0; i < 80; ++i) mix[i] = alpha * x[i] + beta * y[i];
    const auto fx = dsp::filtfilt(c, x), fy = dsp::filtfilt(c, y), fm = dsp::filtfilt(c, mix);
    for (int i = 0; i < 80; ++i)
        CHECK(fm[i] == Approx(alpha * fx[i] + beta * fy[i]).margin(1e-9));
}

TEST_CASE("remove_gravity zeroes a static series and passes a 2 Hz tone") {
    data::RawTriaxialSeries s;
    const int n = 1200;
    for (int i = 0; i < n; ++i) {
        s.t.push_back(i / 30.0);
        s.ax.push_back(0.0);
        s.ay.push_back(0.0);
        s.az.push_back(9.81);
    }
    SECTION("static input goes to zero") {
        const auto g = dsp::remove_gravity(s);
        for (int i = 0; i < n; ++i) {
            CHECK(g.ax[i] == Approx(0.0).margin(1e-6));
            CHECK(g.az[i] == Approx(0.0).margin(1e-6));
        }
        CHECK(g.t == s.t);
    }
    SECTION("2 Hz tone survives with amplitude within 1%") {
        for (int i = 0; i < n; ++i)
            s.az[i] += 1.5 * std::sin(2.0 * 3.14159265358979323846 * 2.0 * i / 30.0);
        const auto g = dsp::remove_gravity(s);
        double num = 0.0, den = 0.0;
        for (int i = 200; i < 1000; ++i) {
            const double tone = std::sin(2.0 * 3.14159265358979323846 * 2.0 * i / 30.0);
            num += g.az[i] * tone;
            den += tone * tone;
        }
        CHECK(num / den == Approx(1.5).epsilon(0.01));
        // offset removed
        double mean = 0.0;
        for (int i = 200; i < 1000; ++i) mean += g.az[i];
        CHECK(std::abs(mean / 800.0) < 0.01);
    }
    SECTION("zero input stays zero") {
        for (int i = 0; i < n; ++i) s.az[i] = 0.0;
        const auto g = dsp::remove_gravity(s);
        for (int i = 0; i < n; ++i) CHECK(g.az[i] == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("resample_bin_mean averages per whole second") {
    SECTION("constant input stays constant") {
        std::vector<double> t, v;
        for (int i = 0; i < 150; ++i) {
            t.push_back(i / 30.0);
            v.push_back(4.25);
        }
        const auto out = dsp::resample_bin_mean(t, v);
        for (double x : out.values) CHECK(x == 4.25);
    }
    SECTION("one bin of 1..30 averages to 15.5") {
        std::vector<double> t, v;
        for (int i = 0; i < 30; ++i) {
            t.push_back(i / 30.0);
            v.push_back(i + 1.0);
        }
        const auto out = dsp::resample_bin_mean(t, v);
        REQUIRE(out.size() == 1);
        CHECK(out.values[0] == 15.5);
    }
    SECTION("irregular seeded series matches brute-force binning exactly") {
        testsup::TestRand tr(5);
        std::vector<double> t, v;
        double tc = 0.0;
        for (int i = 0; i < 400; ++i) {
            tc += 0.02 + 0.03 * tr.uniform01();
            t.push_back(tc);
            v.push_back(tr.next());
        }
        const auto out = dsp::resample_bin_mean(t, v);
        const long long k0 = static_cast<long long>(std::floor(t.front()));
        for (std::size_t k = 0; k < out.size(); ++k) {
            double sum = 0.0;
            int cnt = 0;
            for (std::size_t i = 0; i < t.size(); ++i) {
                const double lo = static_cast<double>(k0 + static_cast<long long>(k));
                if (t[i] >= lo && t[i] < lo + 1.0) {
                    sum += v[i];
                    ++cnt;
                }
            }
            REQUIRE(cnt > 0);
            CHECK(out.values[k] == sum / cnt);  // bit-exact: same summation order
        }
    }
    SECTION("a gap larger than a second raises EmptyBin") {
        std::vector<double> t{0.1, 0.5, 3.7}, v{1, 2, 3};
        CHECK_THROWS_AS(dsp::resample_bin_mean(t, v), Error);
    }
}

TEST_CASE("interp_to_1hz interpolates linearly and labels by nearest breath") {
    data::BreathSeries b;
    b.t = {0.0, 2.0};
    b.vo2 = {300.0, 400.0};
    b.vco2 = {200.0, 300.0};
    b.label = {"a", "b"};
    const auto out = dsp::interp_to_1hz(b);
    REQUIRE(out.vo2.size() == 3);
    CHECK(out.vo2.values[1] == Approx(350.0));
    CHECK(out.vco2.values[1] == Approx(250.0));
    CHECK(out.labels[0] == "a");
    CHECK(out.labels[2] == "b");

    SECTION("single breath fails") {
        data::BreathSeries one;
        one.t = {1.0};
        one.vo2 = {1.0};
        one.vco2 = {1.0};
        one.label = {"x"};
        CHECK_THROWS_AS(dsp::interp_to_1hz(one), Error);
    }

    SECTION("seeded train matches an independent piecewise-linear oracle") {
        data::BreathSeries train;
        testsup::TestRand tr(31);
        double t = 0.4;
        for (int i = 0; i < 80; ++i) {
            train.t.push_back(t);
            train.vo2.push_back(300.0 + 50.0 * tr.next());
            train.vco2.push_back(250.0 + 40.0 * tr.next());
            train.label.push_back("x");
            t += 2.0 + tr.uniform01() * 2.0;
        }
        const auto got = dsp::interp_to_1hz(train);
        for (std::size_t k = 0; k < got.vo2.size(); ++k) {
            const double tk = got.vo2.start + static_cast<double>(k);
            // oracle: scan for the bracketing breaths, interpolate directly
            std::size_t j = 0;
            while (j + 1 < train.t.size() && train.t[j + 1] < tk) ++j;
            if (j + 1 >= train.t.size()) break;
            const double w = (tk - train.t[j]) / (train.t[j + 1] - train.t[j]);
            const double expect = train.vo2[j] * (1.0 - w) + train.vo2[j + 1] * w;
            CHECK(got.vo2.values[k] == Approx(expect).margin(1e-10));
        }
    }
}

TEST_CASE("savgol_smooth order 1 equals the same-padded moving average") {
    UniformSeries s;
    s.start = 0.0;
    s.rate = 1.0;
    testsup::TestRand tr(13);
    for (int i = 0; i < 200; ++i) s.values.push_back(tr.next() * 3.0);
    const auto smoothed = dsp::savgol_smooth(s, 21, 1);
    REQUIRE(smoothed.size() == s.size());

    // moving average over the identical odd-reflected extension
    const int m = 10;
    std::vector<double> ext;
    for (int i = m; i >= 1; --i) ext.push_back(2.0 * s.values.front() - s.values[i]);
    ext.insert(ext.end(), s.values.begin(), s.values.end());
    for (int i = 1; i <= m; ++i)
        ext.push_back(2.0 * s.values.back() - s.values[s.values.size() - 1 - i]);
    for (std::size_t i = 0; i < s.size(); ++i) {
        double sum = 0.0;
        for (int j = 0; j < 21; ++j) sum += ext[i + j];
        CHECK(smoothed.values[i] == Approx(sum / 21.0).margin(1e-12));
    }
}

TEST_CASE("savgol_smooth reproduces a linear ramp exactly") {
    UniformSeries s;
    s.start = 0.0;
    s.rate = 1.0;
    for (int i = 0; i < 100; ++i) s.values.push_back(0.7 * i - 3.0);
    const auto out = dsp::savgol_smooth(s, 21, 1);
    for (std::size_t i = 0; i < s.size(); ++i)
        CHECK(out.values[i] == Approx(s.values[i]).margin(1e-10));
}

TEST_CASE("savgol_smooth matches a per-window least-squares oracle") {
    UniformSeries s;
    s.start = 0.0;
    s.rate = 1.0;
    testsup::TestRand tr(17);
    for (int i = 0; i < 120; ++i) s.values.push_back(std::sin(i * 0.21) + 0.4 * tr.next());
    const int window = 11, order = 2, m = 5;
    const auto got = dsp::savgol_smooth(s, window, order);

    std::vector<double> ext;
    for (int i = m; i >= 1; --i) ext.push_back(2.0 * s.values.front() - s.values[i]);
    ext.insert(ext.end(), s.values.begin(), s.values.end());
    for (int i = 1; i <= m; ++i)
        ext.push_back(2.0 * s.values.back() - s.values[s.values.size() - 1 - i]);

    for (std::size_t c = 0; c < s.size(); ++c) {
        // solve the 3x3 normal equations for the window centered at c
        double A[3][3] = {};
        double rhs[3] = {};
        for (int j = -m; j <= m; ++j) {
            const double xv = j;
            const double yv = ext[c + static_cast<std::size_t>(j + m)];
            double px[3] = {1.0, xv, xv * xv};
            for (int r = 0; r < 3; ++r) {
                rhs[r] += px[r] * yv;
                for (int cc = 0; cc < 3; ++cc) A[r][cc] += px[r] * px[cc];
            }
        }
        // Gaussian elimination, 3x3
        for (int col = 0; col < 3; ++col) {
            int piv = col;
            for (int r = col + 1; r < 3; ++r)
                if (std::abs(A[r][col]) > std::abs(A[piv][col])) piv = r;
            std::swap(A[col], A[piv]);
            std::swap(rhs[col], rhs[piv]);
            for (int r = col + 1; r < 3; ++r) {
                const double f = A[r][col] / A[col][col];
                for (int cc = col; cc < 3; ++cc) A[r][cc] -= f * A[col][cc];
                rhs[r] -= f * rhs[col];
            }
        }
        double beta[3];
        for (int r = 3; r-- > 0;) {
            double v = rhs[r];
            for (int cc = r + 1; cc < 3; ++cc) v -= A[r][cc] * beta[cc];
            beta[r] = v / A[r][r];
        }
        CHECK(got.values[c] == Approx(beta[0]).margin(1e-10));
    }
}

TEST_CASE("savgol_smooth validates its window") {
    UniformSeries s;
    s.values.assign(30, 1.0);
    CHECK_THROWS_AS(dsp::savgol_smooth(s, 20, 1), Error);  // even window
    CHECK_THROWS_AS(dsp::savgol_smooth(s, 5, 7), Error);   // order >= window
    UniformSeries tiny;
    tiny.values.assign(10, 1.0);
    CHECK_THROWS_AS(dsp::savgol_smooth(tiny, 21, 1), Error);
}
