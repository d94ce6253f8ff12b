#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "paee/data.hpp"
#include "paee/error.hpp"

namespace paee::dsp {

using data::BreathSeries;
using data::RawTriaxialSeries;
using data::UniformSeries;
using data::UniformTriaxial;

/// Digital IIR filter in transfer-function form, a[0] normalized to 1.
struct IirCoefficients {
    std::vector<double> b;
    std::vector<double> a;
};

namespace detail {

/// Expands prod_k (1 - r_k z^-1) into real polynomial coefficients.
inline std::vector<double> poly_from_roots(const std::vector<std::complex<double>>& roots) {
    std::vector<std::complex<double>> p{1.0};
    for (const auto& r : roots) {
        std::vector<std::complex<double>> q(p.size() + 1, 0.0);
        for (std::size_t i = 0; i < p.size(); ++i) {
            q[i] += p[i];
            q[i + 1] -= p[i] * r;
        }
        p = std::move(q);
    }
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i].real();
    return out;
}

/// Gaussian elimination with partial pivoting; sized for the tiny systems
/// in this file (filter initial conditions, SG normal equations).
inline std::vector<double> solve_dense(std::vector<double> m, std::vector<double> rhs) {
    const std::size_t n = rhs.size();
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(m[r * n + col]) > std::abs(m[piv * n + col])) piv = r;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c) std::swap(m[col * n + c], m[piv * n + c]);
            std::swap(rhs[col], rhs[piv]);
        }
        const double d = m[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = m[r * n + col] / d;
            if (f == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) m[r * n + c] -= f * m[col * n + c];
            rhs[r] -= f * rhs[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = rhs[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= m[i * n + c] * x[c];
        x[i] = s / m[i * n + i];
    }
    return x;
}

/// Direct form II transposed with explicit initial state (state length
/// max(len(a), len(b)) - 1).
inline std::vector<double> lfilter(const std::vector<double>& b, const std::vector<double>& a,
                                   const std::vector<double>& x, const std::vector<double>& zi) {
    const std::size_t n = std::max(a.size(), b.size());
    std::vector<double> bb(b), aa(a);
    bb.resize(n, 0.0);
    aa.resize(n, 0.0);
    std::vector<double> y(x.size());
    if (n == 1) {
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = bb[0] * x[i];
        return y;
    }
    std::vector<double> z(zi);
    z.resize(n - 1, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double xi = x[i];
        const double yi = bb[0] * xi + z[0];
        for (std::size_t j = 0; j + 1 < n - 1; ++j)
            z[j] = bb[j + 1] * xi + z[j + 1] - aa[j + 1] * yi;
        z[n - 2] = bb[n - 1] * xi - aa[n - 1] * yi;
        y[i] = yi;
    }
    return y;
}

/// Steady-state initial conditions for a unit-amplitude step, so filter
/// startup transients vanish for constant inputs.
inline std::vector<double> lfilter_zi(const std::vector<double>& b, const std::vector<double>& a) {
    const std::size_t n = std::max(a.size(), b.size());
    std::vector<double> bb(b), aa(a);
    bb.resize(n, 0.0);
    aa.resize(n, 0.0);
    const std::size_t m = n - 1;
    // (I - companion(a)^T) zi = b[1:] - a[1:] b[0]
    std::vector<double> M(m * m, 0.0), rhs(m);
    for (std::size_t i = 0; i < m; ++i) {
        M[i * m + 0] = (i == 0 ? 1.0 : 0.0) + aa[i + 1];
        if (i + 1 < m) M[i * m + (i + 1)] -= 1.0;
        if (i >= 1) M[i * m + i] += 1.0;
        rhs[i] = bb[i + 1] - aa[i + 1] * bb[0];
    }
    return solve_dense(std::move(M), std::move(rhs));
}

/// Odd (antisymmetric) extension about both endpoints.
inline std::vector<double> odd_extend(const std::vector<double>& x, std::size_t pad) {
    std::vector<double> ext;
    ext.reserve(x.size() + 2 * pad);
    for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x.front() - x[i]);
    ext.insert(ext.end(), x.begin(), x.end());
    const std::size_t n = x.size();
    for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x.back() - x[n - 1 - i]);
    return ext;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Filter design
// ---------------------------------------------------------------------------

/// Butterworth lowpass: analog prototype poles, cutoff pre-warped for the
/// bilinear transform, zeros at z = -1, gain normalized to exactly 1 at DC.
inline IirCoefficients design_butterworth_lowpass(int order, double fc, double fs) {
    if (order < 1) throw Error(errc::domain_error, "filter order must be >= 1");
    if (!(fc > 0.0) || !(fc < fs / 2.0))
        throw Error(errc::cutoff_out_of_range, "cutoff must satisfy 0 < fc < fs/2");

    const double warped = 2.0 * fs * std::tan(3.14159265358979323846 * fc / fs);
    std::vector<std::complex<double>> zpoles(static_cast<std::size_t>(order));
    for (int k = 0; k < order; ++k) {
        const double theta =
            3.14159265358979323846 * (2.0 * k + order + 1.0) / (2.0 * order);
        const std::complex<double> pa = warped * std::complex<double>(std::cos(theta), std::sin(theta));
        zpoles[static_cast<std::size_t>(k)] = (2.0 * fs + pa) / (2.0 * fs - pa);
    }

    IirCoefficients c;
    c.a = detail::poly_from_roots(zpoles);
    c.b.assign(static_cast<std::size_t>(order) + 1, 0.0);
    c.b[0] = 1.0;  // (1 + z^-1)^order
    for (int k = 1; k <= order; ++k)
        for (int j = k; j >= 1; --j) c.b[static_cast<std::size_t>(j)] += c.b[static_cast<std::size_t>(j - 1)];

    double sa = 0.0, sb = 0.0;
    for (double v : c.a) sa += v;
    for (double v : c.b) sb += v;
    const double gain = sa / sb;
    for (double& v : c.b) v *= gain;

    for (const auto& p : zpoles)
        if (!(std::abs(p) < 1.0))
            throw Error(errc::domain_error, "designed filter is unstable");
    return c;
}

// ---------------------------------------------------------------------------
// Zero-phase filtering
// ---------------------------------------------------------------------------

/// Forward-backward IIR application with odd-reflection padding of length
/// 3*(max(len(a), len(b)) - 1) and steady-state initial conditions. Output
/// has the input's length and no phase shift.
inline std::vector<double> filtfilt(const IirCoefficients& c, const std::vector<double>& x) {
    const std::size_t ntaps = std::max(c.a.size(), c.b.size());
    const std::size_t pad = 3 * (ntaps - 1);
    if (x.size() <= pad)
        throw Error(errc::signal_too_short,
                    "filtfilt needs more than " + std::to_string(pad) + " samples");

    const std::vector<double> ext = detail::odd_extend(x, pad);
    const std::vector<double> zi = detail::lfilter_zi(c.b, c.a);

    auto scaled = [&](double x0) {
        std::vector<double> z(zi);
        for (double& v : z) v *= x0;
        return z;
    };
    std::vector<double> y = detail::lfilter(c.b, c.a, ext, scaled(ext.front()));
    std::reverse(y.begin(), y.end());
    y = detail::lfilter(c.b, c.a, y, scaled(y.front()));
    std::reverse(y.begin(), y.end());
    return {y.begin() + static_cast<std::ptrdiff_t>(pad),
            y.begin() + static_cast<std::ptrdiff_t>(pad + x.size())};
}

// ---------------------------------------------------------------------------
// Gravity removal
// ---------------------------------------------------------------------------

/// Subtracts a per-axis gravity estimate obtained from a zero-phase
/// order-2 Butterworth lowpass at 0.25 Hz. Timestamps are untouched.
inline RawTriaxialSeries remove_gravity(const RawTriaxialSeries& raw) {
    const double fs = raw.nominal_rate();
    if (raw.size() < 7 || fs <= 0.5)
        throw Error(errc::signal_too_short, "series too short for gravity removal");
    const IirCoefficients lp = design_butterworth_lowpass(2, 0.25, fs);

    RawTriaxialSeries out;
    out.t = raw.t;
    auto strip = [&](const std::vector<double>& axis) {
        const std::vector<double> g = filtfilt(lp, axis);
        std::vector<double> r(axis.size());
        for (std::size_t i = 0; i < axis.size(); ++i) r[i] = axis[i] - g[i];
        return r;
    };
    out.ax = strip(raw.ax);
    out.ay = strip(raw.ay);
    out.az = strip(raw.az);
    return out;
}

// ---------------------------------------------------------------------------
// Resampling
// ---------------------------------------------------------------------------

namespace detail {

inline std::pair<long long, long long> bin_range(const std::vector<double>& t) {
    const long long k0 = static_cast<long long>(std::floor(t.front()));
    const long long k1 = static_cast<long long>(std::floor(t.back()));
    return {k0, k1};
}

inline UniformSeries bin_mean_1hz(const std::vector<double>& t, const std::vector<double>& v) {
    const auto [k0, k1] = bin_range(t);
    const std::size_t nbins = static_cast<std::size_t>(k1 - k0 + 1);
    std::vector<double> sum(nbins, 0.0);
    std::vector<std::size_t> cnt(nbins, 0);
    for (std::size_t i = 0; i < t.size(); ++i) {
        const long long k = static_cast<long long>(std::floor(t[i]));
        sum[static_cast<std::size_t>(k - k0)] += v[i];
        cnt[static_cast<std::size_t>(k - k0)] += 1;
    }
    UniformSeries out;
    out.start = static_cast<double>(k0);
    out.rate = 1.0;
    out.values.resize(nbins);
    for (std::size_t k = 0; k < nbins; ++k) {
        if (cnt[k] == 0)
            throw Error(errc::empty_bin,
                        "no samples in second " + std::to_string(k0 + static_cast<long long>(k)));
        out.values[k] = sum[k] / static_cast<double>(cnt[k]);
    }
    return out;
}

} // namespace detail

/// 1 Hz resampling by per-second bin means: output second k averages the
/// samples with timestamps in [k, k+1).
inline UniformSeries resample_bin_mean(const std::vector<double>& t, const std::vector<double>& v) {
    if (t.empty() || t.size() != v.size())
        throw Error(errc::length_mismatch, "timestamp/value length mismatch");
    return detail::bin_mean_1hz(t, v);
}

inline UniformTriaxial resample_bin_mean(const RawTriaxialSeries& s) {
    if (s.size() == 0) throw Error(errc::signal_too_short, "empty series");
    const UniformSeries x = detail::bin_mean_1hz(s.t, s.ax);
    const UniformSeries y = detail::bin_mean_1hz(s.t, s.ay);
    const UniformSeries z = detail::bin_mean_1hz(s.t, s.az);
    UniformTriaxial out;
    out.start = x.start;
    out.rate = 1.0;
    out.x = x.values;
    out.y = y.values;
    out.z = z.values;
    return out;
}

// ---------------------------------------------------------------------------
// Breath interpolation
// ---------------------------------------------------------------------------

struct InterpolatedBreaths {
    UniformSeries vo2;
    UniformSeries vco2;
    std::vector<std::string> labels;  // one per output second, nearest breath
};

/// Linear interpolation of the breath train onto the integer-second grid
/// inside [t_first, t_last]; labels follow the nearest breath in time.
inline InterpolatedBreaths interp_to_1hz(const BreathSeries& b) {
    if (b.size() < 2) throw Error(errc::too_few_breaths, "need at least 2 breaths");
    const long long g0 = static_cast<long long>(std::ceil(b.t.front()));
    const long long g1 = static_cast<long long>(std::floor(b.t.back()));
    if (g1 < g0) throw Error(errc::too_few_breaths, "breath span contains no whole second");

    InterpolatedBreaths out;
    out.vo2.start = out.vco2.start = static_cast<double>(g0);
    out.vo2.rate = out.vco2.rate = 1.0;
    const std::size_t n = static_cast<std::size_t>(g1 - g0 + 1);
    out.vo2.values.resize(n);
    out.vco2.values.resize(n);
    out.labels.resize(n);

    std::size_t j = 0;  // b.t[j] <= tk <= b.t[j+1]
    for (std::size_t k = 0; k < n; ++k) {
        const double tk = static_cast<double>(g0 + static_cast<long long>(k));
        while (j + 2 < b.size() && b.t[j + 1] < tk) ++j;
        const double t0 = b.t[j], t1 = b.t[j + 1];
        const double w = (tk - t0) / (t1 - t0);
        out.vo2.values[k] = b.vo2[j] + w * (b.vo2[j + 1] - b.vo2[j]);
        out.vco2.values[k] = b.vco2[j] + w * (b.vco2[j + 1] - b.vco2[j]);
        out.labels[k] = std::abs(tk - t0) <= std::abs(t1 - tk) ? b.label[j] : b.label[j + 1];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Savitzky-Golay smoothing
// ---------------------------------------------------------------------------

namespace detail {

/// Center-point SG weights: w = V u with (V^T V) u = e0, V the local
/// polynomial design over offsets -m..m.
inline std::vector<double> savgol_weights(int window, int polyorder) {
    const int m = (window - 1) / 2;
    const int p = polyorder + 1;
    std::vector<double> vand(static_cast<std::size_t>(window) * p);
    for (int i = 0; i < window; ++i) {
        double pw = 1.0;
        for (int k = 0; k < p; ++k) {
            vand[static_cast<std::size_t>(i) * p + k] = pw;
            pw *= static_cast<double>(i - m);
        }
    }
    std::vector<double> gram(static_cast<std::size_t>(p) * p, 0.0);
    for (int r = 0; r < p; ++r)
        for (int c = 0; c < p; ++c) {
            double s = 0.0;
            for (int i = 0; i < window; ++i)
                s += vand[static_cast<std::size_t>(i) * p + r] * vand[static_cast<std::size_t>(i) * p + c];
            gram[static_cast<std::size_t>(r) * p + c] = s;
        }
    std::vector<double> e0(static_cast<std::size_t>(p), 0.0);
    e0[0] = 1.0;
    const std::vector<double> u = solve_dense(std::move(gram), std::move(e0));
    std::vector<double> w(static_cast<std::size_t>(window));
    for (int i = 0; i < window; ++i) {
        double s = 0.0;
        for (int k = 0; k < p; ++k) s += vand[static_cast<std::size_t>(i) * p + k] * u[static_cast<std::size_t>(k)];
        w[static_cast<std::size_t>(i)] = s;
    }
    return w;
}

} // namespace detail

/// Least-squares polynomial smoothing over a symmetric window; the output
/// sample is the fitted polynomial's value at the window center. Edges use
/// the same odd-reflection extension as filtfilt, which reproduces constants
/// and straight ramps exactly through the boundary.
inline UniformSeries savgol_smooth(const UniformSeries& x, int window = 21, int polyorder = 1) {
    if (window < 1 || window % 2 == 0 || polyorder < 0 || polyorder >= window)
        throw Error(errc::bad_window, "window must be odd and larger than polyorder");
    if (x.size() < static_cast<std::size_t>(window))
        throw Error(errc::signal_too_short, "series shorter than smoothing window");

    const std::vector<double> w = detail::savgol_weights(window, polyorder);
    const std::size_t m = static_cast<std::size_t>((window - 1) / 2);
    const std::vector<double> ext = detail::odd_extend(x.values, m);

    UniformSeries out;
    out.start = x.start;
    out.rate = x.rate;
    out.values.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < w.size(); ++j) s += w[j] * ext[i + j];
        out.values[i] = s;
    }
    return out;
}

} // namespace paee::dsp
