#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "paee/error.hpp"
#include "paee/evaluation.hpp"

namespace paee::stats {

/// Statistic, degrees of freedom, p-value. `note` is set for degenerate
/// inputs that get a pinned p instead of an exception.
struct TestResult {
    double statistic = 0.0;
    double df1 = 0.0;
    double df2 = 0.0;
    double p = 1.0;
    std::string note;
};

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

namespace detail {

/// Continued fraction for the incomplete beta (modified Lentz).
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double kEps = 1e-16, kFpMin = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

} // namespace detail

/// Regularized incomplete beta I_x(a, b) by continued fraction, switching
/// tails at the usual symmetry point for convergence.
inline double reg_inc_beta(double x, double a, double b) {
    if (!(a > 0.0) || !(b > 0.0) || x < 0.0 || x > 1.0)
        throw Error(errc::domain_error, "reg_inc_beta needs a,b > 0 and x in [0,1]");
    if (x == 0.0) return 0.0;
    if (x == 1.0) return 1.0;
    const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                            a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::betacf(a, b, x) / a;
    return 1.0 - front * detail::betacf(b, a, 1.0 - x) / b;
}

/// Two-sided Student t tail: p = I_{df/(df+t^2)}(df/2, 1/2).
inline double t_sf_two_sided(double t, double df) {
    if (!(df >= 1.0)) throw Error(errc::domain_error, "df must be >= 1");
    return reg_inc_beta(df / (df + t * t), df / 2.0, 0.5);
}

/// Upper tail of the F distribution via the incomplete beta.
inline double f_sf(double f, double df1, double df2) {
    if (!(df1 > 0.0) || !(df2 > 0.0)) throw Error(errc::domain_error, "degrees of freedom must be positive");
    if (f <= 0.0) return 1.0;
    return reg_inc_beta(df2 / (df2 + df1 * f), df2 / 2.0, df1 / 2.0);
}

namespace detail {

/// Inverse normal CDF, Wichura's PPND16 (AS 241).
inline double ppnd16(double p) {
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                  3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -val : val;
}

/// Upper-tail standard normal probability.
inline double norm_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

inline double poly(const double* c, int n, double x) {
    double v = c[0];
    double xp = x;
    for (int i = 1; i < n; ++i) {
        v += c[i] * xp;
        xp *= x;
    }
    return v;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Shapiro-Wilk (AS R94, complete samples)
// ---------------------------------------------------------------------------

/// W statistic and p-value per Royston's AS R94 approximation, valid here
/// for 3 <= n <= 50 complete samples.
inline TestResult shapiro_wilk(const std::vector<double>& sample) {
    const std::size_t n = sample.size();
    if (n < 3 || n > 50)
        throw Error(errc::sample_size_out_of_range, "Shapiro-Wilk supports 3 <= n <= 50 here");
    std::vector<double> x(sample);
    std::sort(x.begin(), x.end());
    const double range = x.back() - x.front();
    if (range < 1e-19) throw Error(errc::constant_sample, "sample has effectively zero range");

    static const double c1[6] = {0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056};
    static const double c2[6] = {0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633};
    static const double c3[4] = {0.5440, -0.39978, 0.025054, -6.714e-4};
    static const double c4[4] = {1.3822, -0.77857, 0.062767, -0.0020322};
    static const double c5[4] = {-1.5861, -0.31082, -0.083751, 0.0038915};
    static const double c6[3] = {-0.4803, -0.082676, 0.0030302};
    static const double g[2] = {-2.273, 0.459};
    constexpr double pi6 = 1.90985931710274;   // 6/pi
    constexpr double stqr = 1.04719755119660;  // asin(sqrt(3/4))

    const double an = static_cast<double>(n);
    const std::size_t n2 = n / 2;
    std::vector<double> a(n2, 0.0);
    if (n == 3) {
        a[0] = std::sqrt(0.5);
    } else {
        const double an25 = an + 0.25;
        double summ2 = 0.0;
        for (std::size_t i = 0; i < n2; ++i) {
            a[i] = detail::ppnd16((static_cast<double>(i + 1) - 0.375) / an25);
            summ2 += a[i] * a[i];
        }
        summ2 *= 2.0;
        const double ssumm2 = std::sqrt(summ2);
        const double rsn = 1.0 / std::sqrt(an);
        const double a1 = detail::poly(c1, 6, rsn) - a[0] / ssumm2;
        std::size_t i1;
        double fac;
        if (n > 5) {
            i1 = 2;
            const double a2 = -a[1] / ssumm2 + detail::poly(c2, 6, rsn);
            fac = std::sqrt((summ2 - 2.0 * a[0] * a[0] - 2.0 * a[1] * a[1]) /
                            (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2));
            a[0] = a1;
            a[1] = a2;
        } else {
            i1 = 1;
            fac = std::sqrt((summ2 - 2.0 * a[0] * a[0]) / (1.0 - 2.0 * a1 * a1));
            a[0] = a1;
        }
        for (std::size_t i = i1; i < n2; ++i) a[i] = -a[i] / fac;
    }

    // W as the squared correlation between data and coefficients
    double sx = 0.0, sa = 0.0;
    {
        std::ptrdiff_t j = static_cast<std::ptrdiff_t>(n) - 1;
        for (std::size_t i = 0; i < n; ++i, --j) {
            sx += x[i] / range;
            if (static_cast<std::ptrdiff_t>(i) != j)
                sa += (static_cast<std::ptrdiff_t>(i) < j ? -1.0 : 1.0) *
                      a[static_cast<std::size_t>(std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(i), j))];
        }
    }
    sa /= an;
    sx /= an;
    double ssa = 0.0, ssx = 0.0, sax = 0.0;
    {
        std::ptrdiff_t j = static_cast<std::ptrdiff_t>(n) - 1;
        for (std::size_t i = 0; i < n; ++i, --j) {
            double asa;
            if (static_cast<std::ptrdiff_t>(i) != j)
                asa = (static_cast<std::ptrdiff_t>(i) < j ? -1.0 : 1.0) *
                          a[static_cast<std::size_t>(std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(i), j))] -
                      sa;
            else
                asa = -sa;
            const double xsx = x[i] / range - sx;
            ssa += asa * asa;
            ssx += xsx * xsx;
            sax += asa * xsx;
        }
    }
    const double ssassx = std::sqrt(ssa * ssx);
    const double w1 = (ssassx - sax) * (ssassx + sax) / (ssa * ssx);
    const double w = 1.0 - w1;

    TestResult res;
    res.statistic = w;
    res.df1 = an;
    if (n == 3) {
        res.p = std::clamp(pi6 * (std::asin(std::sqrt(w)) - stqr), 0.0, 1.0);
        return res;
    }
    double y = std::log(w1);
    const double xx = std::log(an);
    double m, s;
    if (n <= 11) {
        const double gamma = detail::poly(g, 2, an);
        if (y >= gamma) {
            res.p = 1e-19;
            return res;
        }
        y = -std::log(gamma - y);
        m = detail::poly(c3, 4, an);
        s = std::exp(detail::poly(c4, 4, an));
    } else {
        m = detail::poly(c5, 4, xx);
        s = std::exp(detail::poly(c6, 3, xx));
    }
    res.p = detail::norm_sf((y - m) / s);
    return res;
}

// ---------------------------------------------------------------------------
// Paired t-test
// ---------------------------------------------------------------------------

/// Two-sided paired t on d = a - b with sample (n-1) standard deviation.
/// Degenerate difference vectors come back flagged instead of throwing:
/// all-zero d gives t = 0, p = 1; constant nonzero d gives p = 0.
inline TestResult paired_t(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw Error(errc::length_mismatch, "paired samples differ in length");
    const std::size_t n = a.size();
    if (n < 2) throw Error(errc::too_few_samples, "need at least 2 pairs");

    double mean_d = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean_d += a[i] - b[i];
    mean_d /= static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = a[i] - b[i] - mean_d;
        ss += e * e;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));

    TestResult res;
    res.df1 = static_cast<double>(n - 1);
    if (sd == 0.0) {
        if (mean_d == 0.0) {
            res.statistic = 0.0;
            res.p = 1.0;
            res.note = "identical samples";
        } else {
            res.statistic = mean_d > 0.0 ? std::numeric_limits<double>::infinity()
                                         : -std::numeric_limits<double>::infinity();
            res.p = 0.0;
            res.note = "ZeroVariance: constant nonzero differences";
        }
        return res;
    }
    res.statistic = mean_d / (sd / std::sqrt(static_cast<double>(n)));
    res.p = t_sf_two_sided(res.statistic, res.df1);
    return res;
}

// ---------------------------------------------------------------------------
// One-way repeated-measures ANOVA
// ---------------------------------------------------------------------------

struct RmAnovaResult {
    double ss_conditions = 0.0;
    double ss_subjects = 0.0;
    double ss_error = 0.0;
    double ms_conditions = 0.0;
    double ms_error = 0.0;
    TestResult f;  // statistic = F, df1 = K-1, df2 = (K-1)(S-1)
};

/// Within-subjects one-way ANOVA on an S x K matrix (rows = subjects).
/// Subject main effects are removed from the error term; no sphericity
/// correction is applied.
inline RmAnovaResult rm_anova_oneway(const std::vector<std::vector<double>>& m) {
    const std::size_t S = m.size();
    if (S < 3) throw Error(errc::too_few_subjects, "repeated-measures ANOVA needs >= 3 subjects");
    const std::size_t K = m.front().size();
    if (K < 2) throw Error(errc::domain_error, "need >= 2 conditions");
    for (const auto& row : m)
        if (row.size() != K) throw Error(errc::length_mismatch, "ragged metric matrix");

    double grand = 0.0;
    for (const auto& row : m)
        for (double v : row) grand += v;
    grand /= static_cast<double>(S * K);

    double ss_subj = 0.0;
    for (const auto& row : m) {
        double mu = 0.0;
        for (double v : row) mu += v;
        mu /= static_cast<double>(K);
        ss_subj += (mu - grand) * (mu - grand);
    }
    ss_subj *= static_cast<double>(K);

    double ss_cond = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
        double mu = 0.0;
        for (std::size_t s = 0; s < S; ++s) mu += m[s][k];
        mu /= static_cast<double>(S);
        ss_cond += (mu - grand) * (mu - grand);
    }
    ss_cond *= static_cast<double>(S);

    double ss_tot = 0.0;
    for (const auto& row : m)
        for (double v : row) ss_tot += (v - grand) * (v - grand);
    const double ss_err = ss_tot - ss_subj - ss_cond;

    RmAnovaResult res;
    res.ss_conditions = ss_cond;
    res.ss_subjects = ss_subj;
    res.ss_error = ss_err;
    res.f.df1 = static_cast<double>(K - 1);
    res.f.df2 = static_cast<double>((K - 1) * (S - 1));
    res.ms_conditions = ss_cond / res.f.df1;
    res.ms_error = ss_err / res.f.df2;

    const double tiny = 1e-12 * std::max(1.0, ss_tot);
    if (ss_err <= tiny) {
        if (ss_cond > tiny) {
            res.f.statistic = std::numeric_limits<double>::infinity();
            res.f.p = 0.0;
            res.f.note = "ZeroErrorVariance: no residual variance";
        } else {
            res.f.statistic = 0.0;
            res.f.p = 1.0;
            res.f.note = "all cells equal";
        }
        return res;
    }
    res.f.statistic = res.ms_conditions / res.ms_error;
    res.f.p = f_sf(res.f.statistic, res.f.df1, res.f.df2);
    return res;
}

// ---------------------------------------------------------------------------
// Bonferroni
// ---------------------------------------------------------------------------

inline std::vector<double> bonferroni(const std::vector<double>& ps) {
    const double m = static_cast<double>(ps.size());
    std::vector<double> out;
    out.reserve(ps.size());
    for (double p : ps) {
        if (p < 0.0 || p > 1.0) throw Error(errc::domain_error, "p-values must lie in [0,1]");
        out.push_back(std::min(1.0, m * p));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Full protocol over the (composition x model) grid
// ---------------------------------------------------------------------------

struct CellNormality {
    std::string composition, model, metric;
    TestResult sw;
};

struct AnovaEntry {
    std::string factor, metric;
    RmAnovaResult anova;
};

struct PairwiseEntry {
    std::string metric, first, second;
    TestResult t;
    double p_adjusted = 0.0;
    bool significant = false;  // at 0.05 after adjustment
};

struct StatsReport {
    std::vector<CellNormality> normality;
    std::vector<AnovaEntry> anova;
    std::vector<PairwiseEntry> pairwise;
};

inline const std::vector<std::string>& grid_compositions() {
    static const std::vector<std::string> v{"pelvis-acc", "3-acc", "l-wrist-acc", "r-wrist-acc"};
    return v;
}

inline const std::vector<std::string>& grid_models() {
    static const std::vector<std::string> v{"LR", "CNN-LSTM"};
    return v;
}

/// Shapiro-Wilk per cell, one-way RM-ANOVA per factor (averaging over the
/// other factor), and all 6 pairwise composition contrasts with Bonferroni
/// m = 6, for NRMSE and R-squared alike.
inline StatsReport analysis_pipeline(const std::vector<evaluation::ResultRow>& rows) {
    // cell -> subject -> metric values
    std::map<std::string, std::map<std::string, std::map<std::string, std::pair<double, double>>>> grid;
    std::set<std::string> subjects;
    for (const auto& r : rows) {
        grid[r.composition][r.model][r.subject] = {r.nrmse, r.r2};
        subjects.insert(r.subject);
    }
    const std::vector<std::string> subj(subjects.begin(), subjects.end());
    if (subj.size() < 3) throw Error(errc::incomplete_grid, "need >= 3 subjects for the protocol");
    for (const auto& comp : grid_compositions())
        for (const auto& model : grid_models()) {
            const auto ci = grid.find(comp);
            if (ci == grid.end() || ci->second.find(model) == ci->second.end())
                throw Error(errc::incomplete_grid, "missing cell " + comp + "/" + model);
            const auto& cell = ci->second.at(model);
            for (const auto& s : subj)
                if (cell.find(s) == cell.end())
                    throw Error(errc::incomplete_grid, "cell " + comp + "/" + model + " lacks subject " + s);
        }

    auto metric_of = [](const std::pair<double, double>& v, bool use_r2) {
        return use_r2 ? v.second : v.first;
    };

    StatsReport report;
    for (const bool use_r2 : {false, true}) {
        const std::string metric = use_r2 ? "R2" : "NRMSE";

        for (const auto& comp : grid_compositions())
            for (const auto& model : grid_models()) {
                std::vector<double> vals;
                vals.reserve(subj.size());
                for (const auto& s : subj) vals.push_back(metric_of(grid[comp][model][s], use_r2));
                CellNormality cn;
                cn.composition = comp;
                cn.model = model;
                cn.metric = metric;
                try {
                    cn.sw = shapiro_wilk(vals);
                } catch (const Error& e) {
                    cn.sw.note = std::string(errc_name(e.code())) + ": " + e.what();
                    cn.sw.statistic = 1.0;
                    cn.sw.p = 1.0;
                }
                report.normality.push_back(std::move(cn));
            }

        // per-subject averages over the other factor
        std::vector<std::vector<double>> by_comp(subj.size(), std::vector<double>(4, 0.0));
        std::vector<std::vector<double>> by_model(subj.size(), std::vector<double>(2, 0.0));
        for (std::size_t si = 0; si < subj.size(); ++si) {
            for (std::size_t ci = 0; ci < grid_compositions().size(); ++ci) {
                double acc = 0.0;
                for (const auto& model : grid_models())
                    acc += metric_of(grid[grid_compositions()[ci]][model][subj[si]], use_r2);
                by_comp[si][ci] = acc / static_cast<double>(grid_models().size());
            }
            for (std::size_t mi = 0; mi < grid_models().size(); ++mi) {
                double acc = 0.0;
                for (const auto& comp : grid_compositions())
                    acc += metric_of(grid[comp][grid_models()[mi]][subj[si]], use_r2);
                by_model[si][mi] = acc / static_cast<double>(grid_compositions().size());
            }
        }
        report.anova.push_back({"composition", metric, rm_anova_oneway(by_comp)});
        report.anova.push_back({"model", metric, rm_anova_oneway(by_model)});

        // all composition pairs on the model-averaged vectors
        std::vector<PairwiseEntry> pw;
        std::vector<double> raw_ps;
        for (std::size_t i = 0; i < grid_compositions().size(); ++i)
            for (std::size_t j = i + 1; j < grid_compositions().size(); ++j) {
                std::vector<double> va(subj.size()), vb(subj.size());
                for (std::size_t si = 0; si < subj.size(); ++si) {
                    va[si] = by_comp[si][i];
                    vb[si] = by_comp[si][j];
                }
                PairwiseEntry e;
                e.metric = metric;
                e.first = grid_compositions()[i];
                e.second = grid_compositions()[j];
                e.t = paired_t(va, vb);
                raw_ps.push_back(e.t.p);
                pw.push_back(std::move(e));
            }
        const std::vector<double> adj = bonferroni(raw_ps);
        for (std::size_t k = 0; k < pw.size(); ++k) {
            pw[k].p_adjusted = adj[k];
            pw[k].significant = adj[k] < 0.05;
            report.pairwise.push_back(std::move(pw[k]));
        }
    }
    return report;
}

inline StatsReport analysis_pipeline(const std::vector<evaluation::ExperimentResult>& results) {
    std::vector<evaluation::ResultRow> rows;
    for (const auto& r : results)
        for (const auto& f : r.folds) {
            if (!f.error.empty())
                throw Error(errc::incomplete_grid,
                            "fold " + r.composition + "/" + r.model + "/" + f.subject + " failed");
            rows.push_back({r.composition, r.model, f.subject, f.nrmse, f.r2});
        }
    return analysis_pipeline(rows);
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

inline std::string to_text(const StatsReport& report) {
    char buf[256];
    std::string out;
    out += "=== Shapiro-Wilk normality (per grid cell) ===\n";
    out += "composition    model     metric  W         p\n";
    for (const auto& c : report.normality) {
        std::snprintf(buf, sizeof(buf), "%-14s %-9s %-7s %-9.4f %-9.4f %s\n", c.composition.c_str(),
                      c.model.c_str(), c.metric.c_str(), c.sw.statistic, c.sw.p, c.sw.note.c_str());
        out += buf;
    }
    out += "\n=== Repeated-measures ANOVA (one-way per factor) ===\n";
    out += "factor       metric  SS_cond    SS_err     df      MS_cond    MS_err     F          p\n";
    for (const auto& a : report.anova) {
        std::snprintf(buf, sizeof(buf), "%-12s %-7s %-10.5f %-10.5f %2.0f,%-4.0f %-10.5f %-10.5f %-10.4f %.6f %s\n",
                      a.factor.c_str(), a.metric.c_str(), a.anova.ss_conditions, a.anova.ss_error,
                      a.anova.f.df1, a.anova.f.df2, a.anova.ms_conditions, a.anova.ms_error,
                      a.anova.f.statistic, a.anova.f.p, a.anova.f.note.c_str());
        out += buf;
    }
    out += "\n=== Pairwise paired t-tests (Bonferroni m = 6) ===\n";
    out += "metric  pair                            t          raw p      adj p      significant\n";
    for (const auto& e : report.pairwise) {
        std::snprintf(buf, sizeof(buf), "%-7s %-14s vs %-14s %-10.4f %-10.6f %-10.6f %s%s%s\n",
                      e.metric.c_str(), e.first.c_str(), e.second.c_str(), e.t.statistic, e.t.p,
                      e.p_adjusted, e.significant ? "yes" : "no", e.t.note.empty() ? "" : "  ",
                      e.t.note.c_str());
        out += buf;
    }
    return out;
}

} // namespace paee::stats
