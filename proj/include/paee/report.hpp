#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "paee/csv.hpp"
#include "paee/error.hpp"
#include "paee/evaluation.hpp"

namespace paee::report {

struct TraceData {
    std::vector<double> t;
    std::vector<double> truth;
    std::vector<double> pred;
};

inline TraceData parse_trace_csv(std::string_view text) {
    const auto lines = csv::split_lines(text);
    if (lines.empty() || lines[0] != evaluation::kTraceHeader)
        throw Error(errc::malformed_row, "expected trace header");
    TraceData d;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = csv::split_fields(lines[i]);
        if (f.size() != 3)
            throw Error(errc::malformed_row, "expected 3 fields at line " + std::to_string(i + 1));
        d.t.push_back(csv::parse_double(f[0], i + 1));
        d.truth.push_back(csv::parse_double(f[1], i + 1));
        d.pred.push_back(csv::parse_double(f[2], i + 1));
    }
    return d;
}

namespace detail {

inline std::string polyline(const std::vector<double>& t, const std::vector<double>& v,
                            double t0, double t1, double v0, double v1, double w, double h,
                            double ox, double oy, const char* stroke, const char* dash) {
    // cap the emitted point count; SVGs stay diffable and small
    const std::size_t step = std::max<std::size_t>(1, t.size() / 1200);
    std::string out = "  <polyline fill=\"none\" stroke=\"";
    out += stroke;
    out += "\" stroke-width=\"1.2\"";
    if (dash[0] != '\0') out += std::string(" stroke-dasharray=\"") + dash + "\"";
    out += " points=\"";
    char buf[64];
    for (std::size_t i = 0; i < t.size(); i += step) {
        const double px = ox + (t[i] - t0) / (t1 - t0) * w;
        const double py = oy + h - (v[i] - v0) / (v1 - v0) * h;
        std::snprintf(buf, sizeof(buf), "%.1f,%.1f ", px, py);
        out += buf;
    }
    out += "\"/>\n";
    return out;
}

} // namespace detail

/// Ground truth and prediction over time with activity-boundary markers.
/// Pure text SVG, no wall-clock content, byte-stable across runs.
inline std::string render_trace_svg(const TraceData& d, const std::string& title,
                                    const std::vector<std::pair<double, std::string>>& boundaries) {
    if (d.t.empty()) throw Error(errc::io_error, "empty trace");
    const double width = 960.0, height = 340.0;
    const double ox = 60.0, oy = 30.0, pw = width - ox - 20.0, ph = height - oy - 50.0;
    const double t0 = d.t.front(), t1 = std::max(d.t.back(), t0 + 1.0);
    double v0 = 0.0, v1 = 1.0;
    for (std::size_t i = 0; i < d.t.size(); ++i) {
        v0 = std::min({v0, d.truth[i], d.pred[i]});
        v1 = std::max({v1, d.truth[i], d.pred[i]});
    }
    v1 += 0.05 * (v1 - v0);

    char buf[256];
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"340\" "
                    "viewBox=\"0 0 960 340\">\n";
    s += "  <rect width=\"960\" height=\"340\" fill=\"white\"/>\n";
    std::snprintf(buf, sizeof(buf), "  <text x=\"%.0f\" y=\"20\" font-size=\"14\">%s</text>\n", ox,
                  title.c_str());
    s += buf;

    // axes
    std::snprintf(buf, sizeof(buf),
                  "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                  ox, oy + ph, ox + pw, oy + ph);
    s += buf;
    std::snprintf(buf, sizeof(buf),
                  "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"black\"/>\n",
                  ox, oy, ox, oy + ph);
    s += buf;
    for (int k = 0; k <= 4; ++k) {
        const double v = v0 + (v1 - v0) * k / 4.0;
        const double py = oy + ph - ph * k / 4.0;
        std::snprintf(buf, sizeof(buf),
                      "  <text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" text-anchor=\"end\">%.2f</text>\n",
                      ox - 6.0, py + 3.0, v);
        s += buf;
    }
    for (int k = 0; k <= 6; ++k) {
        const double tv = t0 + (t1 - t0) * k / 6.0;
        const double px = ox + pw * k / 6.0;
        std::snprintf(buf, sizeof(buf),
                      "  <text x=\"%.1f\" y=\"%.1f\" font-size=\"10\" text-anchor=\"middle\">%.0f</text>\n",
                      px, oy + ph + 14.0, tv);
        s += buf;
    }
    s += "  <text x=\"12\" y=\"" + csv::format_fixed(oy + ph / 2.0, 0) +
         "\" font-size=\"11\" transform=\"rotate(-90 12 " + csv::format_fixed(oy + ph / 2.0, 0) +
         ")\">PAEE [W/kg]</text>\n";
    std::snprintf(buf, sizeof(buf),
                  "  <text x=\"%.1f\" y=\"%.1f\" font-size=\"11\" text-anchor=\"middle\">time [s]</text>\n",
                  ox + pw / 2.0, oy + ph + 30.0);
    s += buf;

    // activity boundaries
    for (const auto& [bt, label] : boundaries) {
        if (bt < t0 || bt > t1) continue;
        const double px = ox + (bt - t0) / (t1 - t0) * pw;
        std::snprintf(buf, sizeof(buf),
                      "  <line x1=\"%.1f\" y1=\"%.1f\" x2=\"%.1f\" y2=\"%.1f\" stroke=\"#999\" "
                      "stroke-dasharray=\"2,3\"/>\n",
                      px, oy, px, oy + ph);
        s += buf;
        std::snprintf(buf, sizeof(buf),
                      "  <text x=\"%.1f\" y=\"%.1f\" font-size=\"8\" fill=\"#555\" "
                      "transform=\"rotate(-65 %.1f %.1f)\">%s</text>\n",
                      px + 2.0, oy + 10.0, px + 2.0, oy + 10.0, label.c_str());
        s += buf;
    }

    s += detail::polyline(d.t, d.truth, t0, t1, v0, v1, pw, ph, ox, oy, "#1f77b4", "");
    s += detail::polyline(d.t, d.pred, t0, t1, v0, v1, pw, ph, ox, oy, "#d62728", "5,3");

    // legend
    std::snprintf(buf, sizeof(buf),
                  "  <line x1=\"%.1f\" y1=\"16\" x2=\"%.1f\" y2=\"16\" stroke=\"#1f77b4\" "
                  "stroke-width=\"2\"/>\n  <text x=\"%.1f\" y=\"20\" font-size=\"11\">ground truth</text>\n",
                  width - 320.0, width - 290.0, width - 284.0);
    s += buf;
    std::snprintf(buf, sizeof(buf),
                  "  <line x1=\"%.1f\" y1=\"16\" x2=\"%.1f\" y2=\"16\" stroke=\"#d62728\" "
                  "stroke-width=\"2\" stroke-dasharray=\"5,3\"/>\n  <text x=\"%.1f\" y=\"20\" "
                  "font-size=\"11\">prediction</text>\n",
                  width - 180.0, width - 150.0, width - 144.0);
    s += buf;
    s += "</svg>\n";
    return s;
}

/// Mean (SD) table over folds for each grid cell, one row per
/// (composition, model), NRMSE and R-squared columns.
inline std::string summary_table(const std::vector<evaluation::ResultRow>& rows) {
    struct Acc {
        std::vector<double> nrmse, r2;
    };
    std::map<std::pair<std::string, std::string>, Acc> cells;
    for (const auto& r : rows) {
        cells[{r.composition, r.model}].nrmse.push_back(r.nrmse);
        cells[{r.composition, r.model}].r2.push_back(r.r2);
    }
    auto mean_sd = [](const std::vector<double>& v) {
        double mu = 0.0;
        for (double x : v) mu += x;
        mu /= static_cast<double>(v.size());
        double ss = 0.0;
        for (double x : v) ss += (x - mu) * (x - mu);
        const double sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
        char buf[48];
        std::snprintf(buf, sizeof(buf), "%.2f (%.2f)", mu, sd);
        return std::string(buf);
    };

    std::string out;
    out += "Accelerometer Composition | Model    | NRMSE Mean (SD) | R2 Mean (SD)\n";
    out += "--------------------------+----------+-----------------+-------------\n";
    char buf[160];
    for (const char* comp : {"pelvis-acc", "3-acc", "r-wrist-acc", "l-wrist-acc"})
        for (const char* model : {"LR", "CNN-LSTM"}) {
            const auto it = cells.find({comp, model});
            if (it == cells.end()) continue;
            std::snprintf(buf, sizeof(buf), "%-25s | %-8s | %-15s | %s\n", comp, model,
                          mean_sd(it->second.nrmse).c_str(), mean_sd(it->second.r2).c_str());
            out += buf;
        }
    return out;
}

} // namespace paee::report
