#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "paee/data.hpp"
#include "paee/dsp.hpp"
#include "paee/energetics.hpp"
#include "paee/error.hpp"

namespace paee::pipeline {

using data::Dataset;
using data::SensorLocation;
using data::SubjectRecord;
using data::UniformTriaxial;
using energetics::PaeeSeries;

struct PreprocessConfig {
    int butter_order = 4;
    double butter_fc_hz = 6.0;
    int sg_window = 21;  // 20-second smoothing at 1 Hz needs an odd point count
    int sg_polyorder = 1;
    double rmr_discard_s = 300.0;
};

/// One subject after the full preprocessing chain: gravity-free, lowpassed,
/// 1 Hz acceleration per location plus the aligned PAEE ground truth.
struct PreprocessedSubject {
    std::string id;
    double mass_kg = 0.0;
    std::map<SensorLocation, UniformTriaxial> acc;
    PaeeSeries paee;
    std::vector<std::pair<double, std::string>> activity_starts;  // (t_s, label)
};

struct PreprocessedDataset {
    std::vector<PreprocessedSubject> subjects;
};

/// Acceleration chain: gravity removal, 4th-order 6 Hz Butterworth
/// (zero-phase), then 1 Hz bin-mean resampling.
inline UniformTriaxial preprocess_acc(const data::RawTriaxialSeries& raw,
                                      const PreprocessConfig& cfg = {}) {
    const data::RawTriaxialSeries nog = dsp::remove_gravity(raw);
    const double fs = nog.nominal_rate();
    const dsp::IirCoefficients lp = dsp::design_butterworth_lowpass(cfg.butter_order, cfg.butter_fc_hz, fs);
    data::RawTriaxialSeries filtered;
    filtered.t = nog.t;
    filtered.ax = dsp::filtfilt(lp, nog.ax);
    filtered.ay = dsp::filtfilt(lp, nog.ay);
    filtered.az = dsp::filtfilt(lp, nog.az);
    return dsp::resample_bin_mean(filtered);
}

/// Gas chain: 1 Hz interpolation, Savitzky-Golay smoothing, RMR subtraction
/// through the Weir conversion, mass normalization.
inline PreprocessedSubject preprocess_subject(const SubjectRecord& rec,
                                              const PreprocessConfig& cfg = {}) {
    PreprocessedSubject out;
    out.id = rec.meta.id;
    out.mass_kg = rec.meta.mass_kg;

    const energetics::RmrEstimate rmr = energetics::estimate_rmr(rec.rest, cfg.rmr_discard_s);
    const dsp::InterpolatedBreaths gas = dsp::interp_to_1hz(rec.adl);
    const data::UniformSeries vo2s = dsp::savgol_smooth(gas.vo2, cfg.sg_window, cfg.sg_polyorder);
    const data::UniformSeries vco2s = dsp::savgol_smooth(gas.vco2, cfg.sg_window, cfg.sg_polyorder);
    PaeeSeries paee = energetics::derive_paee(vo2s, vco2s, rmr, rec.meta.mass_kg);

    std::vector<UniformTriaxial> acc1hz;
    std::vector<data::Span> spans;
    for (SensorLocation loc : data::kAllLocations) {
        acc1hz.push_back(preprocess_acc(rec.acc.at(loc), cfg));
        spans.push_back({acc1hz.back().start, acc1hz.back().size()});
    }
    spans.push_back({paee.series.start, paee.series.size()});
    const data::Span common = data::overlap_span(spans);

    for (std::size_t i = 0; i < acc1hz.size(); ++i)
        out.acc[data::kAllLocations[i]] = data::crop_to(acc1hz[i], common);
    out.paee.series = data::crop_to(paee.series, common);

    // activity boundaries from the 1 Hz label stream, restricted to the span
    const long long label0 = static_cast<long long>(std::llround(gas.vo2.start));
    std::string last;
    for (std::size_t k = 0; k < gas.labels.size(); ++k) {
        const double tk = static_cast<double>(label0 + static_cast<long long>(k));
        if (tk < common.start || tk >= common.end()) continue;
        if (gas.labels[k] != last) {
            out.activity_starts.emplace_back(tk, gas.labels[k]);
            last = gas.labels[k];
        }
    }
    return out;
}

inline PreprocessedDataset preprocess(const Dataset& ds, const PreprocessConfig& cfg = {}) {
    PreprocessedDataset out;
    out.subjects.reserve(ds.subjects.size());
    for (const auto& rec : ds.subjects) out.subjects.push_back(preprocess_subject(rec, cfg));
    return out;
}

} // namespace paee::pipeline
