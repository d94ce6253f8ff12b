#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "paee/data.hpp"
#include "paee/energetics.hpp"
#include "paee/error.hpp"

namespace paee::features {

using data::SensorLocation;
using data::UniformTriaxial;

/// One sensor's 3 x T slice at 1 Hz, channel-major.
struct TriaxialWindow {
    std::size_t length = 0;
    const double* x = nullptr;
    const double* y = nullptr;
    const double* z = nullptr;
};

/// Sum of integrated absolute acceleration over the window, all three axes.
/// At 1 Hz the plain sample sum equals the rectangle-rule integral.
inline double iaa_tot(const TriaxialWindow& w) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.length; ++i) s += std::abs(w.x[i]);
    for (std::size_t i = 0; i < w.length; ++i) s += std::abs(w.y[i]);
    for (std::size_t i = 0; i < w.length; ++i) s += std::abs(w.z[i]);
    return s;
}

/// Named sensor composition; sensor order fixes channel concatenation order.
struct CompositionSpec {
    std::string name;
    std::vector<SensorLocation> sensors;
};

inline CompositionSpec composition_pelvis() { return {"pelvis-acc", {SensorLocation::Pelvis}}; }
inline CompositionSpec composition_3acc() {
    return {"3-acc", {SensorLocation::Pelvis, SensorLocation::LeftThigh, SensorLocation::RightThigh}};
}
inline CompositionSpec composition_lwrist() { return {"l-wrist-acc", {SensorLocation::LeftWrist}}; }
inline CompositionSpec composition_rwrist() { return {"r-wrist-acc", {SensorLocation::RightWrist}}; }

inline std::vector<CompositionSpec> all_compositions() {
    return {composition_pelvis(), composition_3acc(), composition_lwrist(), composition_rwrist()};
}

inline CompositionSpec composition_by_name(const std::string& name) {
    for (auto& c : all_compositions())
        if (c.name == name) return c;
    throw Error(errc::config_invalid, "unknown composition: " + name);
}

/// One training sample: channels x W tensor (3 per sensor, concatenated in
/// composition order), per-sensor IAA_tot, and the PAEE value one second
/// past the window end.
struct SupervisedWindow {
    std::vector<double> tensor;  // [channels][W], row-major
    std::size_t channels = 0;
    std::size_t width = 0;
    std::vector<double> iaa;     // one per sensor
    double target = 0.0;         // W/kg
    double target_time = 0.0;    // seconds
    std::string subject;

    double at(std::size_t ch, std::size_t i) const { return tensor[ch * width + i]; }
};

/// Slides a W-sample window with 1-sample steps over the aligned 1 Hz data;
/// window k covers [k, k+W) and is paired with paee[k + W + horizon - 1].
inline std::vector<SupervisedWindow> build_supervised_windows(
    const std::map<SensorLocation, UniformTriaxial>& acc, const energetics::PaeeSeries& paee,
    const CompositionSpec& comp, std::size_t window = 30, std::size_t horizon = 1,
    const std::string& subject_id = {}) {
    std::vector<const UniformTriaxial*> sensors;
    for (SensorLocation loc : comp.sensors) {
        const auto it = acc.find(loc);
        if (it == acc.end())
            throw Error(errc::missing_sensor,
                        std::string("composition needs sensor ") + data::location_token(loc));
        sensors.push_back(&it->second);
    }

    const std::size_t n = paee.series.size();
    for (const auto* s : sensors)
        if (s->size() != n || s->start != paee.series.start)
            throw Error(errc::length_mismatch, "acceleration and PAEE series are not aligned");
    if (n < window + horizon)
        throw Error(errc::series_too_short, "need at least window + horizon samples");

    const std::size_t count = n - window - horizon + 1;
    const std::size_t channels = 3 * sensors.size();
    std::vector<SupervisedWindow> out(count);
    for (std::size_t k = 0; k < count; ++k) {
        SupervisedWindow& w = out[k];
        w.channels = channels;
        w.width = window;
        w.tensor.resize(channels * window);
        w.iaa.resize(sensors.size());
        for (std::size_t s = 0; s < sensors.size(); ++s) {
            const UniformTriaxial& tri = *sensors[s];
            double* dst = w.tensor.data() + 3 * s * window;
            for (std::size_t i = 0; i < window; ++i) dst[i] = tri.x[k + i];
            for (std::size_t i = 0; i < window; ++i) dst[window + i] = tri.y[k + i];
            for (std::size_t i = 0; i < window; ++i) dst[2 * window + i] = tri.z[k + i];
            TriaxialWindow tw{window, dst, dst + window, dst + 2 * window};
            w.iaa[s] = iaa_tot(tw);
        }
        w.target = paee.series.values[k + window + horizon - 1];
        w.target_time = paee.series.time_at(k + window + horizon - 1);
        w.subject = subject_id;
    }
    return out;
}

} // namespace paee::features
