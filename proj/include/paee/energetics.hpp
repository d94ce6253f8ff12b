#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "paee/data.hpp"
#include "paee/error.hpp"

namespace paee::energetics {

using data::BreathSeries;
using data::UniformSeries;

/// Resting metabolic rate as mean gas flows over the usable rest window.
struct RmrEstimate {
    double vo2 = 0.0;   // mL/min
    double vco2 = 0.0;  // mL/min
};

/// Physical activity energy expenditure, W/kg at 1 Hz. Values may dip below
/// zero when measured flows fall under the resting baseline.
struct PaeeSeries {
    UniformSeries series;  // rate fixed at 1 Hz
};

// Weir equation, no protein correction: kcal/min from L/min gas flows,
// then watts at 4184 J/kcal.
inline constexpr double kWeirVo2 = 3.941;
inline constexpr double kWeirVco2 = 1.106;
inline constexpr double kWattPerKcalMin = 4184.0 / 60.0;

/// Gas flows (mL/min) to metabolic power in watts. Linear, so it commutes
/// with the RMR subtraction in derive_paee.
inline double weir_power(double vo2_ml_min, double vco2_ml_min) {
    const double kcal_min = kWeirVo2 * vo2_ml_min / 1000.0 + kWeirVco2 * vco2_ml_min / 1000.0;
    return kcal_min * kWattPerKcalMin;
}

/// Mean post-transient gas flows of the quiet rest period; the first
/// `discard_s` seconds are dropped to skip the onset transient.
inline RmrEstimate estimate_rmr(const BreathSeries& rest, double discard_s = 300.0) {
    if (rest.size() == 0 || rest.t.back() - rest.t.front() <= discard_s)
        throw Error(errc::rest_too_short, "rest period does not extend past the discard window");
    const double cutoff = rest.t.front() + discard_s;
    double so2 = 0.0, sco2 = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < rest.size(); ++i) {
        if (rest.t[i] < cutoff) continue;
        so2 += rest.vo2[i];
        sco2 += rest.vco2[i];
        ++n;
    }
    if (n == 0) throw Error(errc::rest_too_short, "no breaths after the discard window");
    return {so2 / static_cast<double>(n), sco2 / static_cast<double>(n)};
}

/// PAEE(t) = weir(vo2(t) - rmr.vo2, vco2(t) - rmr.vco2) / mass. Expects the
/// already-smoothed 1 Hz gas series; negative values are kept.
inline PaeeSeries derive_paee(const UniformSeries& adl_vo2, const UniformSeries& adl_vco2,
                              const RmrEstimate& rmr, double mass_kg) {
    if (mass_kg <= 0.0) throw Error(errc::non_positive_mass, "mass must be positive");
    if (adl_vo2.size() != adl_vco2.size() || adl_vo2.start != adl_vco2.start)
        throw Error(errc::length_mismatch, "gas series are not aligned");

    PaeeSeries out;
    out.series.start = adl_vo2.start;
    out.series.rate = 1.0;
    out.series.values.resize(adl_vo2.size());
    for (std::size_t i = 0; i < adl_vo2.size(); ++i)
        out.series.values[i] =
            weir_power(adl_vo2.values[i] - rmr.vo2, adl_vco2.values[i] - rmr.vco2) / mass_kg;
    return out;
}

} // namespace paee::energetics
