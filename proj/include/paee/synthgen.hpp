#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "paee/csv.hpp"
#include "paee/data.hpp"
#include "paee/energetics.hpp"
#include "paee/error.hpp"
#include "paee/rng.hpp"

namespace paee::synthgen {

using data::BreathSeries;
using data::RawTriaxialSeries;
using data::SensorLocation;
using data::SubjectMeta;
using data::UniformSeries;

/// One protocol activity. com_gain couples pelvis/thigh motion to the PAEE
/// plateau; wrist_gain is an independent envelope, deliberately decoupled
/// from energy expenditure. Gains are raw oscillation amplitudes at the
/// sensor; see default_protocol for how they relate to 1 Hz feature levels.
struct ActivityProfile {
    std::string name;
    double duration_min_s = 0.0;
    double duration_max_s = 0.0;  // == min for fixed-duration activities
    double paee_level = 0.0;      // W/kg plateau
    double com_gain = 0.0;        // m/s^2 per W/kg at pelvis and thighs
    double wrist_gain = 0.0;      // m/s^2 envelope at the wrists
    double cadence_hz = 1.0;
    int bouts = 1;                // > 1 inserts short pauses (stair climbs)
};

struct GeneratorConfig {
    std::size_t n_subjects = 9;
    std::uint64_t seed = 42;
    double acc_rate_hz = 30.0;
    double breath_interval_s = 3.0;
    double breath_jitter = 0.25;          // fractional interval jitter
    double rer = 0.85;
    double rer_jitter = 0.02;             // per-breath RER spread
    double rmr_vo2_per_kg = 3.5;          // mL/kg/min resting oxygen uptake
    double acc_noise_sd = 0.05;           // m/s^2 white noise per axis
    double gas_noise_sd = 12.0;           // mL/min per breath
    double talking_artifact_rate = 1.0;   // spike events per minute (ADL only)
    double transition_tau_s = 30.0;       // PAEE first-order time constant
    double subject_variability = 1.0;     // scales every per-subject jitter
    double wrist_gain_scale = 1.0;        // global multiplier on wrist envelopes
};

inline void validate(const GeneratorConfig& cfg) {
    if (cfg.n_subjects < 2) throw Error(errc::config_invalid, "need at least 2 subjects");
    if (cfg.acc_noise_sd < 0.0 || cfg.gas_noise_sd < 0.0 || cfg.talking_artifact_rate < 0.0 ||
        cfg.breath_jitter < 0.0 || cfg.subject_variability < 0.0 || cfg.wrist_gain_scale < 0.0)
        throw Error(errc::config_invalid, "noise magnitudes must be >= 0");
    if (cfg.rer < 0.7 || cfg.rer > 1.0) throw Error(errc::config_invalid, "RER must lie in [0.7, 1.0]");
    if (cfg.breath_interval_s <= 0.3) throw Error(errc::config_invalid, "breath interval too small");
    if (cfg.transition_tau_s <= 0.0) throw Error(errc::config_invalid, "transition tau must be positive");
    if (cfg.acc_rate_hz < 10.0) throw Error(errc::config_invalid, "accelerometer rate too low");
}

/// Mean attenuation a unit tone at f_hz suffers when a 1-second bin mean is
/// taken from fs-rate samples: |sin(pi f)| / (N sin(pi f / fs)).
inline double tone_bin_mean_gain(double f_hz, double fs = 30.0) {
    const double num = std::abs(std::sin(3.14159265358979323846 * f_hz));
    const double den = fs * std::abs(std::sin(3.14159265358979323846 * f_hz / fs));
    return den > 1e-12 ? num / den : 1.0;
}

/// Fraction of a tone surviving zero-phase gravity removal (order-2
/// Butterworth estimate at 0.25 Hz).
inline double gravity_keep_fraction(double f_hz) {
    const double r = std::pow(f_hz / 0.25, 4.0);
    return r / (1.0 + r);
}

/// The Table-style protocol: 11 activities, fixed durations where the study
/// fixed them, [120, 300] s ranges elsewhere. Gains are pre-divided by the
/// tone attenuation so the 1 Hz pipeline sees a uniform PAEE coupling at the
/// COM and the intended decoupled envelope at the wrists; the laptop/cycling
/// pair intentionally inverts wrist intensity against energy expenditure.
inline std::vector<ActivityProfile> default_protocol() {
    struct Row {
        const char* name;
        double dmin, dmax, paee, wrist_level, cadence;
        int bouts;
    };
    // wrist_level is the effective 1 Hz envelope target, decoupled from paee
    static const Row rows[] = {
        {"Sitting resting", 300, 300, 0.25, 0.18, 0.45, 1},
        {"Sitting reading", 300, 300, 0.30, 0.30, 0.42, 1},
        {"Standing still", 180, 180, 0.50, 0.16, 0.38, 1},
        {"Working on a laptop", 120, 300, 0.60, 0.55, 2.45, 1},
        {"Emptying dishwasher", 120, 300, 1.40, 0.45, 0.62, 1},
        {"Mopping", 120, 300, 2.20, 0.50, 0.55, 1},
        {"Stacking shelves with books", 120, 300, 1.50, 0.42, 0.65, 1},
        {"Climbing stairs (5 times)", 120, 300, 4.80, 0.35, 1.62, 5},
        {"Treadmill (3 km/h)", 300, 300, 3.00, 0.33, 1.38, 1},
        {"Treadmill (5 km/h)", 300, 300, 4.20, 0.42, 2.35, 1},
        {"Cycle at 125 Watt", 300, 300, 4.50, 0.10, 1.45, 1},
    };
    constexpr double kComSlope = 0.5;  // effective m/s^2 per W/kg after resampling
    std::vector<ActivityProfile> out;
    for (const Row& r : rows) {
        ActivityProfile p;
        p.name = r.name;
        p.duration_min_s = r.dmin;
        p.duration_max_s = r.dmax;
        p.paee_level = r.paee;
        const double divisor = tone_bin_mean_gain(r.cadence) * gravity_keep_fraction(r.cadence);
        p.com_gain = kComSlope / divisor;
        p.wrist_gain = r.wrist_level / divisor;
        p.cadence_hz = r.cadence;
        p.bouts = r.bouts;
        out.push_back(std::move(p));
    }
    return out;
}

/// Everything generated for one participant, pre-serialization.
struct SyntheticSubject {
    SubjectMeta meta;
    std::map<SensorLocation, RawTriaxialSeries> acc;
    BreathSeries rest;
    BreathSeries adl;
    UniformSeries truth_paee;            // 1 Hz sidecar, W/kg
    std::vector<std::string> activity_order;
    std::size_t clamped_gas_samples = 0;
};

namespace detail {

inline constexpr double kRestStart = 1.0;
inline constexpr double kRestDuration = 1860.0;
inline constexpr double kAdlStart = 1900.0;
inline constexpr double kPauseSeconds = 8.0;
inline constexpr double kPaeePauseLevel = 0.8;
inline constexpr double kWristTau = 10.0;

struct ScheduleEntry {
    std::size_t activity;   // index into the protocol
    double start_s;         // relative to ADL start
    double duration_s;
    double paee_level;      // jittered plateau for this subject
    double wrist_left;      // effective raw envelope, this subject, left wrist
    double wrist_right;
    double cadence_hz;      // whole-body movement rate
    double wrist_cadence_hz;  // arm movement rate, loosely coupled to the body
};

/// Interpolates a 1 Hz trace at an arbitrary time (clamped at the ends).
inline double trace_at(const std::vector<double>& trace, double t_rel) {
    if (trace.empty()) return 0.0;
    if (t_rel <= 0.0) return trace.front();
    const double last = static_cast<double>(trace.size() - 1);
    if (t_rel >= last) return trace.back();
    const std::size_t k = static_cast<std::size_t>(t_rel);
    const double w = t_rel - static_cast<double>(k);
    return trace[k] + w * (trace[k + 1] - trace[k]);
}

} // namespace detail

/// Deterministically generates one participant: 30-minute supine rest, a
/// seeded shuffle of the protocol activities, gas flows inverted through the
/// Weir relation around the subject's RMR, and five 30 Hz accelerometer
/// streams whose COM envelopes track PAEE while the wrists follow their own
/// activity-specific intensities.
inline SyntheticSubject generate_subject(const GeneratorConfig& cfg, std::size_t subject_index) {
    validate(cfg);
    const std::vector<ActivityProfile> protocol = default_protocol();
    Rng rng(mix_seed(cfg.seed, subject_index));
    const double vary = cfg.subject_variability;

    SyntheticSubject out;

    // --- metadata ---------------------------------------------------------
    char idbuf[8];
    std::snprintf(idbuf, sizeof(idbuf), "S%02zu", subject_index + 1);
    out.meta.id = idbuf;
    out.meta.sex = rng.uniform() < 0.3 ? data::Sex::F : data::Sex::M;
    out.meta.age = static_cast<int>(rng.uniform_int(20, 58));
    const double height = out.meta.sex == data::Sex::F ? rng.normal(165.0, 6.0) : rng.normal(178.0, 7.0);
    out.meta.height_cm = std::round(std::clamp(height, 150.0, 200.0) * 10.0) / 10.0;
    const double bmi = rng.uniform(19.0, 29.0);
    const double h_m = out.meta.height_cm / 100.0;
    out.meta.mass_kg = std::round(bmi * h_m * h_m * 10.0) / 10.0;

    const double rmr_vo2 = (cfg.rmr_vo2_per_kg + vary * rng.normal(0.0, 0.15)) * out.meta.mass_kg;
    const double rer_subject = std::clamp(cfg.rer + vary * rng.normal(0.0, 0.01), 0.7, 1.0);
    const double rmr_vco2 = rer_subject * rmr_vo2;
    const double rmr_watts = energetics::weir_power(rmr_vo2, rmr_vco2);

    // --- activity schedule -------------------------------------------------
    std::vector<std::size_t> order(protocol.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    std::vector<detail::ScheduleEntry> schedule;
    double cursor = 0.0;
    for (std::size_t idx : order) {
        const ActivityProfile& p = protocol[idx];
        detail::ScheduleEntry e;
        e.activity = idx;
        e.start_s = cursor;
        e.duration_s = p.duration_min_s == p.duration_max_s
                           ? p.duration_min_s
                           : std::floor(rng.uniform(p.duration_min_s, p.duration_max_s + 1.0));
        e.paee_level = std::max(0.05, p.paee_level * (1.0 + vary * rng.normal(0.0, 0.07)));
        // wrist intensity is strongly idiosyncratic: how much someone moves
        // their arms while mopping or typing says little about energy cost
        const double wrist_base =
            cfg.wrist_gain_scale * p.wrist_gain * std::exp(vary * rng.normal(0.0, 0.5));
        e.wrist_left = std::max(0.0, wrist_base * (1.0 + vary * rng.normal(0.0, 0.06)));
        e.wrist_right = std::max(0.0, wrist_base * (1.0 + vary * rng.normal(0.0, 0.06)));
        e.cadence_hz = p.cadence_hz * (1.0 + vary * rng.normal(0.0, 0.03));
        e.wrist_cadence_hz = p.cadence_hz * (1.0 + vary * rng.normal(0.0, 0.15));
        cursor += e.duration_s;
        out.activity_order.push_back(p.name);
        schedule.push_back(std::move(e));
    }
    const double session_s = cursor;
    const std::size_t session_n = static_cast<std::size_t>(session_s);

    // --- per-second target levels and relaxed traces ------------------------
    std::vector<double> paee_target(session_n, 0.0), wrist_target_l(session_n, 0.0),
        wrist_target_r(session_n, 0.0), cadence(session_n, 1.0), wrist_cadence(session_n, 1.0);
    std::vector<std::size_t> activity_at(session_n, 0);
    for (const auto& e : schedule) {
        const ActivityProfile& p = protocol[e.activity];
        const auto k0 = static_cast<std::size_t>(e.start_s);
        const auto k1 = std::min(session_n, static_cast<std::size_t>(e.start_s + e.duration_s));
        for (std::size_t k = k0; k < k1; ++k) {
            double gate = 1.0;
            if (p.bouts > 1) {
                // bouts separated by short pauses; pauses drop to a light level
                const double span = e.duration_s / static_cast<double>(p.bouts);
                const double into = std::fmod(static_cast<double>(k - k0), span);
                if (span - into <= detail::kPauseSeconds && k1 - k0 > 2 * detail::kPauseSeconds)
                    gate = 0.0;
            }
            paee_target[k] = gate > 0.5 ? e.paee_level
                                        : std::min(e.paee_level, detail::kPaeePauseLevel);
            wrist_target_l[k] = (gate > 0.5 ? 1.0 : 0.35) * e.wrist_left;
            wrist_target_r[k] = (gate > 0.5 ? 1.0 : 0.35) * e.wrist_right;
            cadence[k] = e.cadence_hz;
            wrist_cadence[k] = e.wrist_cadence_hz;
            activity_at[k] = e.activity;
        }
    }

    std::vector<double> paee_trace(session_n), wrist_env_l(session_n), wrist_env_r(session_n);
    const double relax = std::exp(-1.0 / cfg.transition_tau_s);
    const double relax_w = std::exp(-1.0 / detail::kWristTau);
    double pv = 0.1, wl = 0.0, wr = 0.0;
    for (std::size_t k = 0; k < session_n; ++k) {
        pv = paee_target[k] + (pv - paee_target[k]) * relax;
        wl = wrist_target_l[k] + (wl - wrist_target_l[k]) * relax_w;
        wr = wrist_target_r[k] + (wr - wrist_target_r[k]) * relax_w;
        paee_trace[k] = pv;
        wrist_env_l[k] = wl;
        wrist_env_r[k] = wr;
    }

    out.truth_paee.start = detail::kAdlStart;
    out.truth_paee.rate = 1.0;
    out.truth_paee.values = paee_trace;

    // --- rest breath series -------------------------------------------------
    auto clamp_gas = [&out](double v) {
        if (v < 0.0) {
            ++out.clamped_gas_samples;
            return 0.0;
        }
        return v;
    };
    double t = detail::kRestStart;
    while (t < detail::kRestStart + detail::kRestDuration + cfg.breath_interval_s) {
        const double onset = 1.0 + 0.5 * std::exp(-(t - detail::kRestStart) / 90.0);
        const double rer_b = std::clamp(rer_subject + cfg.rer_jitter * rng.normal(), 0.7, 1.0);
        const double vo2 = clamp_gas(rmr_vo2 * onset + cfg.gas_noise_sd * rng.normal());
        const double vco2 = clamp_gas(rer_b * rmr_vo2 * onset + cfg.gas_noise_sd * rng.normal());
        out.rest.t.push_back(t);
        out.rest.vo2.push_back(vo2);
        out.rest.vco2.push_back(vco2);
        out.rest.label.emplace_back("rest");
        t += cfg.breath_interval_s * (1.0 + rng.uniform(-cfg.breath_jitter, cfg.breath_jitter));
    }

    // --- ADL breath series --------------------------------------------------
    t = detail::kAdlStart + 0.5;
    const double spike_prob_per_s = cfg.talking_artifact_rate / 60.0;
    double prev_t = t - cfg.breath_interval_s;
    while (t < detail::kAdlStart + session_s - 0.5) {
        const double paee_here = detail::trace_at(paee_trace, t - detail::kAdlStart);
        const double watts = paee_here * out.meta.mass_kg + rmr_watts;
        const double rer_b = std::clamp(rer_subject + cfg.rer_jitter * rng.normal(), 0.7, 1.0);
        // invert Weir at this breath's RER
        const double vo2_l_min =
            (watts / energetics::kWattPerKcalMin) / (energetics::kWeirVo2 + energetics::kWeirVco2 * rer_b);
        double vo2 = vo2_l_min * 1000.0;
        double vco2 = rer_b * vo2;
        if (rng.uniform() < spike_prob_per_s * (t - prev_t)) {
            const double amp = rng.uniform(150.0, 400.0);
            vo2 += amp;
            vco2 += amp * rer_b;
        }
        vo2 = clamp_gas(vo2 + cfg.gas_noise_sd * rng.normal());
        vco2 = clamp_gas(vco2 + cfg.gas_noise_sd * rng.normal());
        const std::size_t k = std::min(session_n - 1, static_cast<std::size_t>(t - detail::kAdlStart));
        out.adl.t.push_back(t);
        out.adl.vo2.push_back(vo2);
        out.adl.vco2.push_back(vco2);
        out.adl.label.push_back(protocol[activity_at[k]].name);
        prev_t = t;
        t += cfg.breath_interval_s * (1.0 + rng.uniform(-cfg.breath_jitter, cfg.breath_jitter));
    }

    // --- accelerometers -----------------------------------------------------
    const double dt = 1.0 / cfg.acc_rate_hz;
    const std::size_t n_samples = static_cast<std::size_t>(session_s * cfg.acc_rate_hz);
    for (SensorLocation loc : data::kAllLocations) {
        const bool is_wrist =
            loc == SensorLocation::LeftWrist || loc == SensorLocation::RightWrist;
        const bool is_left_wrist = loc == SensorLocation::LeftWrist;
        // sensor mounting: gravity direction with a small fixed tilt
        const double tilt = rng.uniform(0.0, 0.26);
        const double tilt_dir = rng.uniform(0.0, 6.28318530717958648);
        const double gx = 9.81 * std::sin(tilt) * std::cos(tilt_dir);
        const double gy = 9.81 * std::sin(tilt) * std::sin(tilt_dir);
        const double gz = 9.81 * std::cos(tilt);
        // oscillation direction, fixed per sensor
        double dx = rng.normal(), dy = rng.normal(), dz = rng.normal();
        const double dn = std::max(1e-9, std::sqrt(dx * dx + dy * dy + dz * dz));
        dx /= dn;
        dy /= dn;
        dz /= dn;
        // per-sensor coupling spread: single-sensor estimates inherit it in
        // full, multi-sensor compositions average it down
        const double com_mult = 1.0 + vary * rng.normal(0.0, 0.12);
        double phase = rng.uniform(0.0, 6.28318530717958648);

        RawTriaxialSeries acc;
        acc.t.resize(n_samples);
        acc.ax.resize(n_samples);
        acc.ay.resize(n_samples);
        acc.az.resize(n_samples);
        double stride_gain = 1.0;
        for (std::size_t i = 0; i < n_samples; ++i) {
            const double trel = static_cast<double>(i) * dt;
            const std::size_t k = std::min(session_n - 1, static_cast<std::size_t>(trel));
            phase += 6.28318530717958648 * (is_wrist ? wrist_cadence[k] : cadence[k]) * dt;
            if (i % 30 == 0)  // refresh stride-to-stride amplitude once a second
                stride_gain = 1.0 + vary * 0.2 * rng.normal();
            double env;
            if (is_wrist) {
                env = detail::trace_at(is_left_wrist ? wrist_env_l : wrist_env_r, trel);
            } else {
                const double g = protocol[activity_at[k]].com_gain;
                env = g * com_mult * detail::trace_at(paee_trace, trel);
            }
            const double osc = env * stride_gain * std::sin(phase);
            acc.t[i] = detail::kAdlStart + trel;
            acc.ax[i] = gx + dx * osc + cfg.acc_noise_sd * rng.normal();
            acc.ay[i] = gy + dy * osc + cfg.acc_noise_sd * rng.normal();
            acc.az[i] = gz + dz * osc + cfg.acc_noise_sd * rng.normal();
        }
        out.acc[loc] = std::move(acc);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline constexpr const char* kTruthHeader = "t_s,paee_wkg";

inline std::string serialize_truth_csv(const UniformSeries& s) {
    std::string out(kTruthHeader);
    out += '\n';
    for (std::size_t k = 0; k < s.size(); ++k) {
        csv::append_fixed(out, s.time_at(k), 1);
        out += ',';
        csv::append_fixed(out, s.values[k]);
        out += '\n';
    }
    return out;
}

inline UniformSeries parse_truth_csv(std::string_view text) {
    const auto lines = csv::split_lines(text);
    if (lines.empty() || lines[0] != kTruthHeader)
        throw Error(errc::malformed_row, "expected truth header");
    UniformSeries s;
    s.rate = 1.0;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = csv::split_fields(lines[i]);
        if (f.size() != 2)
            throw Error(errc::malformed_row, "expected 2 fields at line " + std::to_string(i + 1));
        const double t = csv::parse_double(f[0], i + 1);
        if (i == 1) s.start = t;
        s.values.push_back(csv::parse_double(f[1], i + 1));
    }
    return s;
}

inline std::string manifest_text(const GeneratorConfig& cfg) {
    std::string m = "paee-synthgen v1\n";
    m += "seed = " + std::to_string(cfg.seed) + "\n";
    m += "n_subjects = " + std::to_string(cfg.n_subjects) + "\n";
    m += "acc_rate_hz = " + csv::format_fixed(cfg.acc_rate_hz, 3) + "\n";
    m += "breath_interval_s = " + csv::format_fixed(cfg.breath_interval_s, 3) + "\n";
    m += "breath_jitter = " + csv::format_fixed(cfg.breath_jitter, 3) + "\n";
    m += "rer = " + csv::format_fixed(cfg.rer, 3) + "\n";
    m += "rer_jitter = " + csv::format_fixed(cfg.rer_jitter, 3) + "\n";
    m += "rmr_vo2_per_kg = " + csv::format_fixed(cfg.rmr_vo2_per_kg, 3) + "\n";
    m += "acc_noise_sd = " + csv::format_fixed(cfg.acc_noise_sd, 4) + "\n";
    m += "gas_noise_sd = " + csv::format_fixed(cfg.gas_noise_sd, 3) + "\n";
    m += "talking_artifact_rate = " + csv::format_fixed(cfg.talking_artifact_rate, 3) + "\n";
    m += "transition_tau_s = " + csv::format_fixed(cfg.transition_tau_s, 3) + "\n";
    m += "subject_variability = " + csv::format_fixed(cfg.subject_variability, 3) + "\n";
    m += "wrist_gain_scale = " + csv::format_fixed(cfg.wrist_gain_scale, 3) + "\n";
    m += "note = wrist envelopes are decoupled from PAEE by construction; "
         "this encodes a modeling assumption, not a measured fact\n";
    return m;
}

struct GenerateSummary {
    std::size_t subjects = 0;
    std::size_t clamped_gas_samples = 0;  // noise draws pulled up to zero flow
};

/// Writes the full dataset tree: one directory per subject in the standard
/// layout plus the per-subject truth sidecar and a top-level manifest.
inline GenerateSummary generate_dataset(const GeneratorConfig& cfg, const std::string& out_dir) {
    validate(cfg);
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw Error(errc::io_error, "cannot create " + out_dir + ": " + ec.message());

    GenerateSummary summary;
    for (std::size_t i = 0; i < cfg.n_subjects; ++i) {
        const SyntheticSubject s = generate_subject(cfg, i);
        const std::string dir = out_dir + "/" + s.meta.id;
        fs::create_directories(dir, ec);
        if (ec) throw Error(errc::io_error, "cannot create " + dir + ": " + ec.message());
        csv::write_file(dir + "/meta.csv", data::serialize_meta_csv(s.meta));
        for (const auto& [loc, series] : s.acc)
            csv::write_file(dir + "/acc_" + data::location_token(loc) + ".csv",
                            data::serialize_acc_csv(series));
        csv::write_file(dir + "/rest.csv", data::serialize_breath_csv(s.rest));
        csv::write_file(dir + "/adl.csv", data::serialize_breath_csv(s.adl));
        csv::write_file(dir + "/truth_paee.csv", serialize_truth_csv(s.truth_paee));
        summary.subjects += 1;
        summary.clamped_gas_samples += s.clamped_gas_samples;
    }
    csv::write_file(out_dir + "/manifest.txt", manifest_text(cfg));
    return summary;
}

} // namespace paee::synthgen
