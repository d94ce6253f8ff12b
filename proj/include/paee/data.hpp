#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "paee/csv.hpp"
#include "paee/error.hpp"

namespace paee::data {

enum class Sex { F, M };

struct SubjectMeta {
    std::string id;
    Sex sex = Sex::F;
    int age = 0;        // years
    double height_cm = 0.0;
    double mass_kg = 0.0;

    double bmi() const {
        const double h = height_cm / 100.0;
        return mass_kg / (h * h);
    }
};

enum class SensorLocation { Pelvis, LeftThigh, RightThigh, LeftWrist, RightWrist };

inline constexpr SensorLocation kAllLocations[5] = {
    SensorLocation::Pelvis, SensorLocation::LeftThigh, SensorLocation::RightThigh,
    SensorLocation::LeftWrist, SensorLocation::RightWrist};

inline const char* location_token(SensorLocation loc) {
    switch (loc) {
        case SensorLocation::Pelvis: return "pelvis";
        case SensorLocation::LeftThigh: return "left_thigh";
        case SensorLocation::RightThigh: return "right_thigh";
        case SensorLocation::LeftWrist: return "left_wrist";
        case SensorLocation::RightWrist: return "right_wrist";
    }
    return "?";
}

/// Raw 30 Hz triaxial acceleration, timestamps in seconds since session start.
struct RawTriaxialSeries {
    std::vector<double> t;
    std::vector<double> ax, ay, az;

    std::size_t size() const { return t.size(); }
    double duration() const { return t.empty() ? 0.0 : t.back() - t.front(); }
    double nominal_rate() const {
        return t.size() < 2 ? 0.0 : (static_cast<double>(t.size()) - 1.0) / duration();
    }
};

/// Breath-by-breath gas exchange, one row per breath, irregular timing.
struct BreathSeries {
    std::vector<double> t;
    std::vector<double> vo2;   // mL/min
    std::vector<double> vco2;  // mL/min
    std::vector<std::string> label;

    std::size_t size() const { return t.size(); }
    double duration() const { return t.empty() ? 0.0 : t.back() - t.front(); }
};

/// Fixed-rate series; sample k sits at time start + k/rate.
struct UniformSeries {
    double start = 0.0;
    double rate = 1.0;  // Hz
    std::vector<double> values;

    std::size_t size() const { return values.size(); }
    double time_at(std::size_t k) const { return start + static_cast<double>(k) / rate; }
};

struct UniformTriaxial {
    double start = 0.0;
    double rate = 1.0;
    std::vector<double> x, y, z;

    std::size_t size() const { return x.size(); }
    double time_at(std::size_t k) const { return start + static_cast<double>(k) / rate; }
};

struct SubjectRecord {
    SubjectMeta meta;
    std::map<SensorLocation, RawTriaxialSeries> acc;
    BreathSeries rest;
    BreathSeries adl;
};

struct Dataset {
    std::vector<SubjectRecord> subjects;
    std::vector<std::string> warnings;  // non-fatal load findings (BMI, odd rates)
};

// ---------------------------------------------------------------------------
// CSV parsing
// ---------------------------------------------------------------------------

inline constexpr const char* kAccHeader = "t_s,ax,ay,az";
inline constexpr const char* kBreathHeader = "t_s,vo2_ml_min,vco2_ml_min,label";
inline constexpr const char* kMetaHeader = "id,sex,age,height_cm,mass_kg";

inline RawTriaxialSeries parse_acc_csv(std::string_view text) {
    const auto lines = csv::split_lines(text);
    if (lines.empty()) throw Error(errc::empty_file, "empty acceleration file");
    if (lines[0] != kAccHeader)
        throw Error(errc::malformed_row, "expected header '" + std::string(kAccHeader) + "'");
    if (lines.size() < 2) throw Error(errc::empty_file, "acceleration file has no data rows");

    RawTriaxialSeries s;
    s.t.reserve(lines.size() - 1);
    s.ax.reserve(lines.size() - 1);
    s.ay.reserve(lines.size() - 1);
    s.az.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = csv::split_fields(lines[i]);
        if (f.size() != 4)
            throw Error(errc::malformed_row, "expected 4 fields at line " + std::to_string(i + 1));
        const double t = csv::parse_double(f[0], i + 1);
        if (!s.t.empty() && t <= s.t.back())
            throw Error(errc::non_monotone_timestamps,
                        "timestamp not increasing at line " + std::to_string(i + 1));
        s.t.push_back(t);
        s.ax.push_back(csv::parse_double(f[1], i + 1));
        s.ay.push_back(csv::parse_double(f[2], i + 1));
        s.az.push_back(csv::parse_double(f[3], i + 1));
    }
    return s;
}

inline BreathSeries parse_breath_csv(std::string_view text) {
    const auto lines = csv::split_lines(text);
    if (lines.empty()) throw Error(errc::empty_file, "empty breath file");
    if (lines[0] != kBreathHeader)
        throw Error(errc::malformed_row, "expected header '" + std::string(kBreathHeader) + "'");
    if (lines.size() < 2) throw Error(errc::empty_file, "breath file has no data rows");

    BreathSeries s;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = csv::split_fields(lines[i]);
        if (f.size() != 4)
            throw Error(errc::malformed_row, "expected 4 fields at line " + std::to_string(i + 1));
        const double t = csv::parse_double(f[0], i + 1);
        if (!s.t.empty() && t <= s.t.back())
            throw Error(errc::non_monotone_timestamps,
                        "timestamp not increasing at line " + std::to_string(i + 1));
        const double vo2 = csv::parse_double(f[1], i + 1);
        const double vco2 = csv::parse_double(f[2], i + 1);
        if (vo2 < 0.0 || vco2 < 0.0)
            throw Error(errc::negative_gas_flow, "negative gas flow at line " + std::to_string(i + 1));
        s.t.push_back(t);
        s.vo2.push_back(vo2);
        s.vco2.push_back(vco2);
        s.label.emplace_back(f[3]);
    }
    return s;
}

inline SubjectMeta parse_meta_csv(std::string_view text) {
    const auto lines = csv::split_lines(text);
    if (lines.empty()) throw Error(errc::empty_file, "empty meta file");
    if (lines[0] != kMetaHeader)
        throw Error(errc::malformed_row, "expected header '" + std::string(kMetaHeader) + "'");
    if (lines.size() < 2) throw Error(errc::empty_file, "meta file has no data row");
    const auto f = csv::split_fields(lines[1]);
    if (f.size() != 5) throw Error(errc::malformed_row, "expected 5 meta fields");

    SubjectMeta m;
    m.id = std::string(f[0]);
    if (f[1] == "F") m.sex = Sex::F;
    else if (f[1] == "M") m.sex = Sex::M;
    else throw Error(errc::malformed_row, "sex must be F or M");
    m.age = static_cast<int>(csv::parse_double(f[2], 2));
    m.height_cm = csv::parse_double(f[3], 2);
    m.mass_kg = csv::parse_double(f[4], 2);
    if (m.mass_kg <= 0.0 || m.height_cm <= 0.0)
        throw Error(errc::malformed_row, "mass and height must be positive");
    return m;
}

// ---------------------------------------------------------------------------
// CSV serialization (exact inverse of the parsers on generator output)
// ---------------------------------------------------------------------------

inline std::string serialize_acc_csv(const RawTriaxialSeries& s) {
    std::string out(kAccHeader);
    out += '\n';
    out.reserve(out.size() + s.size() * 40);
    for (std::size_t i = 0; i < s.size(); ++i) {
        csv::append_fixed(out, s.t[i]);
        out += ',';
        csv::append_fixed(out, s.ax[i]);
        out += ',';
        csv::append_fixed(out, s.ay[i]);
        out += ',';
        csv::append_fixed(out, s.az[i]);
        out += '\n';
    }
    return out;
}

inline std::string serialize_breath_csv(const BreathSeries& s) {
    std::string out(kBreathHeader);
    out += '\n';
    for (std::size_t i = 0; i < s.size(); ++i) {
        csv::append_fixed(out, s.t[i]);
        out += ',';
        csv::append_fixed(out, s.vo2[i]);
        out += ',';
        csv::append_fixed(out, s.vco2[i]);
        out += ',';
        out += s.label[i];
        out += '\n';
    }
    return out;
}

inline std::string serialize_meta_csv(const SubjectMeta& m) {
    std::string out(kMetaHeader);
    out += '\n';
    out += m.id;
    out += m.sex == Sex::F ? ",F," : ",M,";
    out += std::to_string(m.age);
    out += ',';
    csv::append_fixed(out, m.height_cm, 1);
    out += ',';
    csv::append_fixed(out, m.mass_kg, 1);
    out += '\n';
    return out;
}

// ---------------------------------------------------------------------------
// Dataset loading
// ---------------------------------------------------------------------------

inline constexpr double kMinRestSeconds = 1800.0;

/// Loads `root/<subject>/{meta.csv, acc_<loc>.csv x5, rest.csv, adl.csv}`.
/// Subjects come back sorted by id regardless of directory enumeration order.
inline Dataset load_dataset(const std::string& root) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(root)) throw Error(errc::missing_file, "no such dataset directory: " + root);

    std::vector<std::string> dirs;
    for (const auto& e : fs::directory_iterator(root))
        if (e.is_directory()) dirs.push_back(e.path().filename().string());
    std::sort(dirs.begin(), dirs.end());

    Dataset ds;
    for (const auto& d : dirs) {
        const std::string base = root + "/" + d + "/";
        auto require = [&](const std::string& name) -> std::string {
            if (!fs::is_regular_file(base + name))
                throw Error(errc::missing_file, "missing file: " + base + name);
            return csv::read_file(base + name);
        };

        SubjectRecord rec;
        rec.meta = parse_meta_csv(require("meta.csv"));
        for (SensorLocation loc : kAllLocations) {
            const std::string name = std::string("acc_") + location_token(loc) + ".csv";
            rec.acc[loc] = parse_acc_csv(require(name));
            const double r = rec.acc[loc].nominal_rate();
            if (r < 27.0 || r > 33.0)
                ds.warnings.push_back(rec.meta.id + "/" + name + ": nominal rate " +
                                      csv::format_fixed(r, 2) + " Hz outside 30 Hz +/- 10%");
        }
        rec.rest = parse_breath_csv(require("rest.csv"));
        rec.adl = parse_breath_csv(require("adl.csv"));
        if (rec.rest.duration() < kMinRestSeconds)
            throw Error(errc::short_rest, rec.meta.id + ": rest period " +
                                              csv::format_fixed(rec.rest.duration(), 0) +
                                              " s is shorter than 1800 s");
        if (rec.meta.bmi() >= 40.0)
            ds.warnings.push_back(rec.meta.id + ": BMI " + csv::format_fixed(rec.meta.bmi(), 1) +
                                  " is outside the study inclusion range");
        ds.subjects.push_back(std::move(rec));
    }

    std::sort(ds.subjects.begin(), ds.subjects.end(),
              [](const SubjectRecord& a, const SubjectRecord& b) { return a.meta.id < b.meta.id; });
    for (std::size_t i = 1; i < ds.subjects.size(); ++i)
        if (ds.subjects[i].meta.id == ds.subjects[i - 1].meta.id)
            throw Error(errc::duplicate_subject_id, "duplicate subject id: " + ds.subjects[i].meta.id);
    return ds;
}

// ---------------------------------------------------------------------------
// Time-base synchronization (1 Hz series)
// ---------------------------------------------------------------------------

struct Span {
    double start = 0.0;
    std::size_t length = 0;  // samples at 1 Hz
    double end() const { return start + static_cast<double>(length); }
};

/// Common span of 1 Hz series: latest start, floor of the overlapping width.
inline Span overlap_span(const std::vector<Span>& spans) {
    if (spans.empty()) throw Error(errc::no_overlap, "no series given");
    double start = spans[0].start, end = spans[0].end();
    for (const auto& s : spans) {
        start = std::max(start, s.start);
        end = std::min(end, s.end());
    }
    const double width = end - start;
    if (width <= 0.0) throw Error(errc::no_overlap, "series spans are disjoint");
    Span out;
    out.start = start;
    out.length = static_cast<std::size_t>(std::floor(width + 1e-9));
    if (out.length == 0) throw Error(errc::no_overlap, "overlap narrower than one sample");
    return out;
}

inline UniformSeries crop_to(const UniformSeries& s, const Span& span) {
    const auto off = static_cast<std::size_t>(std::llround(span.start - s.start));
    UniformSeries out;
    out.start = span.start;
    out.rate = s.rate;
    out.values.assign(s.values.begin() + static_cast<std::ptrdiff_t>(off),
                      s.values.begin() + static_cast<std::ptrdiff_t>(off + span.length));
    return out;
}

inline UniformTriaxial crop_to(const UniformTriaxial& s, const Span& span) {
    const auto off = static_cast<std::size_t>(std::llround(span.start - s.start));
    UniformTriaxial out;
    out.start = span.start;
    out.rate = s.rate;
    auto slice = [&](const std::vector<double>& v) {
        return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(off),
                                   v.begin() + static_cast<std::ptrdiff_t>(off + span.length));
    };
    out.x = slice(s.x);
    out.y = slice(s.y);
    out.z = slice(s.z);
    return out;
}

/// Crops 1 Hz series to their common span; order preserved.
inline std::vector<UniformSeries> align_overlap(const std::vector<UniformSeries>& series) {
    std::vector<Span> spans;
    spans.reserve(series.size());
    for (const auto& s : series) spans.push_back({s.start, s.size()});
    const Span common = overlap_span(spans);
    std::vector<UniformSeries> out;
    out.reserve(series.size());
    for (const auto& s : series) out.push_back(crop_to(s, common));
    return out;
}

inline std::vector<UniformTriaxial> align_overlap(const std::vector<UniformTriaxial>& series) {
    std::vector<Span> spans;
    spans.reserve(series.size());
    for (const auto& s : series) spans.push_back({s.start, s.size()});
    const Span common = overlap_span(spans);
    std::vector<UniformTriaxial> out;
    out.reserve(series.size());
    for (const auto& s : series) out.push_back(crop_to(s, common));
    return out;
}

} // namespace paee::data
