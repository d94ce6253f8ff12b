#pragma once

#include <stdexcept>
#include <string>

namespace paee {

/// Machine-checkable failure categories used across the library.
enum class errc {
    // data
    malformed_row,
    non_monotone_timestamps,
    empty_file,
    negative_gas_flow,
    missing_file,
    duplicate_subject_id,
    short_rest,
    no_overlap,
    // dsp
    cutoff_out_of_range,
    signal_too_short,
    empty_bin,
    too_few_breaths,
    bad_window,
    // energetics
    rest_too_short,
    length_mismatch,
    non_positive_mass,
    // features
    series_too_short,
    missing_sensor,
    // models
    too_few_samples,
    dimension_mismatch,
    shape_mismatch,
    empty_dataset,
    diverged_loss,
    // evaluation
    zero_mean_truth,
    constant_truth,
    too_few_subjects,
    // stats
    domain_error,
    sample_size_out_of_range,
    constant_sample,
    zero_variance,
    zero_error_variance,
    incomplete_grid,
    // generator / io
    config_invalid,
    io_error,
};

class Error : public std::runtime_error {
public:
    Error(errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    errc code() const noexcept { return code_; }

private:
    errc code_;
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::malformed_row: return "MalformedRow";
        case errc::non_monotone_timestamps: return "NonMonotoneTimestamps";
        case errc::empty_file: return "EmptyFile";
        case errc::negative_gas_flow: return "NegativeGasFlow";
        case errc::missing_file: return "MissingFile";
        case errc::duplicate_subject_id: return "DuplicateSubjectId";
        case errc::short_rest: return "ShortRest";
        case errc::no_overlap: return "NoOverlap";
        case errc::cutoff_out_of_range: return "CutoffOutOfRange";
        case errc::signal_too_short: return "SignalTooShort";
        case errc::empty_bin: return "EmptyBin";
        case errc::too_few_breaths: return "TooFewBreaths";
        case errc::bad_window: return "BadWindow";
        case errc::rest_too_short: return "RestTooShort";
        case errc::length_mismatch: return "LengthMismatch";
        case errc::non_positive_mass: return "NonPositiveMass";
        case errc::series_too_short: return "SeriesTooShort";
        case errc::missing_sensor: return "MissingSensor";
        case errc::too_few_samples: return "TooFewSamples";
        case errc::dimension_mismatch: return "DimensionMismatch";
        case errc::shape_mismatch: return "ShapeMismatch";
        case errc::empty_dataset: return "EmptyDataset";
        case errc::diverged_loss: return "DivergedLoss";
        case errc::zero_mean_truth: return "ZeroMeanTruth";
        case errc::constant_truth: return "ConstantTruth";
        case errc::too_few_subjects: return "TooFewSubjects";
        case errc::domain_error: return "DomainError";
        case errc::sample_size_out_of_range: return "SampleSizeOutOfRange";
        case errc::constant_sample: return "ConstantSample";
        case errc::zero_variance: return "ZeroVariance";
        case errc::zero_error_variance: return "ZeroErrorVariance";
        case errc::incomplete_grid: return "IncompleteGrid";
        case errc::config_invalid: return "ConfigInvalid";
        case errc::io_error: return "IoError";
    }
    return "UnknownError";
}

} // namespace paee
