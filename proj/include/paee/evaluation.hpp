#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <future>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "paee/cnn_lstm.hpp"
#include "paee/error.hpp"
#include "paee/features.hpp"
#include "paee/linear.hpp"
#include "paee/pipeline.hpp"

namespace paee::evaluation {

using features::CompositionSpec;
using features::SupervisedWindow;
using pipeline::PreprocessedDataset;
using pipeline::PreprocessedSubject;

/// Predictions x against ground truth y, equal lengths.
struct EvaluationPair {
    std::vector<double> predicted;
    std::vector<double> truth;
};

/// RMSE divided by the mean of the ground truth.
inline double nrmse(const EvaluationPair& p) {
    const std::size_t n = p.truth.size();
    if (n < 2 || p.predicted.size() != n)
        throw Error(errc::length_mismatch, "evaluation pair must hold >= 2 aligned samples");
    double mean_y = 0.0;
    for (double y : p.truth) mean_y += y;
    mean_y /= static_cast<double>(n);
    if (std::abs(mean_y) < 1e-12)
        throw Error(errc::zero_mean_truth, "ground-truth mean is zero");
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = p.truth[i] - p.predicted[i];
        ss += e * e;
    }
    return std::sqrt(ss / static_cast<double>(n)) / mean_y;
}

/// Out-of-sample R^2: 1 - SS_res / SS_tot with deviations of the truth
/// about its own mean. Negative when the predictor is worse than the mean.
inline double r_squared(const EvaluationPair& p) {
    const std::size_t n = p.truth.size();
    if (n < 2 || p.predicted.size() != n)
        throw Error(errc::length_mismatch, "evaluation pair must hold >= 2 aligned samples");
    double mean_y = 0.0;
    for (double y : p.truth) mean_y += y;
    mean_y /= static_cast<double>(n);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = p.truth[i] - p.predicted[i];
        const double d = p.truth[i] - mean_y;
        ss_res += e * e;
        ss_tot += d * d;
    }
    if (ss_tot <= 0.0) throw Error(errc::constant_truth, "ground truth is constant");
    return 1.0 - ss_res / ss_tot;
}

/// Variant with the denominator taken about the predictions instead of the
/// truth. Nonstandard; off the default path, kept for comparison only.
inline double r_squared_literal(const EvaluationPair& p) {
    const std::size_t n = p.truth.size();
    if (n < 2 || p.predicted.size() != n)
        throw Error(errc::length_mismatch, "evaluation pair must hold >= 2 aligned samples");
    double mean_y = 0.0;
    for (double y : p.truth) mean_y += y;
    mean_y /= static_cast<double>(n);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = p.predicted[i] - p.truth[i];
        const double d = p.predicted[i] - mean_y;
        ss_res += e * e;
        ss_tot += d * d;
    }
    if (ss_tot <= 0.0) throw Error(errc::constant_truth, "prediction is constant");
    return 1.0 - ss_res / ss_tot;
}

// ---------------------------------------------------------------------------
// Leave-one-subject-out cross-validation
// ---------------------------------------------------------------------------

enum class ModelKind { LR, CnnLstm };

inline const char* model_name(ModelKind m) { return m == ModelKind::LR ? "LR" : "CNN-LSTM"; }

struct FoldResult {
    std::string subject;
    double nrmse = 0.0;
    double r2 = 0.0;
    std::vector<double> t;       // target times of the held-out trace
    std::vector<double> truth;   // W/kg
    std::vector<double> pred;    // W/kg
    std::string model_artifact;  // serialized trained model
    std::string error;           // non-empty if the fold failed
};

struct ExperimentResult {
    std::string composition;
    std::string model;
    std::vector<FoldResult> folds;  // ordered by subject id
};

namespace detail {

inline std::vector<SupervisedWindow> subject_windows(const PreprocessedSubject& s,
                                                     const CompositionSpec& comp,
                                                     std::size_t window, std::size_t horizon) {
    return features::build_supervised_windows(s.acc, s.paee, comp, window, horizon, s.id);
}

inline void design_from_windows(const std::vector<SupervisedWindow>& ws, std::vector<double>& x,
                                std::vector<double>& y) {
    const std::size_t p = ws.front().iaa.size();
    x.resize(ws.size() * p);
    y.resize(ws.size());
    for (std::size_t i = 0; i < ws.size(); ++i) {
        for (std::size_t c = 0; c < p; ++c) x[i * p + c] = ws[i].iaa[c];
        y[i] = ws[i].target;
    }
}

/// Trains on every subject except `held_out`, evaluates on the held-out
/// trace. The training seed is the bare TrainConfig seed for every fold, so
/// a fold's model is byte-identical to one trained on a dataset that never
/// contained the held-out subject.
inline FoldResult run_fold(const PreprocessedDataset& ds, std::size_t held_out,
                           const CompositionSpec& comp, ModelKind model,
                           const cnn_lstm::TrainConfig& tcfg, std::size_t window,
                           std::size_t horizon) {
    FoldResult fold;
    fold.subject = ds.subjects[held_out].id;
    try {
        std::vector<SupervisedWindow> train;
        for (std::size_t j = 0; j < ds.subjects.size(); ++j) {
            if (j == held_out) continue;
            try {
                auto ws = subject_windows(ds.subjects[j], comp, window, horizon);
                train.insert(train.end(), std::make_move_iterator(ws.begin()),
                             std::make_move_iterator(ws.end()));
            } catch (const Error& e) {
                // a training subject without a single usable window is dropped,
                // mirroring the exclusion of incomplete participants
                if (e.code() != errc::series_too_short) throw;
            }
        }
        const std::vector<SupervisedWindow> test =
            subject_windows(ds.subjects[held_out], comp, window, horizon);
        if (train.empty() || test.empty())
            throw Error(errc::series_too_short, "not enough windows for this fold");

        std::vector<double> preds;
        if (model == ModelKind::LR) {
            std::vector<double> x, y;
            design_from_windows(train, x, y);
            const std::size_t p = train.front().iaa.size();
            const linear::LinearModel lm = linear::fit_ols(x, train.size(), p, y);
            std::vector<double> xt, yt;
            design_from_windows(test, xt, yt);
            preds = linear::predict_linear(lm, xt, test.size(), p);
            fold.model_artifact = linear::to_text(lm);
        } else {
            cnn_lstm::CnnLstmConfig cfg;
            cfg.in_channels = train.front().channels;
            cfg.seed = tcfg.seed;
            const cnn_lstm::TrainResult tr = cnn_lstm::cnn_lstm_train(train, cfg, tcfg);
            preds = cnn_lstm::predict(tr.weights, test);
            fold.model_artifact = cnn_lstm::to_text(tr.weights);
        }

        EvaluationPair pair;
        pair.predicted = preds;
        fold.t.reserve(test.size());
        pair.truth.reserve(test.size());
        for (const auto& w : test) {
            fold.t.push_back(w.target_time);
            pair.truth.push_back(w.target);
        }
        fold.nrmse = nrmse(pair);
        fold.r2 = r_squared(pair);
        fold.truth = std::move(pair.truth);
        fold.pred = std::move(pair.predicted);
    } catch (const Error& e) {
        fold.error = std::string(errc_name(e.code())) + ": " + e.what();
    }
    return fold;
}

} // namespace detail

/// LOSO over every subject for one (composition, model) cell. Folds are
/// independent; `threads` > 1 runs them concurrently without changing any
/// result. Per-fold failures land in FoldResult::error; the rest proceed.
inline ExperimentResult loso(const PreprocessedDataset& ds, const CompositionSpec& comp,
                             ModelKind model, const cnn_lstm::TrainConfig& tcfg = {},
                             std::size_t window = 30, std::size_t horizon = 1,
                             std::size_t threads = 1) {
    if (ds.subjects.size() < 2)
        throw Error(errc::too_few_subjects, "LOSO needs at least 2 subjects");

    ExperimentResult res;
    res.composition = comp.name;
    res.model = model_name(model);
    res.folds.resize(ds.subjects.size());

    if (threads <= 1) {
        for (std::size_t i = 0; i < ds.subjects.size(); ++i)
            res.folds[i] = detail::run_fold(ds, i, comp, model, tcfg, window, horizon);
        return res;
    }
    std::vector<std::future<FoldResult>> futures(ds.subjects.size());
    std::size_t next = 0;
    while (next < futures.size()) {
        const std::size_t burst = std::min(threads, futures.size() - next);
        for (std::size_t k = 0; k < burst; ++k)
            futures[next + k] = std::async(std::launch::async, [&, idx = next + k] {
                return detail::run_fold(ds, idx, comp, model, tcfg, window, horizon);
            });
        for (std::size_t k = 0; k < burst; ++k) res.folds[next + k] = futures[next + k].get();
        next += burst;
    }
    return res;
}

inline ExperimentResult loso(const data::Dataset& ds, const CompositionSpec& comp, ModelKind model,
                             const cnn_lstm::TrainConfig& tcfg = {}, std::size_t window = 30,
                             std::size_t horizon = 1, std::size_t threads = 1) {
    return loso(pipeline::preprocess(ds), comp, model, tcfg, window, horizon, threads);
}

// ---------------------------------------------------------------------------
// Result serialization
// ---------------------------------------------------------------------------

inline constexpr const char* kResultsHeader = "composition,model,subject,nrmse,r2";
inline constexpr const char* kTraceHeader = "t_s,paee_true_wkg,paee_pred_wkg";

inline std::string serialize_results_csv(const std::vector<ExperimentResult>& results) {
    std::string out(kResultsHeader);
    out += '\n';
    for (const auto& r : results)
        for (const auto& f : r.folds) {
            if (!f.error.empty()) continue;
            out += r.composition + "," + r.model + "," + f.subject + "," +
                   csv::format_full(f.nrmse) + "," + csv::format_full(f.r2) + "\n";
        }
    return out;
}

struct ResultRow {
    std::string composition, model, subject;
    double nrmse = 0.0, r2 = 0.0;
};

inline std::vector<ResultRow> parse_results_csv(std::string_view text) {
    const auto lines = csv::split_lines(text);
    if (lines.empty() || lines[0] != kResultsHeader)
        throw Error(errc::malformed_row, "expected results header");
    std::vector<ResultRow> rows;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto f = csv::split_fields(lines[i]);
        if (f.size() != 5)
            throw Error(errc::malformed_row, "expected 5 fields at line " + std::to_string(i + 1));
        rows.push_back({std::string(f[0]), std::string(f[1]), std::string(f[2]),
                        csv::parse_double(f[3], i + 1), csv::parse_double(f[4], i + 1)});
    }
    return rows;
}

inline std::string serialize_trace_csv(const FoldResult& fold) {
    std::string out(kTraceHeader);
    out += '\n';
    for (std::size_t i = 0; i < fold.t.size(); ++i) {
        csv::append_fixed(out, fold.t[i], 1);
        out += ',';
        csv::append_fixed(out, fold.truth[i]);
        out += ',';
        csv::append_fixed(out, fold.pred[i]);
        out += '\n';
    }
    return out;
}

} // namespace paee::evaluation
