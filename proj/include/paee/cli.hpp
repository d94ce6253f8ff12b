#pragma once

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <thread>
#include <vector>

#include "paee/csv.hpp"
#include "paee/data.hpp"
#include "paee/error.hpp"
#include "paee/evaluation.hpp"
#include "paee/report.hpp"
#include "paee/stats.hpp"
#include "paee/synthgen.hpp"

namespace paee::cli {

// exit codes shared by every subcommand
inline constexpr int kExitOk = 0;
inline constexpr int kExitPartial = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitIncompleteGrid = 4;

/// Flat `key = value` settings file; '#' starts a comment.
inline std::map<std::string, std::string> parse_config_file(const std::string& text) {
    std::map<std::string, std::string> kv;
    for (std::string_view line : csv::split_lines(text)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        auto trim = [](std::string_view s) {
            while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
            while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
                s.remove_suffix(1);
            return s;
        };
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos)
            throw Error(errc::config_invalid, "expected key = value, got: " + std::string(line));
        const std::string key{trim(line.substr(0, eq))};
        const std::string val{trim(line.substr(eq + 1))};
        if (key.empty()) throw Error(errc::config_invalid, "empty key in config");
        kv[key] = val;
    }
    return kv;
}

inline synthgen::GeneratorConfig generator_config_from(const std::map<std::string, std::string>& kv) {
    synthgen::GeneratorConfig cfg;
    for (const auto& [key, val] : kv) {
        try {
            if (key == "n_subjects") cfg.n_subjects = std::stoul(val);
            else if (key == "seed") cfg.seed = std::stoull(val);
            else if (key == "acc_rate_hz") cfg.acc_rate_hz = std::stod(val);
            else if (key == "breath_interval_s") cfg.breath_interval_s = std::stod(val);
            else if (key == "breath_jitter") cfg.breath_jitter = std::stod(val);
            else if (key == "rer") cfg.rer = std::stod(val);
            else if (key == "rer_jitter") cfg.rer_jitter = std::stod(val);
            else if (key == "rmr_vo2_per_kg") cfg.rmr_vo2_per_kg = std::stod(val);
            else if (key == "acc_noise_sd") cfg.acc_noise_sd = std::stod(val);
            else if (key == "gas_noise_sd") cfg.gas_noise_sd = std::stod(val);
            else if (key == "talking_artifact_rate") cfg.talking_artifact_rate = std::stod(val);
            else if (key == "transition_tau_s") cfg.transition_tau_s = std::stod(val);
            else if (key == "subject_variability") cfg.subject_variability = std::stod(val);
            else if (key == "wrist_gain_scale") cfg.wrist_gain_scale = std::stod(val);
            else throw Error(errc::config_invalid, "unknown generator key: " + key);
        } catch (const Error&) {
            throw;
        } catch (const std::exception&) {
            throw Error(errc::config_invalid, "bad value for " + key + ": " + val);
        }
    }
    return cfg;
}

struct RunConfig {
    std::string data_dir;
    std::string out_dir;
    std::vector<std::string> compositions = {"pelvis-acc", "3-acc", "l-wrist-acc", "r-wrist-acc"};
    std::vector<std::string> models = {"lr", "cnn-lstm"};
    std::size_t window = 30;
    std::size_t horizon = 1;
    cnn_lstm::TrainConfig train;
    std::size_t threads = 0;  // 0 = hardware concurrency
};

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    for (std::string_view f : csv::split_fields(s))
        if (!f.empty()) out.emplace_back(f);
    return out;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

inline int cmd_synth(const synthgen::GeneratorConfig& cfg, const std::string& out_dir,
                     std::ostream& log = std::cout) {
    try {
        synthgen::validate(cfg);
    } catch (const Error& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }
    synthgen::GenerateSummary summary;
    try {
        summary = synthgen::generate_dataset(cfg, out_dir);
    } catch (const Error& e) {
        log << "i/o error: " << e.what() << "\n";
        return kExitIo;
    }
    log << synthgen::manifest_text(cfg);
    log << "wrote " << summary.subjects << " subjects to " << out_dir << " ("
        << summary.clamped_gas_samples << " gas samples clamped at zero)\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

inline evaluation::ModelKind model_kind_from(const std::string& token) {
    if (token == "lr" || token == "LR") return evaluation::ModelKind::LR;
    if (token == "cnn-lstm" || token == "CNN-LSTM") return evaluation::ModelKind::CnnLstm;
    throw Error(errc::config_invalid, "unknown model: " + token);
}

inline int cmd_run(const RunConfig& rc, std::ostream& log = std::cout) {
    if (rc.compositions.empty() || rc.models.empty()) {
        log << "config error: need at least one composition and one model\n";
        return kExitConfig;
    }
    std::vector<features::CompositionSpec> comps;
    std::vector<evaluation::ModelKind> models;
    try {
        for (const auto& c : rc.compositions) comps.push_back(features::composition_by_name(c));
        for (const auto& m : rc.models) models.push_back(model_kind_from(m));
    } catch (const Error& e) {
        log << "config error: " << e.what() << "\n";
        return kExitConfig;
    }

    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(rc.out_dir, ec);
    if (ec) {
        log << "i/o error: cannot create " << rc.out_dir << "\n";
        return kExitIo;
    }

    data::Dataset ds;
    pipeline::PreprocessedDataset pre;
    try {
        ds = data::load_dataset(rc.data_dir);
        for (const auto& w : ds.warnings) log << "warning: " << w << "\n";
        pre = pipeline::preprocess(ds);
    } catch (const Error& e) {
        log << "dataset error: " << e.what() << "\n";
        return kExitIo;
    }

    const std::size_t threads =
        rc.threads > 0 ? rc.threads : std::max<std::size_t>(1, std::thread::hardware_concurrency());

    std::vector<evaluation::ExperimentResult> results;
    std::vector<std::string> failures;
    for (const auto& comp : comps) {
        for (const auto model : models) {
            log << "running " << comp.name << " / " << evaluation::model_name(model) << " ...\n";
            evaluation::ExperimentResult res =
                evaluation::loso(pre, comp, model, rc.train, rc.window, rc.horizon, threads);
            for (const auto& fold : res.folds) {
                if (!fold.error.empty()) {
                    failures.push_back(comp.name + "," + res.model + "," + fold.subject + "," +
                                       fold.error);
                    continue;
                }
                const std::string stem = comp.name + "_" + res.model + "_" + fold.subject;
                csv::write_file(rc.out_dir + "/trace_" + stem + ".csv",
                                evaluation::serialize_trace_csv(fold));
                csv::write_file(rc.out_dir + "/model_" + stem + ".txt", fold.model_artifact);
            }
            results.push_back(std::move(res));
        }
    }
    csv::write_file(rc.out_dir + "/results.csv", evaluation::serialize_results_csv(results));

    for (const auto& s : pre.subjects) {
        std::string lab = "t_s,label\n";
        for (const auto& [t, name] : s.activity_starts) {
            csv::append_fixed(lab, t, 1);
            lab += "," + name + "\n";
        }
        csv::write_file(rc.out_dir + "/labels_" + s.id + ".csv", lab);
    }

    if (!failures.empty()) {
        std::string f = "composition,model,subject,error\n";
        for (const auto& line : failures) f += line + "\n";
        csv::write_file(rc.out_dir + "/failures.csv", f);
        log << failures.size() << " fold(s) failed; see failures.csv\n";
        return kExitPartial;
    }
    log << "wrote " << rc.out_dir << "/results.csv\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// stats
// ---------------------------------------------------------------------------

inline int cmd_stats(const std::string& results_path, const std::string& out_path,
                     std::ostream& log = std::cout) {
    std::vector<evaluation::ResultRow> rows;
    try {
        rows = evaluation::parse_results_csv(csv::read_file(results_path));
    } catch (const Error& e) {
        log << "i/o error: " << e.what() << "\n";
        return kExitIo;
    }
    stats::StatsReport report;
    try {
        report = stats::analysis_pipeline(rows);
    } catch (const Error& e) {
        if (e.code() == errc::incomplete_grid) {
            log << "incomplete grid: " << e.what() << "\n";
            return kExitIncompleteGrid;
        }
        log << "stats error: " << e.what() << "\n";
        return kExitPartial;
    }
    const std::string text = stats::to_text(report);
    try {
        csv::write_file(out_path, text);
    } catch (const Error& e) {
        log << "i/o error: " << e.what() << "\n";
        return kExitIo;
    }
    log << text;
    return kExitOk;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

inline int cmd_report(const std::string& traces_dir, const std::string& out_dir,
                      std::ostream& log = std::cout) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(traces_dir)) {
        log << "i/o error: no such directory " << traces_dir << "\n";
        return kExitIo;
    }
    std::vector<std::string> trace_files;
    for (const auto& e : fs::directory_iterator(traces_dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("trace_", 0) == 0 && name.size() > 10 &&
            name.substr(name.size() - 4) == ".csv")
            trace_files.push_back(name);
    }
    std::sort(trace_files.begin(), trace_files.end());
    if (trace_files.empty()) {
        log << "i/o error: no trace files in " << traces_dir << "\n";
        return kExitIo;
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) {
        log << "i/o error: cannot create " << out_dir << "\n";
        return kExitIo;
    }

    std::vector<evaluation::ResultRow> rows;
    try {
        for (const auto& name : trace_files) {
            // trace_<composition>_<model>_<subject>.csv
            const std::string stem = name.substr(6, name.size() - 10);
            const std::size_t u2 = stem.rfind('_');
            const std::size_t u1 = stem.rfind('_', u2 - 1);
            if (u2 == std::string::npos || u1 == std::string::npos) continue;
            const std::string comp = stem.substr(0, u1);
            const std::string model = stem.substr(u1 + 1, u2 - u1 - 1);
            const std::string subject = stem.substr(u2 + 1);

            const report::TraceData d = report::parse_trace_csv(csv::read_file(traces_dir + "/" + name));
            std::vector<std::pair<double, std::string>> bounds;
            const std::string labels_path = traces_dir + "/labels_" + subject + ".csv";
            if (fs::is_regular_file(labels_path)) {
                const std::string labels_text = csv::read_file(labels_path);
                for (std::string_view line : csv::split_lines(labels_text)) {
                    const auto f = csv::split_fields(line);
                    if (f.size() == 2 && f[0] != "t_s")
                        bounds.emplace_back(csv::parse_double(f[0], 0), std::string(f[1]));
                }
            }
            evaluation::EvaluationPair pair{d.pred, d.truth};
            rows.push_back({comp, model, subject, evaluation::nrmse(pair),
                            evaluation::r_squared(pair)});
            const std::string title = comp + " / " + model + " / " + subject;
            csv::write_file(out_dir + "/" + stem + ".svg", report::render_trace_svg(d, title, bounds));
        }
        csv::write_file(out_dir + "/summary.txt", report::summary_table(rows));
    } catch (const Error& e) {
        log << "i/o error: " << e.what() << "\n";
        return kExitIo;
    }
    log << report::summary_table(rows);
    log << "wrote " << rows.size() << " plots to " << out_dir << "\n";
    return kExitOk;
}

// ---------------------------------------------------------------------------
// all
// ---------------------------------------------------------------------------

inline int cmd_all(const synthgen::GeneratorConfig& gcfg, RunConfig rc, const std::string& out_root,
                   std::ostream& log = std::cout) {
    const std::string data_dir = out_root + "/data";
    const std::string run_dir = out_root + "/run";
    int rc1 = cmd_synth(gcfg, data_dir, log);
    if (rc1 != kExitOk) return rc1;
    rc.data_dir = data_dir;
    rc.out_dir = run_dir;
    const int rc2 = cmd_run(rc, log);
    if (rc2 != kExitOk && rc2 != kExitPartial) return rc2;
    const int rc3 = cmd_stats(run_dir + "/results.csv", out_root + "/stats_report.txt", log);
    if (rc3 != kExitOk) return rc3;
    const int rc4 = cmd_report(run_dir, out_root + "/report", log);
    if (rc4 != kExitOk) return rc4;
    return rc2;
}

} // namespace paee::cli
