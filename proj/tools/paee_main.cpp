#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "paee/cli.hpp"

namespace {

paee::synthgen::GeneratorConfig load_generator_config(const std::string& config_path,
                                                      bool seed_set, std::uint64_t seed,
                                                      bool n_set, std::size_t n_subjects) {
    paee::synthgen::GeneratorConfig cfg;
    if (!config_path.empty())
        cfg = paee::cli::generator_config_from(
            paee::cli::parse_config_file(paee::csv::read_file(config_path)));
    if (seed_set) cfg.seed = seed;
    if (n_set) cfg.n_subjects = n_subjects;
    return cfg;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PAEE estimation pipeline: synthetic data, LOSO experiments, statistics, reports"};
    app.require_subcommand(1);

    // --- synth ---------------------------------------------------------
    auto* synth = app.add_subcommand("synth", "generate a seeded synthetic dataset");
    std::string synth_config, synth_out = "data";
    std::uint64_t synth_seed = 42;
    std::size_t synth_n = 9;
    synth->add_option("--config", synth_config, "generator key = value config file");
    auto* synth_seed_opt = synth->add_option("--seed", synth_seed, "generator seed");
    auto* synth_n_opt = synth->add_option("--subjects", synth_n, "number of subjects");
    synth->add_option("--out", synth_out, "output dataset directory");

    // --- run -----------------------------------------------------------
    auto* run = app.add_subcommand("run", "preprocess, train, and evaluate the LOSO grid");
    paee::cli::RunConfig rc;
    std::string run_comps = "pelvis-acc,3-acc,l-wrist-acc,r-wrist-acc";
    std::string run_models = "lr,cnn-lstm";
    run->add_option("--data", rc.data_dir, "dataset directory")->required();
    run->add_option("--out", rc.out_dir, "output directory")->required();
    run->add_option("--compositions", run_comps, "comma list of compositions");
    run->add_option("--models", run_models, "comma list of models (lr, cnn-lstm)");
    run->add_option("--window", rc.window, "window length in seconds");
    run->add_option("--horizon", rc.horizon, "forecast horizon in seconds");
    run->add_option("--seed", rc.train.seed, "training seed");
    run->add_option("--epochs", rc.train.epochs, "CNN-LSTM training epochs");
    run->add_option("--batch-size", rc.train.batch_size, "CNN-LSTM batch size");
    run->add_option("--learning-rate", rc.train.learning_rate, "Adam learning rate");
    run->add_option("--threads", rc.threads, "parallel folds (0 = auto)");

    // --- stats ---------------------------------------------------------
    auto* st = app.add_subcommand("stats", "normality, RM-ANOVA, and pairwise tests on results.csv");
    std::string stats_results, stats_out = "stats_report.txt";
    st->add_option("--results", stats_results, "results.csv path")->required();
    st->add_option("--out", stats_out, "report output path");

    // --- report --------------------------------------------------------
    auto* rep = app.add_subcommand("report", "SVG trace plots and a mean (SD) summary table");
    std::string rep_traces, rep_out = "report";
    rep->add_option("--traces", rep_traces, "directory holding trace_*.csv")->required();
    rep->add_option("--out", rep_out, "output directory");

    // --- all -----------------------------------------------------------
    auto* all = app.add_subcommand("all", "synth + run + stats + report in one tree");
    std::string all_config, all_out = "experiment";
    std::uint64_t all_seed = 42;
    std::size_t all_n = 9;
    paee::cli::RunConfig all_rc;
    all->add_option("--config", all_config, "generator config file");
    auto* all_seed_opt = all->add_option("--seed", all_seed, "generator + training seed");
    auto* all_n_opt = all->add_option("--subjects", all_n, "number of subjects");
    all->add_option("--out", all_out, "experiment root directory");
    all->add_option("--epochs", all_rc.train.epochs, "CNN-LSTM training epochs");
    all->add_option("--threads", all_rc.threads, "parallel folds (0 = auto)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : paee::cli::kExitConfig;
    }

    try {
        if (*synth) {
            const auto cfg = load_generator_config(synth_config, synth_seed_opt->count() > 0,
                                                   synth_seed, synth_n_opt->count() > 0, synth_n);
            return paee::cli::cmd_synth(cfg, synth_out);
        }
        if (*run) {
            rc.compositions = paee::cli::split_list(run_comps);
            rc.models = paee::cli::split_list(run_models);
            return paee::cli::cmd_run(rc);
        }
        if (*st) return paee::cli::cmd_stats(stats_results, stats_out);
        if (*rep) return paee::cli::cmd_report(rep_traces, rep_out);
        if (*all) {
            const auto cfg = load_generator_config(all_config, all_seed_opt->count() > 0, all_seed,
                                                   all_n_opt->count() > 0, all_n);
            all_rc.train.seed = cfg.seed;
            return paee::cli::cmd_all(cfg, all_rc, all_out);
        }
    } catch (const paee::Error& e) {
        std::cerr << paee::errc_name(e.code()) << ": " << e.what() << "\n";
        return e.code() == paee::errc::config_invalid ? paee::cli::kExitConfig
                                                      : paee::cli::kExitIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return paee::cli::kExitIo;
    }
    return paee::cli::kExitConfig;
}
