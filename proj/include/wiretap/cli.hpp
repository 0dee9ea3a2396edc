#pragma once

// Command-line driver. Lives in a header so tests can run it in-process.
//
// Exit codes: 0 success, 2 config/usage, 3 integrity, 4 training failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wiretap/checkpoint.hpp"
#include "wiretap/config.hpp"
#include "wiretap/error.hpp"
#include "wiretap/evaluation.hpp"
#include "wiretap/leakage.hpp"
#include "wiretap/reliability.hpp"

namespace wiretap {

enum exit_code : int { exit_ok = 0, exit_usage = 2, exit_integrity = 3, exit_training = 4 };

namespace cli_detail {

inline std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

inline ExperimentConfig load_config(const std::string& path, std::int64_t seed) {
    ExperimentConfig e = load_experiment_config(path);
    if (seed >= 0) e.apply_master_seed(static_cast<std::uint64_t>(seed));
    return e;
}

// Master seed for a manifest-driven command: --seed, else the trained config's seed.
inline Rng command_rng(std::int64_t seed, const CodecSet& set, const char* purpose) {
    const std::uint64_t s = seed >= 0 ? static_cast<std::uint64_t>(seed) : set.config.train.seed;
    return Rng(s).derive(purpose);
}

inline std::string sibling(const std::string& manifest, const std::string& name) {
    const auto dir = std::filesystem::path(manifest).parent_path();
    return (dir.empty() ? std::filesystem::path(name) : dir / name).string();
}

inline void append_rows(const std::string& path, const std::string& rows) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw usage_error("cannot write '" + path + "'");
    if (fresh) out << csv_header << '\n';
    out << rows;
}

}  // namespace cli_detail

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Neural wiretap codes with helpers: train, evaluate, estimate leakage, sweep"};
    app.require_subcommand(1);

    std::string config_path, manifest_path, algo = "ptp", estimator, out_path, axis, grid, preset_name, alphas = "0.25,0.5,0.75";
    std::size_t trials = 100000, samples = 0;
    std::int64_t seed = -1;

    auto* train_cmd = app.add_subcommand("train", "train codecs and write checkpoints + manifest");
    train_cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
    train_cmd->add_option("--algo", algo, "sic or ptp")->check(CLI::IsMember({"sic", "ptp"}));
    train_cmd->add_option("--seed", seed, "master seed (overrides the config)");
    train_cmd->add_option("--out", out_path, "output directory (default: config 'out')");

    auto* eval_cmd = app.add_subcommand("eval", "Monte-Carlo error rates of a trained codec set");
    eval_cmd->add_option("--manifest", manifest_path)->required();
    eval_cmd->add_option("--trials", trials);
    eval_cmd->add_option("--estimator", estimator, "also estimate leakage: mine, club or both");
    eval_cmd->add_option("--preset", preset_name, "estimator preset: smoke, desk or full");
    eval_cmd->add_option("--samples", samples);
    eval_cmd->add_option("--seed", seed);
    eval_cmd->add_option("--out", out_path, "CSV path (default: eval.csv next to the manifest)");

    auto* leak_cmd = app.add_subcommand("leakage", "estimate I(S;Z^n) and append leakage rows");
    leak_cmd->add_option("--manifest", manifest_path)->required();
    leak_cmd->add_option("--estimator", estimator, "mine, club or both")->required();
    leak_cmd->add_option("--preset", preset_name);
    leak_cmd->add_option("--samples", samples);
    leak_cmd->add_option("--seed", seed);
    leak_cmd->add_option("--out", out_path, "CSV path (default: leakage.csv next to the manifest)");

    auto* sweep_cmd = app.add_subcommand("sweep", "train and evaluate along one axis");
    sweep_cmd->add_option("--config", config_path)->required();
    sweep_cmd->add_option("--axis", axis, "blocklength, helper_count, power or gains")->required();
    sweep_cmd->add_option("--grid", grid, "comma-separated grid points")->required();
    sweep_cmd->add_option("--algo", algo)->check(CLI::IsMember({"sic", "ptp"}));
    sweep_cmd->add_option("--trials", trials);
    sweep_cmd->add_option("--estimator", estimator, "mine, club, both or none");
    sweep_cmd->add_option("--preset", preset_name);
    sweep_cmd->add_option("--samples", samples);
    sweep_cmd->add_option("--seed", seed);
    sweep_cmd->add_option("--out", out_path, "output directory");

    auto* base_cmd = app.add_subcommand("compare-baselines", "SIC vs PTP vs time sharing vs joint decoding");
    base_cmd->add_option("--config", config_path)->required();
    base_cmd->add_option("--trials", trials);
    base_cmd->add_option("--alphas", alphas, "time-sharing alpha grid");
    base_cmd->add_option("--seed", seed);
    base_cmd->add_option("--out", out_path, "CSV path (default: print only)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return exit_ok;
        }
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }

    try {
        if (*train_cmd) {
            const ExperimentConfig e = cli_detail::load_config(config_path, seed);
            const CodecSet set = train(e.code, parse_algorithm(algo));
            const std::string dir = out_path.empty() ? e.output_dir : out_path;
            const std::string manifest = save_codec_set(set, dir);
            out << "algorithm=" << algo << " training_seconds=" << format_number(set.training_seconds)
                << " final_loss=" << format_number(set.final_loss) << "\n";
            out << "manifest=" << manifest << "\n";
            return exit_ok;
        }
        if (*eval_cmd) {
            if (trials == 0) throw usage_error("--trials must be positive");
            const CodecSet set = load_codec_set(manifest_path);
            EvalReport report = estimate_error_rates(set, trials, cli_detail::command_rng(seed, set, "eval"));
            if (!estimator.empty() && estimator != "none") {
                const EstimatorPreset preset = estimator_preset(preset_name.empty() ? "desk" : preset_name);
                report.leakage = estimate_leakage(set, estimator, preset, samples ? samples : preset.samples,
                                                  cli_detail::command_rng(seed, set, "leakage"));
            }
            const std::string path = out_path.empty() ? cli_detail::sibling(manifest_path, "eval.csv") : out_path;
            write_text_file(path, to_csv(report));
            out << to_csv(report);
            if (!report.leakage.empty())
                out << "achievable: " << format_tuple(achievability_report(report, report.leakage.front().estimator)) << "\n";
            else
                out << "achievable: leakage not estimated (pass --estimator)\n";
            return exit_ok;
        }
        if (*leak_cmd) {
            const CodecSet set = load_codec_set(manifest_path);
            const EstimatorPreset preset = estimator_preset(preset_name.empty() ? "desk" : preset_name);
            EvalReport report;
            report.config = set.config;
            report.config_hash = config_hash(set.config);
            report.leakage = estimate_leakage(set, estimator, preset, samples ? samples : preset.samples,
                                              cli_detail::command_rng(seed, set, "leakage"));
            const std::string rows = leakage_rows_csv(report);
            const std::string path = out_path.empty() ? cli_detail::sibling(manifest_path, "leakage.csv") : out_path;
            cli_detail::append_rows(path, rows);
            out << rows;
            return exit_ok;
        }
        if (*sweep_cmd) {
            const ExperimentConfig e = cli_detail::load_config(config_path, seed);
            SweepOptions opt;
            opt.algorithm = parse_algorithm(algo);
            opt.trials = trials;
            if (trials == 0) throw usage_error("--trials must be positive");
            opt.estimator = estimator.empty() ? "mine" : estimator;
            opt.preset = estimator_preset(preset_name.empty() ? e.estimator_preset : preset_name);
            opt.samples = samples;
            opt.seed = e.master_seed;
            opt.log = [&err](const std::string& line) { err << line << "\n"; };
            const SweepResult result = sweep(parse_axis(axis), cli_detail::split_list(grid), e.code, opt);
            const std::string dir = out_path.empty() ? e.output_dir : out_path;
            std::filesystem::create_directories(dir);
            write_text_file(dir + "/sweep.csv", to_csv(result));
            write_text_file(dir + "/sweep_index.csv", sweep_index_csv(result));
            out << to_csv(result);
            for (const auto& p : result.points)
                if (!p.failure.empty()) return exit_training;
            return exit_ok;
        }
        if (*base_cmd) {
            if (trials == 0) throw usage_error("--trials must be positive");
            const ExperimentConfig e = cli_detail::load_config(config_path, seed);
            const Rng rng = e.master_rng().derive("baselines");
            std::vector<double> grid_alpha;
            for (const auto& a : cli_detail::split_list(alphas)) grid_alpha.push_back(detail::parse_double(a, "alpha"));
            std::ostringstream table;
            table << "method,pe_joint,training_seconds\n";
            for (TrainAlgorithm alg : {TrainAlgorithm::sic, TrainAlgorithm::ptp}) {
                const CodecSet set = train(e.code, alg);
                table << to_string(alg) << ',' << format_number(joint_error_rate(set.codecs, e.code, trials, rng.derive(to_string(alg))))
                      << ',' << format_number(set.training_seconds) << '\n';
            }
            const JointDecodingCodec jd = baseline_joint_decoding(e.code);
            table << "joint_decoding," << format_number(joint_decoding_error_rate(jd, trials, rng.derive("joint")))
                  << ',' << format_number(jd.training_seconds) << '\n';
            const TimeSharingResult ts = baseline_time_sharing(e.code, grid_alpha, trials, rng.derive("time_sharing"));
            for (const auto& p : ts.points)
                table << "time_sharing(alpha=" << format_number(p.split.alpha) << ")," << format_number(p.pe_joint) << ",\n";
            if (!out_path.empty()) write_text_file(out_path, table.str());
            out << table.str();
            return exit_ok;
        }
    } catch (const integrity_error& e) {
        err << "integrity error: " << e.what() << "\n";
        return exit_integrity;
    } catch (const training_error& e) {
        err << "training failed: " << e.what() << "\n";
        return exit_training;
    } catch (const usage_error& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}

}  // namespace wiretap
