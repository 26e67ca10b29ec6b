// nmtmask — toy NMT with a Gaussian positional mask, a Q-walk bonus, and the
// election/latency analyses around it.
//
// Exit codes: 0 success, 2 config/usage error, 1 runtime failure.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "nmtmask/commands.hpp"
#include "nmtmask/config.hpp"

int main(int argc, char** argv) {
    CLI::App app{"toy NMT: Gaussian-masked decoding with a Q-learning bonus"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed_override;
    bool verbose = false;
    app.add_option("--config", config_path, "run configuration file (key = value lines)");
    app.add_option("--seed", seed_override, "override the global seed");
    app.add_flag("--verbose", verbose, "log progress to stderr");

    auto* train_cmd = app.add_subcommand("train", "train the attention baseline");

    nmtmask::AnalyzeOptions analyze_opt;
    auto* analyze_cmd =
        app.add_subcommand("analyze", "satisfaction table and Gaussian fits");
    analyze_cmd->add_option("--model", analyze_opt.model_path, "model checkpoint");
    analyze_cmd->add_option("--matrices", analyze_opt.matrices_path,
                            "analyze an exported attention-matrices JSON instead");
    analyze_cmd->add_flag("--fit", analyze_opt.fit, "also fit Gaussians per attention row");

    std::string trainq_model;
    auto* trainq_cmd = app.add_subcommand("train-q", "train the walk Q-network");
    trainq_cmd->add_option("--model", trainq_model, "model checkpoint");

    nmtmask::InferCliOptions infer_opt;
    auto* infer_cmd = app.add_subcommand("infer", "translate sentences");
    infer_cmd->add_option("--mode", infer_opt.mode, "attention|gaussian|gaussian_rl");
    infer_cmd->add_option("--model", infer_opt.model_path, "model checkpoint");
    infer_cmd->add_option("--qnet", infer_opt.qnet_path, "Q-network checkpoint");
    infer_cmd->add_option("--input", infer_opt.input_path, "input file, or - for stdin");
    infer_cmd->add_option("--emit-weights", infer_opt.emit_weights_path,
                          "write per-step weight grids to this JSON file");

    nmtmask::BenchOptions bench_opt;
    auto* bench_cmd = app.add_subcommand("bench", "BLEU + latency + satisfaction bundle");
    bench_cmd->add_option("--model", bench_opt.model_path, "model checkpoint");
    bench_cmd->add_option("--qnet", bench_opt.qnet_path, "Q-network checkpoint");
    bench_cmd->add_option("--test", bench_opt.test_path, "test TSV (default: test split)");
    bench_cmd->add_option("--reps", bench_opt.repetitions, "timing repetitions per sentence")
        ->check(CLI::PositiveNumber);
    bench_cmd->add_option("--out", bench_opt.out_dir, "output directory (default: out.dir)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        nmtmask::RunConfig cfg;
        if (!config_path.empty()) cfg = nmtmask::RunConfig::load(config_path);
        if (seed_override) cfg.seed = *seed_override;
        std::ostream* log = verbose ? &std::cerr : nullptr;

        if (train_cmd->parsed()) {
            cmd_train(cfg, log);
        } else if (analyze_cmd->parsed()) {
            cmd_analyze(cfg, analyze_opt, std::cout, log);
        } else if (trainq_cmd->parsed()) {
            cmd_train_q(cfg, trainq_model, log);
        } else if (infer_cmd->parsed()) {
            cmd_infer(cfg, infer_opt, std::cin, std::cout, log);
        } else if (bench_cmd->parsed()) {
            cmd_bench(cfg, bench_opt, log);
        }
        return 0;
    } catch (const nmtmask::ConfigError& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 2;
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return 1;
    }
}
