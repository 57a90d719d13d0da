#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "bdsense/commands.hpp"

namespace {

std::uint64_t parse_seed_flag(const std::string& text) {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BD-RIS monostatic OFDM sensing: simulation, nested Tucker estimation and baselines"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "bdsense 1.0.0");

    bdsense::CommandOptions opts;
    std::string seed_text;
    std::string config;
    std::string out;
    std::string input;

    const auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config, "config file"); };
    const auto add_seed = [&](CLI::App* sub) {
        sub->add_option("--seed", seed_text, "master seed (falls back to BDSENSE_SEED, then the config)");
    };

    auto* check = app.add_subcommand("check", "identifiability verdicts and the dual-synthesis self-check");
    add_config(check);
    check->add_option("--method", opts.method, "check only this method");

    auto* simulate = app.add_subcommand("simulate", "synthesize one noisy observation into a dataset file");
    add_config(simulate);
    add_seed(simulate);
    simulate->add_option("--out", out, "dataset path")->required();
    simulate->add_option("--snr", opts.snr, "SNR in dB (inf for noiseless)");

    auto* estimate = app.add_subcommand("estimate", "run one method on a dataset and append a CSV row");
    estimate->add_option("dataset", input, "dataset path")->required();
    estimate->add_option("--method", opts.method, "ntfe, ls, kf or ml")->required();
    estimate->add_option("--out", out, "per-trial CSV to append to");
    add_config(estimate);

    auto* sweep = app.add_subcommand("sweep", "Monte Carlo sweep over SNR and trials");
    add_config(sweep);
    add_seed(sweep);
    sweep->add_option("--out", out, "output directory")->required();
    sweep->add_option("--workers", opts.workers, "worker threads");
    sweep->add_option("--method", opts.method, "run only this method");
    sweep->add_option("--snr", opts.snr, "SNR list, e.g. -10:5:30 or 10,20");
    sweep->add_option("--trials", opts.trials, "trials per SNR point");
    sweep->add_flag("--quiet", opts.quiet, "no progress output");

    auto* report = app.add_subcommand("report", "print an aggregate CSV as a table");
    report->add_option("aggregate", input, "aggregate CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : bdsense::kExitUsage;
    }

    if (!seed_text.empty()) {
        try {
            opts.seed = parse_seed_flag(seed_text);
        } catch (const std::exception&) {
            std::cerr << "error: --seed expects an unsigned integer, got '" << seed_text << "'\n";
            return bdsense::kExitUsage;
        }
    }
    opts.config = config;
    opts.out = out;
    opts.input = input;

    if (check->parsed()) return bdsense::cmd_check(opts, std::cout, std::cerr);
    if (simulate->parsed()) return bdsense::cmd_simulate(opts, std::cout, std::cerr);
    if (estimate->parsed()) return bdsense::cmd_estimate(opts, std::cout, std::cerr);
    if (sweep->parsed()) return bdsense::cmd_sweep(opts, std::cout, std::cerr);
    if (report->parsed()) return bdsense::cmd_report(opts, std::cout, std::cerr);
    return bdsense::kExitUsage;
}
