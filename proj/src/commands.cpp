#include "bdsense/commands.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "bdsense/config.hpp"
#include "bdsense/dataset.hpp"
#include "bdsense/error.hpp"
#include "bdsense/eval.hpp"
#include "bdsense/results_csv.hpp"

namespace bdsense {

namespace {

constexpr double kDualSynthesisTolerance = 1e-10;
constexpr Index kCheckSlots = 16;

int exit_code_for(Errc code) {
    switch (code) {
        case Errc::io: return kExitIo;
        default: return kExitUsage;
    }
}

// Runs a command body, mapping escaped errors to exit codes.
template <typename F>
int run_guarded(std::ostream& err, const char* command, F&& body) {
    try {
        return body();
    } catch (const Error& e) {
        fmt::print(err, "{}: error: {}\n", command, e.what());
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        fmt::print(err, "{}: error: {}\n", command, e.what());
        return kExitIo;
    }
}

AppConfig resolve_config(const CommandOptions& opts) {
    AppConfig cfg = opts.config.empty() ? default_config() : load_config(opts.config);
    if (opts.snr) cfg.sweep.snr_db = parse_snr_list(*opts.snr);
    if (opts.trials) cfg.sweep.trials = *opts.trials;
    if (opts.method) cfg.sweep.methods = {parse_method(*opts.method)};
    if (opts.workers) cfg.workers = *opts.workers;
    cfg.sweep.seed = resolve_seed(opts.seed, cfg.sweep.seed);
    return cfg;
}

void print_verdicts(std::ostream& out, const std::vector<Verdict>& verdicts) {
    for (const Verdict& v : verdicts)
        fmt::print(out, "  {:<5} {:<12} {:>8} >= {:<8} {}\n", to_string(v.method), v.condition, v.lhs, v.rhs,
                   v.pass ? "pass" : "FAIL");
}

std::string fmt_db(double ratio) { return std::isfinite(ratio) && ratio > 0 ? fmt::format("{:.2f}", to_db(ratio)) : "-"; }

}  // namespace

int cmd_check(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    return run_guarded(err, "check", [&] {
        const AppConfig cfg = resolve_config(opts);
        const auto verdicts = identifiability_check(cfg.sweep.system, cfg.sweep.methods);
        bool ok = true;
        fmt::print(out, "identifiability\n");
        print_verdicts(out, verdicts);
        for (const auto& v : verdicts) ok &= v.pass;
        if (verdicts.empty()) fmt::print(out, "  (no gated methods requested)\n");

        SystemConfig reduced = cfg.sweep.system;
        reduced.t = std::min(reduced.t, kCheckSlots);
        fmt::print(out, "dual synthesis (T = {})\n", reduced.t);
        try {
            const PilotSet pilots = gen_pilots(reduced);
            const TrialScene sc = draw_trial_scene(reduced, cfg.sweep.ranges, pilots, scene_seed(cfg.sweep.seed, 0));
            const ComplexTensor direct = synthesize_direct(sc.truth, reduced, sc.codebook, pilots);
            const double rel = relative_error(sc.y_clean, direct);
            const bool pass = rel <= kDualSynthesisTolerance;
            fmt::print(out, "  relative difference {:.3e} (limit {:.0e}) {}\n", rel, kDualSynthesisTolerance,
                       pass ? "pass" : "FAIL");
            ok &= pass;
        } catch (const Error& e) {
            fmt::print(out, "  not run: {}\n", e.what());
            ok = false;
        }
        fmt::print(out, "{}\n", ok ? "all checks pass" : "some checks FAILED");
        return ok ? kExitOk : kExitCheckFailed;
    });
}

int cmd_simulate(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    return run_guarded(err, "simulate", [&] {
        if (opts.out.empty()) throw Error(Errc::configuration, "--out is required");
        const AppConfig cfg = resolve_config(opts);
        const SystemConfig& sys = cfg.sweep.system;
        const double snr = opts.snr ? cfg.sweep.snr_db.front() : cfg.scene_snr_db;

        Dataset d;
        d.system = sys;
        d.seed = cfg.sweep.seed;
        d.pilots = gen_pilots(sys);
        TrialScene sc = draw_trial_scene(sys, cfg.sweep.ranges, d.pilots, scene_seed(d.seed, 0));
        const NoisyTensor noisy = add_noise(sc.y_clean, snr, noise_seed(d.seed, snr, 0));
        d.truth = sc.truth;
        d.codebook = std::move(sc.codebook);
        d.g = std::move(sc.g);
        d.y = noisy.y;
        d.snr_db = snr;
        d.realized_snr_db = noisy.realized_snr_db;
        d.noiseless = std::isinf(snr) && snr > 0;
        save_dataset(d, opts.out);
        fmt::print(out, "wrote {} (seed {}, SNR {} dB, realized {} dB{})\n", opts.out.string(), d.seed,
                   format_number(snr), format_number(d.realized_snr_db), d.noiseless ? ", noiseless" : "");
        return kExitOk;
    });
}

int cmd_estimate(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    return run_guarded(err, "estimate", [&] {
        if (!opts.method) throw Error(Errc::configuration, "--method is required");
        const Method method = parse_method(*opts.method);
        if (opts.input.empty()) throw Error(Errc::configuration, "a dataset path is required");
        AppConfig cfg = opts.config.empty() ? default_config() : load_config(opts.config);
        const Dataset d = load_dataset(opts.input);

        MethodSettings settings{cfg.sweep.bals, MlGrid::defaults(d.system), cfg.sweep.kf_split};
        if (!opts.config.empty()) settings.ml_grid = cfg.sweep.ml_grid;
        const std::uint64_t s_seed = scene_seed(d.seed, 0);
        const TrialInputs in{d.system, d.truth, d.codebook, d.pilots, d.g, d.y};
        const TrialRecord r = evaluate_methods(in, {method}, {true}, settings, d.snr_db, 0, s_seed).front();

        if (!opts.out.empty()) {
            const bool fresh = !std::filesystem::exists(opts.out) || std::filesystem::file_size(opts.out) == 0;
            std::ofstream csv(opts.out, std::ios::app);
            if (!csv) throw Error(Errc::io, fmt::format("cannot open {} for appending", opts.out.string()));
            if (fresh) write_trial_header(csv);
            write_trial_row(csv, r);
            csv.close();
            if (!csv) throw Error(Errc::io, fmt::format("failed to write {}", opts.out.string()));
        }

        fmt::print(out, "method {}  status {}\n", to_string(r.method), r.status);
        if (r.method == Method::ntfe || r.method == Method::ml) {
            fmt::print(out, "  tau    true {:.9e} s   est {:.9e} s\n", r.tau_true, r.tau_est);
            fmt::print(out, "  nu     true {:.9e} Hz  est {:.9e} Hz\n", r.nu_true, r.nu_est);
            fmt::print(out, "  phi    true {:.9f} rad est {:.9f} rad\n", r.phi_true, r.phi_est);
            fmt::print(out, "  theta  true {:.9f} rad est {:.9f} rad\n", r.theta_true, r.theta_est);
            fmt::print(out, "  alpha  relative error {:.3e}\n", r.alpha_err_rel);
        }
        fmt::print(out, "  NMSE(H_eff) {:.3e} ({} dB)\n", r.nmse_heff, fmt_db(r.nmse_heff));
        return kExitOk;
    });
}

int cmd_sweep(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    return run_guarded(err, "sweep", [&] {
        if (opts.out.empty()) throw Error(Errc::configuration, "--out (output directory) is required");
        const AppConfig cfg = resolve_config(opts);
        cfg.sweep.validate();
        if (cfg.workers < 1) throw Error(Errc::configuration, "workers must be at least 1");

        std::error_code ec;
        std::filesystem::create_directories(opts.out, ec);
        if (ec) throw Error(Errc::io, fmt::format("cannot create {}: {}", opts.out.string(), ec.message()));
        const auto trials_path = opts.out / "trials.csv";
        const auto aggregate_path = opts.out / "aggregate.csv";
        // Fail on unwritable outputs before spending the compute.
        for (const auto& p : {trials_path, aggregate_path}) {
            std::ofstream probe(p, std::ios::app);
            if (!probe) throw Error(Errc::io, fmt::format("cannot write {}", p.string()));
        }

        std::size_t last_decile = 0;
        const ProgressFn progress = opts.quiet ? ProgressFn{} : ProgressFn([&](std::size_t done, std::size_t total) {
            const std::size_t decile = done * 10 / total;
            if (decile != last_decile || done == total) {
                last_decile = decile;
                fmt::print(err, "sweep: {}/{} work units\n", done, total);
            }
        });
        const SweepReport report = run_sweep(cfg.sweep, cfg.workers, progress);

        for (Method m : cfg.sweep.methods)
            if (!method_allowed(report.verdicts, m))
                fmt::print(err, "sweep: method {} blocked by an identifiability condition\n", to_string(m));

        const auto write = [](const std::filesystem::path& p, auto&& body) {
            std::ofstream f(p, std::ios::trunc);
            if (!f) throw Error(Errc::io, fmt::format("cannot write {}", p.string()));
            body(f);
            f.close();
            if (!f) throw Error(Errc::io, fmt::format("failed to write {}", p.string()));
        };
        write(trials_path, [&](std::ostream& f) { write_trials_csv(f, report.trials); });
        write(aggregate_path, [&](std::ostream& f) { write_aggregate_csv(f, report.rows); });

        fmt::print(out, "{:<6} {:>8} {:>10} {:>6} {:>6}\n", "method", "snr_db", "nmse_db", "ok", "fail");
        for (const auto& r : report.rows)
            fmt::print(out, "{:<6} {:>8} {:>10} {:>6} {:>6}\n", to_string(r.method), format_number(r.snr_db),
                       fmt_db(r.nmse_heff), r.n_ok, r.n_fail);
        fmt::print(out, "wrote {} and {}\n", trials_path.string(), aggregate_path.string());
        return kExitOk;
    });
}

int cmd_report(const CommandOptions& opts, std::ostream& out, std::ostream& err) {
    return run_guarded(err, "report", [&] {
        if (opts.input.empty()) throw Error(Errc::configuration, "an aggregate CSV path is required");
        std::ifstream in(opts.input);
        if (!in) throw Error(Errc::io, fmt::format("cannot open {}", opts.input.string()));
        const auto rows = read_aggregate_csv(in);
        fmt::print(out, "{:<6} {:>8} {:>10} {:>12} {:>12} {:>12} {:>12} {:>6} {:>6}\n", "method", "snr_db", "nmse_db",
                   "rmse_tau", "rmse_nu", "rmse_angle", "rmse_alpha", "ok", "fail");
        const auto num = [](double v) { return std::isfinite(v) ? fmt::format("{:.4e}", v) : format_number(v); };
        for (const auto& r : rows)
            fmt::print(out, "{:<6} {:>8} {:>10} {:>12} {:>12} {:>12} {:>12} {:>6} {:>6}\n", to_string(r.method),
                       format_number(r.snr_db),
                       std::isfinite(r.nmse_heff_db) ? fmt::format("{:.2f}", r.nmse_heff_db)
                                                     : format_number(r.nmse_heff_db),
                       num(r.rmse_tau_norm), num(r.rmse_nu_norm), num(r.rmse_angle_rad), num(r.rmse_alpha), r.n_ok,
                       r.n_fail);
        return kExitOk;
    });
}

}  // namespace bdsense
