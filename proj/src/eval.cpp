#include "bdsense/eval.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <limits>
#include <mutex>
#include <thread>
#include <tuple>

#include <fmt/format.h>

#include "bdsense/error.hpp"
#include "bdsense/rng.hpp"

namespace bdsense {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string_view to_string(Method m) noexcept {
    switch (m) {
        case Method::ntfe: return "ntfe";
        case Method::ls: return "ls";
        case Method::kf: return "kf";
        case Method::ml: return "ml";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    for (Method m : {Method::ntfe, Method::ls, Method::kf, Method::ml})
        if (to_string(m) == name) return m;
    throw Error(Errc::configuration, fmt::format("unknown method '{}' (expected ntfe, ls, kf or ml)", name));
}

double nmse(const ComplexMatrix& x, const ComplexMatrix& x_hat) {
    if (x.rows() != x_hat.rows() || x.cols() != x_hat.cols())
        throw Error(Errc::shape, fmt::format("NMSE of {}x{} against {}x{}", x_hat.rows(), x_hat.cols(), x.rows(),
                                             x.cols()));
    const double ref = x.squaredNorm();
    if (!(ref > 0.0)) throw Error(Errc::undefined_reference, "NMSE against an all-zero reference");
    return (x - x_hat).squaredNorm() / ref;
}

double rmse(const std::vector<double>& errors) {
    if (errors.empty()) throw Error(Errc::degenerate_input, "RMSE of an empty error list");
    double sum = 0.0;
    for (double e : errors) sum += e * e;
    return std::sqrt(sum / static_cast<double>(errors.size()));
}

double to_db(double power_ratio) { return 10.0 * std::log10(power_ratio); }

std::vector<Verdict> identifiability_check(const SystemConfig& cfg, const std::vector<Method>& methods) {
    const Index n = cfg.group_sizes.empty() ? cfg.ris_elements() : cfg.group_sizes.front();
    const Index l = cfg.st_antennas();
    const Index mq = cfg.m * cfg.q;
    const Index n2 = n * n;
    std::vector<Verdict> out;
    const auto add = [&](Method m, std::string cond, Index lhs, Index rhs) {
        out.push_back({m, std::move(cond), lhs, rhs, lhs >= rhs});
    };
    for (Method m : methods) {
        switch (m) {
            case Method::ntfe:
                add(m, "LT >= N", l * cfg.t, n);
                add(m, "LMQT >= N^2", l * mq * cfg.t, n2);
                add(m, "NQ >= 1", n * cfg.q, 1);
                add(m, "NM >= 1", n * cfg.m, 1);
                add(m, "MQ >= K", mq, cfg.group_count());
                break;
            case Method::ls:
            case Method::kf: add(m, "T >= N^4", cfg.t, n2 * n2); break;
            case Method::ml: break;
        }
    }
    return out;
}

bool method_allowed(const std::vector<Verdict>& verdicts, Method m) {
    return std::all_of(verdicts.begin(), verdicts.end(), [m](const Verdict& v) { return v.method != m || v.pass; });
}

void SweepConfig::validate() const {
    system.validate();
    bals.validate();
    if (snr_db.empty()) throw Error(Errc::configuration, "SNR list is empty");
    for (double s : snr_db)
        if (std::isnan(s) || s == -std::numeric_limits<double>::infinity())
            throw Error(Errc::configuration, "SNR values must be finite or +inf");
    if (trials < 1) throw Error(Errc::configuration, "trials must be at least 1");
    if (methods.empty()) throw Error(Errc::configuration, "method list is empty");
    for (std::size_t i = 0; i < methods.size(); ++i)
        for (std::size_t j = i + 1; j < methods.size(); ++j)
            if (methods[i] == methods[j])
                throw Error(Errc::configuration, fmt::format("method {} listed twice", to_string(methods[i])));
    if (std::find(methods.begin(), methods.end(), Method::ml) != methods.end()) ml_grid.validate();
}

std::uint64_t scene_seed(std::uint64_t master, int trial) {
    return derive_seed(master, {0x5ce9e, static_cast<std::uint64_t>(trial)});
}

std::uint64_t noise_seed(std::uint64_t master, double snr_db, int trial) {
    return derive_seed(master, {0x9015e, std::bit_cast<std::uint64_t>(snr_db), static_cast<std::uint64_t>(trial)});
}

namespace {

TrialRecord blank_record(Method m, double snr, int trial, std::uint64_t seed) {
    TrialRecord r;
    r.method = m;
    r.snr_db = snr;
    r.trial = trial;
    r.seed = seed;
    r.tau_true = r.nu_true = r.phi_true = r.theta_true = kNaN;
    r.tau_est = r.nu_est = r.phi_est = r.theta_est = kNaN;
    r.alpha_err_rel = kNaN;
    r.nmse_heff = kNaN;
    return r;
}

void fill_truth(TrialRecord& r, const SceneTruth& t) {
    r.tau_true = t.tau_s;
    r.nu_true = t.nu_hz;
    r.phi_true = t.phi_ris_d;
    r.theta_true = t.theta_ris_d;
}

void fill_estimate(TrialRecord& r, const EstimationResult& est, const SceneTruth& t) {
    r.tau_est = est.tau_s;
    r.nu_est = est.nu_hz;
    r.phi_est = est.phi;
    r.theta_est = est.theta;
    r.alpha_err_rel = std::abs(est.alpha - t.alpha) / std::abs(t.alpha);
    r.iters_s1 = est.diagnostics.iterations_stage1;
    r.iters_s2 = est.diagnostics.iterations_stage2;
}

template <typename F>
void guarded(TrialRecord& r, F&& body) {
    try {
        body();
        if (!std::isfinite(r.nmse_heff)) r.status = to_string(Errc::numerical_divergence);
    } catch (const Error& e) {
        r.status = to_string(e.code());
    } catch (const std::exception&) {
        r.status = "internal";
    }
}

}  // namespace

std::uint64_t bals_seed(std::uint64_t scene_seed, double snr_db) {
    return derive_seed(scene_seed, {2, std::bit_cast<std::uint64_t>(snr_db)});
}

TrialScene draw_trial_scene(const SystemConfig& system, const SceneRanges& ranges, const PilotSet& pilots,
                            std::uint64_t scene_seed) {
    TrialScene sc;
    Rng rng(derive_seed(scene_seed, {0}));
    sc.truth = random_scene(system, ranges, rng);
    sc.codebook = gen_codebook(system, derive_seed(scene_seed, {1}));
    sc.g = gen_channel(sc.truth, system);
    sc.y_clean = synthesize(sc.truth, system, sc.codebook, pilots);
    return sc;
}

std::vector<TrialRecord> evaluate_methods(const TrialInputs& in, const std::vector<Method>& methods,
                                          const std::vector<bool>& allowed, const MethodSettings& settings,
                                          double snr_db, int trial, std::uint64_t scene_seed) {
    std::vector<TrialRecord> out;
    for (Method m : methods) {
        out.push_back(blank_record(m, snr_db, trial, scene_seed));
        fill_truth(out.back(), in.truth);
    }

    ComplexMatrix h_true;
    try {
        h_true = true_effective_channel(in.truth, in.system, in.pilots);
    } catch (const Error& e) {
        for (auto& r : out) r.status = to_string(e.code());
        return out;
    }

    const KronDims dims{in.g.cols(), in.system.m * in.system.q, in.g.rows()};
    // LS and KF share one pseudo-inverse solve.
    EffectiveChannel h_ls;
    std::string ls_status = "ok";
    bool need_ls = false;
    for (std::size_t i = 0; i < methods.size(); ++i)
        need_ls |= allowed[i] && (methods[i] == Method::ls || methods[i] == Method::kf);
    if (need_ls) {
        try {
            h_ls = direct_ls(in.y, in.codebook.selection, settings.bals.pinv_tol);
        } catch (const Error& e) {
            ls_status = to_string(e.code());
        }
    }

    for (std::size_t i = 0; i < methods.size(); ++i) {
        TrialRecord& r = out[i];
        if (!allowed[i]) {
            r.status = to_string(Errc::identifiability);
            continue;
        }
        switch (methods[i]) {
            case Method::ls:
                if (ls_status != "ok") r.status = ls_status;
                else guarded(r, [&] { r.nmse_heff = nmse(h_true, h_ls.h); });
                break;
            case Method::kf:
                if (ls_status != "ok") r.status = ls_status;
                else guarded(r, [&] { r.nmse_heff = nmse(h_true, kf_project(h_ls.h, dims, settings.kf_split).h); });
                break;
            case Method::ntfe:
                guarded(r, [&] {
                    BalsOptions opts = settings.bals;
                    opts.seed = bals_seed(scene_seed, snr_db);
                    const EstimationResult est =
                        run_ntfe(in.y, in.g, in.codebook.selection, in.pilots, in.system, opts);
                    fill_estimate(r, est, in.truth);
                    r.nmse_heff = nmse(h_true, reassemble_effective_channel(est, in.g, in.pilots, in.system));
                });
                break;
            case Method::ml:
                guarded(r, [&] {
                    const EstimationResult est =
                        seq_ml(in.y, in.g, in.codebook, in.pilots, in.system, settings.ml_grid);
                    fill_estimate(r, est, in.truth);
                    r.nmse_heff = nmse(h_true, reassemble_effective_channel(est, in.g, in.pilots, in.system));
                });
                break;
        }
    }
    return out;
}

namespace {

// All methods on one (SNR, trial) unit, in the configured method order.
std::vector<TrialRecord> run_unit(const SweepConfig& cfg, const PilotSet& pilots, const std::vector<bool>& allowed,
                                  double snr, int trial) {
    const std::uint64_t s_seed = scene_seed(cfg.seed, trial);
    TrialScene sc;
    ComplexTensor y;
    try {
        sc = draw_trial_scene(cfg.system, cfg.ranges, pilots, s_seed);
        y = add_noise(sc.y_clean, snr, noise_seed(cfg.seed, snr, trial)).y;
    } catch (const Error& e) {
        std::vector<TrialRecord> out;
        for (Method m : cfg.methods) {
            out.push_back(blank_record(m, snr, trial, s_seed));
            out.back().status = to_string(e.code());
        }
        return out;
    }
    const TrialInputs in{cfg.system, sc.truth, sc.codebook, pilots, sc.g, y};
    return evaluate_methods(in, cfg.methods, allowed, {cfg.bals, cfg.ml_grid, cfg.kf_split}, snr, trial, s_seed);
}

}  // namespace

std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records, const std::vector<Method>& methods,
                                    const std::vector<double>& snr_db, double symbol_s) {
    std::vector<AggregateRow> rows;
    for (Method m : methods)
        for (double snr : snr_db) {
            AggregateRow row;
            row.method = m;
            row.snr_db = snr;
            double nmse_sum = 0.0;
            double tau_sq = 0.0;
            double nu_sq = 0.0;
            double ang_sq = 0.0;
            double alpha_sq = 0.0;
            // Summed in trial order so the result does not depend on record order.
            std::vector<const TrialRecord*> point;
            for (const TrialRecord& r : records)
                if (r.method == m && (r.snr_db == snr || (std::isinf(r.snr_db) && std::isinf(snr))))
                    point.push_back(&r);
            std::sort(point.begin(), point.end(), [](const TrialRecord* a, const TrialRecord* b) {
                return std::tie(a->trial, a->seed) < std::tie(b->trial, b->seed);
            });
            for (const TrialRecord* rp : point) {
                const TrialRecord& r = *rp;
                if (!r.ok()) {
                    ++row.n_fail;
                    continue;
                }
                ++row.n_ok;
                nmse_sum += r.nmse_heff;
                const double dt = (r.tau_est - r.tau_true) / symbol_s;
                const double dn = (r.nu_est - r.nu_true) * symbol_s;
                const double dp = r.phi_est - r.phi_true;
                const double dh = r.theta_est - r.theta_true;
                tau_sq += dt * dt;
                nu_sq += dn * dn;
                ang_sq += dp * dp + dh * dh;
                alpha_sq += r.alpha_err_rel * r.alpha_err_rel;
            }
            if (row.n_ok > 0) {
                const double k = row.n_ok;
                row.nmse_heff = nmse_sum / k;
                row.nmse_heff_db = to_db(row.nmse_heff);
                row.rmse_tau_norm = std::sqrt(tau_sq / k);
                row.rmse_nu_norm = std::sqrt(nu_sq / k);
                row.rmse_angle_rad = std::sqrt(ang_sq / k);
                row.rmse_alpha = std::sqrt(alpha_sq / k);
            } else {
                row.nmse_heff = row.nmse_heff_db = kNaN;
                row.rmse_tau_norm = row.rmse_nu_norm = row.rmse_angle_rad = row.rmse_alpha = kNaN;
            }
            rows.push_back(row);
        }
    return rows;
}

SweepReport run_sweep(const SweepConfig& cfg, int workers, const ProgressFn& progress) {
    cfg.validate();
    if (workers < 1) throw Error(Errc::configuration, "worker count must be at least 1");

    SweepReport report;
    report.verdicts = identifiability_check(cfg.system, cfg.methods);
    std::vector<bool> allowed;
    for (Method m : cfg.methods) allowed.push_back(method_allowed(report.verdicts, m));

    const PilotSet pilots = gen_pilots(cfg.system);
    const std::size_t n_snr = cfg.snr_db.size();
    const std::size_t n_units = n_snr * static_cast<std::size_t>(cfg.trials);
    std::vector<std::vector<TrialRecord>> units(n_units);

    std::atomic<std::size_t> next{0};
    std::size_t done = 0;
    std::mutex progress_mutex;
    const auto work = [&] {
        for (std::size_t u = next++; u < n_units; u = next++) {
            const double snr = cfg.snr_db[u / static_cast<std::size_t>(cfg.trials)];
            const int trial = static_cast<int>(u % static_cast<std::size_t>(cfg.trials));
            units[u] = run_unit(cfg, pilots, allowed, snr, trial);
            if (progress) {
                const std::lock_guard lock(progress_mutex);
                progress(++done, n_units);
            }
        }
    };
    const int n_threads = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), n_units));
    if (n_threads <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(work);
    }

    for (auto& u : units)
        for (auto& r : u) report.trials.push_back(std::move(r));
    report.rows = aggregate(report.trials, cfg.methods, cfg.snr_db, cfg.system.symbol_duration());
    return report;
}

}  // namespace bdsense
