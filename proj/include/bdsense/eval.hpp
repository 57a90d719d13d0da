#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "bdsense/baselines.hpp"
#include "bdsense/ntfe.hpp"
#include "bdsense/scene.hpp"

namespace bdsense {

enum class Method { ntfe, ls, kf, ml };

std::string_view to_string(Method m) noexcept;
/// Throws Errc::configuration for names other than ntfe, ls, kf, ml.
Method parse_method(std::string_view name);

/// ‖X − X̂‖²_F / ‖X‖²_F. Throws Errc::undefined_reference when X = 0 and
/// Errc::shape on mismatched sizes.
double nmse(const ComplexMatrix& x, const ComplexMatrix& x_hat);
/// √(mean eᵢ²). Throws Errc::degenerate_input on an empty list.
double rmse(const std::vector<double>& errors);
double to_db(double power_ratio);

struct Verdict {
    Method method = Method::ntfe;
    std::string condition;  ///< e.g. "LT >= N"
    Index lhs = 0;
    Index rhs = 0;
    bool pass = false;
};

/// Every dimension inequality that gates the requested methods:
///   ntfe: LT ≥ N, LMQT ≥ N², NQ ≥ 1, NM ≥ 1, MQ ≥ K
///   ls, kf: T ≥ N⁴
/// ml has no gate. N is the size of the processed (first) group.
std::vector<Verdict> identifiability_check(const SystemConfig& cfg, const std::vector<Method>& methods);
bool method_allowed(const std::vector<Verdict>& verdicts, Method m);

struct SweepConfig {
    SystemConfig system;
    SceneRanges ranges;
    std::vector<double> snr_db;
    int trials = 200;
    std::uint64_t seed = 0;
    std::vector<Method> methods{Method::ntfe, Method::kf, Method::ls};
    BalsOptions bals;
    MlGrid ml_grid;
    KfSplit kf_split = KfSplit::angle;

    /// Throws Errc::configuration on an empty SNR list, trials < 1, an empty or
    /// repeated method list, or an invalid system/BALS/grid configuration.
    void validate() const;
};

/// One method on one (SNR, trial) draw. Estimates are NaN when the method
/// does not produce them (ls, kf) or when it failed.
struct TrialRecord {
    Method method = Method::ntfe;
    double snr_db = 0.0;
    int trial = 0;
    std::uint64_t seed = 0;  ///< scene seed of the trial
    double tau_true = 0.0;
    double tau_est = 0.0;
    double nu_true = 0.0;
    double nu_est = 0.0;
    double phi_true = 0.0;
    double phi_est = 0.0;
    double theta_true = 0.0;
    double theta_est = 0.0;
    double alpha_err_rel = 0.0;  ///< |α̂ − α| / |α|
    double nmse_heff = 0.0;
    int iters_s1 = 0;
    int iters_s2 = 0;
    std::string status = "ok";

    [[nodiscard]] bool ok() const { return status == "ok"; }
};

/// Aggregates over the successful trials of one (method, SNR) point.
/// Delay errors are (τ̂ − τ)/T_s, Doppler errors (ν̂ − ν)·T_s, the angle RMSE is
/// √mean((φ̂−φ)² + (θ̂−θ)²), the gain RMSE uses |α̂ − α|/|α|.
struct AggregateRow {
    Method method = Method::ntfe;
    double snr_db = 0.0;
    double nmse_heff = 0.0;
    double nmse_heff_db = 0.0;
    double rmse_tau_norm = 0.0;
    double rmse_nu_norm = 0.0;
    double rmse_angle_rad = 0.0;
    double rmse_alpha = 0.0;
    int n_ok = 0;
    int n_fail = 0;
};

struct SweepReport {
    std::vector<Verdict> verdicts;
    std::vector<TrialRecord> trials;  ///< ordered by SNR, trial, method
    std::vector<AggregateRow> rows;   ///< ordered by method, then SNR
};

/// Seed of the scene (truth and codebook) drawn for a trial; shared by all SNRs.
std::uint64_t scene_seed(std::uint64_t master, int trial);
std::uint64_t noise_seed(std::uint64_t master, double snr_db, int trial);

/// BALS start seed of NTFE for a trial at one SNR.
std::uint64_t bals_seed(std::uint64_t scene_seed, double snr_db);

/// Scene of a trial: truth, codebook and channel drawn from scene_seed, and
/// the noiseless tensor.
struct TrialScene {
    SceneTruth truth;
    RisCodebook codebook;
    ComplexMatrix g;
    ComplexTensor y_clean;
};
TrialScene draw_trial_scene(const SystemConfig& system, const SceneRanges& ranges, const PilotSet& pilots,
                            std::uint64_t scene_seed);

struct TrialInputs {
    const SystemConfig& system;
    const SceneTruth& truth;
    const RisCodebook& codebook;
    const PilotSet& pilots;
    const ComplexMatrix& g;
    const ComplexTensor& y;
};

struct MethodSettings {
    BalsOptions bals;  ///< seed is replaced by bals_seed(scene seed, SNR)
    MlGrid ml_grid;
    KfSplit kf_split = KfSplit::angle;
};

/// Runs each listed method on one observation and scores it against the
/// truth. Methods with allowed[i] false are recorded as "identifiability"
/// failures without running. Never throws for estimator failures.
std::vector<TrialRecord> evaluate_methods(const TrialInputs& in, const std::vector<Method>& methods,
                                          const std::vector<bool>& allowed, const MethodSettings& settings,
                                          double snr_db, int trial, std::uint64_t scene_seed);

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

/// Runs every (SNR, trial) work unit on `workers` threads. Results depend only
/// on the configuration, never on the worker count or scheduling. Trial-level
/// failures are recorded, never thrown; methods blocked by an identifiability
/// gate report every trial as failed with status "identifiability".
SweepReport run_sweep(const SweepConfig& cfg, int workers = 1, const ProgressFn& progress = {});

/// Aggregation step of run_sweep, exposed for reuse and testing.
std::vector<AggregateRow> aggregate(const std::vector<TrialRecord>& records, const std::vector<Method>& methods,
                                    const std::vector<double>& snr_db, double symbol_s);

}  // namespace bdsense
